"""
Privacy mathematics for distributed Laplace perturbation.

Covers per-release guarantees of the Laplace mechanism, the gamma-difference
decomposition that lets every household add its own share of a zone's Laplace
noise, k-fold adaptive composition, and the mapping from a composed epsilon to
a re-identification confidence rho (posterior belief of an adversary deciding
between two neighbouring data sets).

All samplers take an explicit ``numpy.random.Generator``; nothing here keeps
global random state.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from privload.errors import DomainError

DEFAULT_DELTA_TILDE = 1e-9


def _require_positive(name: str, value: float) -> None:
    if not (value > 0) or not math.isfinite(value):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


# ---------------------------------------------------------------------------
# Parameters and guarantees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrivacyParams:
    """Noise scale and sensitivity of one Laplace release.

    ``epsilon`` is derived, never passed: it is always ``delta_f / lam``.
    """

    lam: float
    delta_f: float
    delta: float = 0.0
    epsilon: float = field(init=False)

    def __post_init__(self):
        _require_positive("lam", self.lam)
        _require_positive("delta_f", self.delta_f)
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta!r}")
        object.__setattr__(self, "epsilon", self.delta_f / self.lam)

    def compose(self, k: int, delta_tilde: float = DEFAULT_DELTA_TILDE) -> "ComposedGuarantee":
        return compose_k_fold(self.epsilon, self.delta, k, delta_tilde)


@dataclass(frozen=True)
class ComposedGuarantee:
    """Privacy guarantee accumulated over ``k`` releases on the same individuals.

    ``branches`` holds the three candidate bounds (linear, the log(e + ...)
    bound, the log(1/delta_tilde) bound); ``epsilon_tilde`` is their minimum.
    """

    epsilon_tilde: float
    delta_tilde: float
    delta_total: float
    k: int
    rho: float
    branches: tuple[float, float, float]

    @property
    def winning_branch(self) -> int:
        return int(np.argmin(self.branches))


@dataclass(frozen=True)
class NoiseShare:
    """One household's share of a zone's Laplace noise."""

    value: float
    n: int
    lam: float


# ---------------------------------------------------------------------------
# epsilon <-> scale <-> rho
# ---------------------------------------------------------------------------


def epsilon_from_scale(delta_f: float, lam: float) -> float:
    """Per-release epsilon of Laplace noise with scale ``lam`` for sensitivity ``delta_f``."""
    _require_positive("delta_f", delta_f)
    _require_positive("lam", lam)
    return delta_f / lam


def rho_from_epsilon(epsilon_tilde: float) -> float:
    """Upper bound on an adversary's confidence that an individual is present.

    ``rho = 1 / (1 + exp(-epsilon))``; 0.5 is random guessing.
    """
    if not epsilon_tilde >= 0:
        raise DomainError(f"epsilon must be non-negative, got {epsilon_tilde!r}")
    return 1.0 / (1.0 + math.exp(-epsilon_tilde))


def epsilon_from_rho(rho: float) -> float:
    """Inverse of :func:`rho_from_epsilon` on the open interval (0.5, 1)."""
    if not 0.5 < rho < 1.0:
        raise DomainError(f"rho must lie in the open interval (0.5, 1), got {rho!r}")
    # log1p keeps the 1 - rho term accurate as rho approaches 1
    return math.log(rho) - math.log1p(-rho)


def compose_k_fold(
    epsilon: float,
    delta: float,
    k: int,
    delta_tilde: float = DEFAULT_DELTA_TILDE,
) -> ComposedGuarantee:
    """Composed guarantee of ``k`` adaptive (epsilon, delta) releases.

    Evaluates the three candidate bounds of the homogeneous k-fold adaptive
    composition theorem and keeps the smallest.  The overall failure
    probability is ``1 - (1 - delta)**k * (1 - delta_tilde)``.

    Parameters
    ----------
    epsilon : float
        Per-release epsilon, > 0.
    delta : float
        Per-release failure probability in [0, 1].
    k : int
        Number of releases, >= 1.
    delta_tilde : float
        Slack probability in (0, 1].

    Raises
    ------
    DomainError
        If any parameter is out of range.
    """
    _require_positive("epsilon", epsilon)
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta!r}")
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    k = int(k)
    if not 0.0 < delta_tilde <= 1.0:
        raise DomainError(f"delta_tilde must lie in (0, 1], got {delta_tilde!r}")

    linear = k * epsilon
    # (e^eps - 1) / (e^eps + 1) == tanh(eps / 2), stable for small and large eps
    drift = math.tanh(epsilon / 2.0) * k * epsilon
    with_e = drift + epsilon * math.sqrt(
        2.0 * k * math.log(math.e + math.sqrt(k * epsilon**2) / delta_tilde)
    )
    plain = drift + epsilon * math.sqrt(2.0 * k * math.log(1.0 / delta_tilde))
    branches = (linear, with_e, plain)
    eps_tilde = min(branches)

    delta_total = 1.0 - (1.0 - delta) ** k * (1.0 - delta_tilde)
    return ComposedGuarantee(
        epsilon_tilde=eps_tilde,
        delta_tilde=delta_tilde,
        delta_total=delta_total,
        k=k,
        rho=rho_from_epsilon(eps_tilde),
        branches=branches,
    )


# ---------------------------------------------------------------------------
# Random sources
# ---------------------------------------------------------------------------


def _key_words(key) -> list[int]:
    digest = hashlib.blake2b(repr(key).encode("utf-8"), digest_size=16).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``.

    Keys are hashed with a stable digest (not Python's salted ``hash``), so the
    same household id always maps to the same stream regardless of the order in
    which households are visited.
    """
    if int(seed) != seed or seed < 0:
        raise DomainError(f"seed must be a non-negative integer, got {seed!r}")
    entropy = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for key in keys:
        entropy.extend(_key_words(key))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def sample_laplace(lam: float, rng: np.random.Generator, size=None):
    """Zero-mean Laplace draw(s) with scale ``lam``."""
    _require_positive("lam", lam)
    return rng.laplace(0.0, lam, size)


def _standard_gamma_mt(shape: float, size: int, rng: np.random.Generator) -> np.ndarray:
    # Marsaglia & Tsang squeeze/rejection; valid for shape >= 1.
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    pending = np.arange(size)
    while pending.size:
        m = pending.size
        x = rng.standard_normal(m)
        u = rng.random(m)
        v = (1.0 + c * x) ** 3
        positive = v > 0
        logv = np.log(np.where(positive, v, 1.0))
        x2 = x * x
        accept = positive & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(u, where=u > 0, out=np.full(m, -np.inf)) < 0.5 * x2 + d * (1.0 - v + logv))
        )
        out[pending[accept]] = d * v[accept]
        pending = pending[~accept]
    return out


def sample_gamma(shape: float, scale: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Exact Gamma(shape, scale) draws, including shape < 1.

    For shape < 1 a Gamma(shape + 1) draw is scaled by ``U ** (1 / shape)``;
    the product is formed in log space so that tiny values underflow cleanly
    to zero instead of producing NaN.
    """
    _require_positive("shape", shape)
    _require_positive("scale", scale)
    size = int(size)
    if shape >= 1.0:
        return scale * _standard_gamma_mt(shape, size, rng)
    boosted = _standard_gamma_mt(shape + 1.0, size, rng)
    u = rng.random(size)
    with np.errstate(divide="ignore", under="ignore"):
        log_g = np.log(boosted) + np.log(u) / shape
        return scale * np.exp(log_g)


def _check_group(n: int, lam: float) -> None:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise DomainError(f"group size n must be an integer >= 1, got {n!r}")
    _require_positive("lam", lam)


def gamma_shares(n: int, lam: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vector of ``size`` independent shares ``G1 - G2`` with G ~ Gamma(1/n, lam).

    Summing ``n`` independent shares gives one Laplace(lam) variate.
    """
    _check_group(n, lam)
    g1 = sample_gamma(1.0 / n, lam, size, rng)
    g2 = sample_gamma(1.0 / n, lam, size, rng)
    return g1 - g2


def sample_gamma_share(n: int, lam: float, rng: np.random.Generator) -> NoiseShare:
    """A single household's noise share for a group of ``n`` households."""
    value = float(gamma_shares(n, lam, 1, rng)[0])
    return NoiseShare(value=value, n=int(n), lam=float(lam))
