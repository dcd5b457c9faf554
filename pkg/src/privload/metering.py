"""
Distributed metering simulation.

Households add their own gamma noise share before readings leave the meter;
zone aggregators only ever see sums, and the region is the sum of zones.  By
the gamma divisibility of the Laplace law, a zone sum over ``n`` households
carries exactly one Laplace(lam) draw per timestamp.

Perturbed readings are never clamped: a clamped sum would no longer carry
Laplace noise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from privload.errors import AlignmentError, DomainError
from privload.privacy import _check_group, gamma_shares, sample_laplace, substream
from privload.series import LoadSeries

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Zone:
    zone_id: str
    households: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "households", tuple(str(h) for h in self.households))
        if not self.households:
            raise DomainError(f"zone {self.zone_id!r} has no households")
        if len(set(self.households)) != len(self.households):
            raise DomainError(f"zone {self.zone_id!r} lists a household twice")

    @property
    def n(self) -> int:
        return len(self.households)


def perturb_household(
    series: LoadSeries, zone_size: int, lam: float, rng: np.random.Generator
) -> LoadSeries:
    """Add an independent gamma share to every reading of one household.

    Missing readings (NaN) stay missing; no share is consumed for them, but the
    random stream still advances so noise stays aligned with timestamp index.
    """
    _check_group(zone_size, lam)
    if len(series) == 0:
        raise DomainError(f"{series.entity_id}: cannot perturb an empty series")
    observed = series.values[~series.gaps]
    if np.any(observed < 0):
        raise DomainError(f"{series.entity_id}: raw load readings must be >= 0")
    noise = gamma_shares(zone_size, lam, len(series), rng)
    return series.with_values(series.values + noise)


def perturb_zone_aggregate(
    series: LoadSeries, lam: float, rng: np.random.Generator
) -> LoadSeries:
    """Zone-level shortcut: one Laplace(lam) draw per timestamp.

    Distributionally identical to summing ``n`` perturbed households; used when
    only zone aggregates exist (as in GEFCom).
    """
    if len(series) == 0:
        raise DomainError(f"{series.entity_id}: cannot perturb an empty series")
    return series.with_values(series.values + sample_laplace(lam, rng, len(series)))


def _sum_aligned(series: Sequence[LoadSeries], entity_id: str, what: str) -> LoadSeries:
    if not series:
        raise DomainError(f"cannot aggregate an empty list of {what}")
    reference = series[0]
    total = reference.values.copy()
    for s in series[1:]:
        if len(s) != len(reference) or not np.array_equal(s.timestamps, reference.timestamps):
            raise AlignmentError(
                f"{s.entity_id}: timestamps differ from {reference.entity_id}", s.entity_id
            )
        # NaN propagates: a missing member makes the sum undefined at that hour
        total += s.values
    return LoadSeries(entity_id, reference.timestamps, total)


def aggregate_zone(series: Sequence[LoadSeries], zone_id: str = "zone") -> LoadSeries:
    """Pointwise sum of (perturbed) household series sharing identical timestamps."""
    return _sum_aligned(list(series), zone_id, "households")


def aggregate_region(zone_series: Sequence[LoadSeries], region_id: str = "REGION") -> LoadSeries:
    """Pointwise sum of zone series, folded in the order given."""
    return _sum_aligned(list(zone_series), region_id, "zones")


def simulate_zone(
    zone: Zone,
    household_series: dict[str, LoadSeries],
    lam: float,
    seed: int,
) -> LoadSeries:
    """Perturb every household of ``zone`` on its own substream and sum.

    Each household's stream is keyed by ``(seed, zone_id, household_id)``, so
    the result does not depend on dict ordering.
    """
    perturbed = []
    for hid in sorted(zone.households):
        try:
            raw = household_series[hid]
        except KeyError:
            raise DomainError(f"no series for household {hid!r} of zone {zone.zone_id!r}") from None
        rng = substream(seed, "household", zone.zone_id, hid)
        perturbed.append(perturb_household(raw, zone.n, lam, rng))
    logger.debug("zone %s: perturbed %d households at lambda=%g", zone.zone_id, zone.n, lam)
    return aggregate_zone(perturbed, zone.zone_id)


def perturb_zones(zones: Sequence[LoadSeries], lam: float, seed: int) -> list[LoadSeries]:
    """Zone-level Laplace perturbation with one substream per zone id.

    ``lam == 0`` returns the inputs unchanged (the unperturbed reference run).
    For a fixed seed the noise is ``lam`` times the same unit-scale draws, so
    different noise levels are compared on common random numbers.
    """
    if lam == 0:
        return list(zones)
    out = []
    for z in zones:
        rng = substream(seed, "zone", z.entity_id)
        out.append(perturb_zone_aggregate(z, lam, rng))
    return out
