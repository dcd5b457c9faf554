import sys

from privload.cli import main

sys.exit(main())
