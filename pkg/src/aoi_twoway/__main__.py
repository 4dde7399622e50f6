"""Allow ``python -m aoi_twoway``."""

import sys

from .cli import main

sys.exit(main())
