"""Allow ``python3 -m anisowave``."""

import sys

from .cli import main

sys.exit(main())
