"""Allow ``python -m modmap``."""

import sys

from .cli import main

sys.exit(main())
