"""Entry point for ``python -m polarsep``."""

import sys

from polarsep.cli.main import main

if __name__ == "__main__":
    sys.exit(main())
