"""
Entry point for the privcode package.
This allows running the CLI directly with `python -m privcode`.
"""

import sys

from privcode.cli import main

if __name__ == "__main__":
    sys.exit(main())
