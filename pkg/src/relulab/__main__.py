"""Module entry point: `python -m relulab` mirrors the `relulab` script."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
