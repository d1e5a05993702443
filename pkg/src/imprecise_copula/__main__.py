"""Main entry point for the imprecise_copula package."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
