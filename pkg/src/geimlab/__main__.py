"""
Entry point for running geimlab as a module.

This allows the package to be executed with:
    python -m geimlab
"""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
