"""Allow running the command-line interface as ``python -m chebnet``."""
import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
