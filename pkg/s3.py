"""Run the space-split sensitivity shell from the repo root."""
import sys

from space_split.cli import main

if __name__ == "__main__":
    sys.exit(main())
