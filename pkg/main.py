"""
FairForge entry point.

    python main.py attack runs/clean --out runs/poisoned
"""

import sys

from fairforge.cli import main


if __name__ == "__main__":
    sys.exit(main())
