import sys

from core_simulation.cli import main


if __name__ == "__main__":
    sys.exit(main())
