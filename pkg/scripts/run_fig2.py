"""Run the fig2 preset with the default configuration (extra CLI flags are passed through)."""

import sys

from rbaccess.cli import main

if __name__ == "__main__":
    sys.exit(main(["run", "fig2", *sys.argv[1:]]))
