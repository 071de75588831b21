"""Sat fraction and solve time across degrees (model A by default).

Runs ``allendl bench`` with the desk-scale sweep as defaults; any extra
arguments are passed through and override them.

    python scripts/phase_transition.py
    python scripts/phase_transition.py --n 20 --model H --degrees 6-14 --csv runs.csv
"""

import sys

from allendl import cli

DEFAULTS = ["--model", "A", "--n", "30", "--s", "6.5", "--degrees", "2-20",
            "--count", "10", "--seed", "0", "--timeout-s", "60"]

if __name__ == "__main__":
    sys.exit(cli.main(["bench", *DEFAULTS, *sys.argv[1:]]))
