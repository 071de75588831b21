"""Regenerate src/allendl/data/hard_pool.txt.

Each relation is read as a CNF formula over the order of the four cross
endpoint pairs; a literal restricts one pair's comparison to a non-trivial
subset of {<, =, >}.  A relation lands in the pool when its shortest CNF
needs a clause with three literals.  No relation needs four.

    python scripts/derive_hard_pool.py [--check]
"""

import argparse
import sys
from collections import Counter
from pathlib import Path

from allendl.instances import clause_widths, format_pool, parse_pool

OUT = Path(__file__).resolve().parents[1] / "src" / "allendl" / "data" / "hard_pool.txt"

HEADER = """\
Default relation pool for model H.
Derived by scripts/derive_hard_pool.py: every relation over the 13 base
relations is written in clause form over literals on the comparison of one
cross endpoint pair (sp(X)/sp(Y), sp(X)/ep(Y), ep(X)/sp(Y), ep(X)/ep(Y)),
each literal allowing a non-trivial subset of {<, =, >}.  A relation is kept
when its minimal clause form contains a 3-literal clause.
Approximate: the original benchmark's pool is not reproduced bit-for-bit.
One relation per line, base relations in canonical order."""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true", help="compare against the shipped file")
    args = ap.parse_args()
    widths = clause_widths()
    print("relations by minimal clause width:", dict(sorted(Counter(widths[1:]).items())))
    pool = [r for r, w in enumerate(widths) if w == 3]
    text = format_pool(pool, HEADER + f"\n{len(pool)} relations.")
    if args.check:
        ok = parse_pool(OUT.read_text()) == tuple(pool)
        print("shipped pool matches derivation:", ok)
        sys.exit(0 if ok else 1)
    OUT.write_text(text)
    print(f"wrote {len(pool)} relations to {OUT}")


if __name__ == "__main__":
    main()
