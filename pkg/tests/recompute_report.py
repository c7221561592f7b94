"""Stand-alone recomputation of RMSE / mean / max between two ``t,x,y,z`` CSV files.

Uses only the standard library so it shares no code with the package.
Usage: python3 recompute_report.py DESKEWED.csv TRUTH.csv
"""

import csv
import math
import sys


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [[float(v) for v in row[1:]] for row in rows[1:] if row]


def main(a, b):
    p, q = load(a), load(b)
    if len(p) != len(q):
        raise SystemExit("cardinality mismatch")
    errs = [math.sqrt(sum((x - y) ** 2 for x, y in zip(u, v))) for u, v in zip(p, q)]
    n = len(errs)
    print(f"rmse {math.sqrt(math.fsum(e * e for e in errs) / n)!r}")
    print(f"mean {math.fsum(errs) / n!r}")
    print(f"max {max(errs)!r}")
    print(f"count {n}")


if __name__ == "__main__":
    main(*sys.argv[1:3])
