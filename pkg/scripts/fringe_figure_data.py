"""Write the three-curve fringe trace (levels H, H-1, H-2) for plotting.

    python scripts/fringe_figure_data.py --n 1e9 --ratio 1.001 --out fringe.csv
"""
import argparse
import sys
import time

from yulebst.analysis import fringe_trace
from yulebst.cli import count
from yulebst.profile import checkpoint_schedule
from yulebst.rng import RandomStream


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=count, default=10**8)
    ap.add_argument("--ratio", type=float, default=1.001)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="fringe.csv")
    args = ap.parse_args()

    t0 = time.perf_counter()
    tr = fringe_trace(RandomStream(args.seed), args.n, 3, checkpoint_schedule(args.n, args.ratio))
    with open(args.out, "w", newline="\n") as fh:
        tr.write_csv(fh)
    st = tr.stats
    print(f"{len(tr.rows)} rows, {time.perf_counter() - t0:.1f}s; min F {st.min_F}, max F {st.max_F}, "
          f"lemma failures {st.lemma_fail}", file=sys.stderr)


if __name__ == "__main__":
    main()
