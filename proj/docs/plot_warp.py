"""Plot the fitted warping written by `stwarp validate`.

    python docs/plot_warp.py REPORT_DIR [--out warp.png] [--every 5]

Reads REPORT_DIR/warped_grid.csv (i, j, s1, s2, f1, f2) and
REPORT_DIR/temporal_warp.csv (t, ft). The left panel draws the image of the
regular spatial grid under the fitted spatial map; every `--every`-th grid
line is kept. The right panel draws the temporal map against the identity.
"""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_rows(path):
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def grid_lines(rows, every):
    by_i, by_j = {}, {}
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        by_i.setdefault(i, []).append((j, r["f1"], r["f2"]))
        by_j.setdefault(j, []).append((i, r["f1"], r["f2"]))
    lines = []
    for groups in (by_i, by_j):
        for key in sorted(groups)[::every]:
            pts = sorted(groups[key])
            lines.append(([p[1] for p in pts], [p[2] for p in pts]))
    return lines


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("report", type=Path)
    ap.add_argument("--out", type=Path, default=Path("warp.png"))
    ap.add_argument("--every", type=int, default=5)
    args = ap.parse_args()

    grid = read_rows(args.report / "warped_grid.csv")
    temporal = read_rows(args.report / "temporal_warp.csv")

    fig, (ax_s, ax_t) = plt.subplots(1, 2, figsize=(10, 4.8))
    for xs, ys in grid_lines(grid, args.every):
        ax_s.plot(xs, ys, color="0.2", lw=0.7)
    ax_s.set_aspect("equal")
    ax_s.set_xlabel("f1(s)")
    ax_s.set_ylabel("f2(s)")
    ax_s.set_title("Warped spatial grid")

    ts = [r["t"] for r in temporal]
    ax_t.plot(ts, [r["ft"] for r in temporal], color="C0", label="fitted")
    ax_t.plot(ts, ts, color="0.6", ls="--", label="identity")
    ax_t.set_xlabel("t")
    ax_t.set_ylabel("f(t)")
    ax_t.set_title("Temporal warp")
    ax_t.legend()

    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
