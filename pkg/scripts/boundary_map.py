"""Promotion boundary r*(S) on a fine grid, plus a promoted/not-promoted map over (S, r)."""

import argparse
from pathlib import Path

import numpy as np

from votedyn import io
from votedyn.fitting import classify_promotion, promotion_boundary
from votedyn.model import SiteParams, StoryParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--s-max", type=float, default=320.0)
    ap.add_argument("--steps", type=int, default=33)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    site = SiteParams()
    s_grid = np.linspace(0, args.s_max, args.steps)
    rows = promotion_boundary(site, list(s_grid))
    io.write_table(out / "boundary.csv", io.BOUNDARY_COLUMNS, rows)
    cells = [(S, r, classify_promotion(StoryParams(r, int(S)), site))
             for S in s_grid[::4] for r in np.geomspace(0.02, 0.6, 12)]
    io.write_table(out / "boundary_map.csv", ("s", "r", "promoted"), cells)
    for S, r in rows[::4]:
        print(f"S={S:6.0f}  r*={r:.4f}")


if __name__ == "__main__":
    main()
