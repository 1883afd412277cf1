"""Write the data behind the four figure types to an output directory.

    python scripts/reproduce_figures.py --out figdata

heatmap_L.csv / heatmap_R.csv  sign-region maps (L or R varied, V in [-10, 10])
iv_L*.csv                      J1, J2, I for orders 1, 2 and the solver
products_L*.csv                second-order sign products along V
No plotting is done here; the CSVs are meant for an external plotting tool.
"""

import argparse
import logging
from pathlib import Path

from ionflux import cli

log = logging.getLogger("reproduce_figures")

IV_CASES = (0.5, 1.05)        # distant and close bath concentrations
PRODUCT_CASES = (0.97, 1.07)  # near-equal baths used for the second-order products


def run(args: list[str]) -> None:
    code = cli.main(args)
    if code != 0:
        raise SystemExit(f"ionflux {' '.join(args)} exited with {code}")


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out", default="figdata")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--q0", type=float, default=0.01)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = str(args.steps)

    for vary, fixed in (("L", "--R"), ("R", "--L")):
        path = out / f"heatmap_{vary}.csv"
        run(["heatmap", "--vary", vary, fixed, "1", "--range", "0.05:2", "--steps", n,
             "--vrange", "-10:10", "--vsteps", n, "--q0", str(args.q0), "--out", str(path)])
        log.info("wrote %s", path)

    for L in IV_CASES:
        for mode in ("order1", "order2", "solver"):
            path = out / f"iv_L{L}_R1_{mode}.csv"
            run(["iv", "--L", str(L), "--R", "1", "--mode", mode, "--q0", str(args.q0),
                 "--vrange", "-10:10", "--vsteps", "201", "--out", str(path)])
            log.info("wrote %s", path)

    for L in PRODUCT_CASES:
        path = out / f"products_L{L}_R1.csv"
        run(["signs", "--L", str(L), "--R", "1", "--order", "2", "--q0", str(args.q0),
             "--vrange", "-10:10", "--vsteps", "401", "--out", str(path)])
        log.info("wrote %s", path)


if __name__ == "__main__":
    main()
