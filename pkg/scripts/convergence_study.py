"""Error of the truncated expansion against the solver as Q0 shrinks.

    python scripts/convergence_study.py --L 0.5 --R 1 --V 1

Prints the max-norm error over junction potentials, concentrations, y and
fluxes for orders 0-2, and the fitted log-log slopes (expected 1, 2, 3).
"""

import argparse

import numpy as np

from ionflux import expansion as ex
from ionflux.checks import FLUX_FIELDS
from ionflux.model import BathState, ChannelGeometry, IonPair, moments
from ionflux.solver import continuation_solve


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--z1", type=float, default=1.0)
    p.add_argument("--z2", type=float, default=-1.0)
    p.add_argument("--L", type=float, default=0.5)
    p.add_argument("--R", type=float, default=1.0)
    p.add_argument("--V", type=float, default=1.0)
    p.add_argument("--a", type=float, default=1 / 3)
    p.add_argument("--b", type=float, default=2 / 3)
    p.add_argument("--qmax", type=float, default=0.1)
    p.add_argument("--levels", type=int, default=7)
    args = p.parse_args()

    ions = IonPair(z1=args.z1, z2=args.z2)
    bath = BathState(V=args.V, L=args.L, R=args.R)
    mom = moments(ChannelGeometry(a=args.a, b=args.b))
    sol = ex.expand(ions, bath, mom)
    qs = args.qmax / 2.0 ** np.arange(args.levels)
    errs = np.zeros((3, len(qs)))
    print(f"{'Q0':>12} {'order0':>12} {'order1':>12} {'order2':>12}")
    for j, q in enumerate(qs):
        st = continuation_solve(q, ions, bath, mom, tol=1e-14).state
        exact = np.array([getattr(st, f) for f in FLUX_FIELDS])
        for k in range(3):
            pred = ex.evaluate_expansion(sol, q, order=k)
            errs[k, j] = np.max(np.abs(exact - np.array([getattr(pred, f) for f in FLUX_FIELDS])))
        print(f"{q:12.4e} " + " ".join(f"{e:12.4e}" for e in errs[:, j]))
    for k in range(3):
        # the order-2 error hits rounding for tiny Q0; fit only above that floor
        ok = errs[k] > 1e-13
        slope = np.polyfit(np.log(qs[ok]), np.log(errs[k, ok]), 1)[0]
        print(f"order {k}: slope {slope:.3f}")


if __name__ == "__main__":
    main()
