"""Type I/N/U weights, premiums and variances over the default taste grid."""

import argparse

from esgdmv.dmv import DEFAULT_B_GRID, MarketParams, premium_gaps, solve_grid, variance_gaps


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mu-f", type=float, default=0.01)
    ap.add_argument("--mu-M", type=float, default=0.07)
    ap.add_argument("--sigma2-M", type=float, default=0.04)
    ap.add_argument("--mu-g", type=float, default=0.02)
    ap.add_argument("--sigma2-g", type=float, default=0.01)
    ap.add_argument("--gamma", type=float, default=2.0)
    ap.add_argument("--theta", type=float, default=1.0)
    a = ap.parse_args()
    m = MarketParams(a.mu_f, a.mu_M, a.sigma2_M, a.mu_g, a.sigma2_g)
    print(f"{'type':>4} {'b':>5} {'w':>9} {'premium':>9} {'variance':>10} {'sharpe':>8}")
    for r in solve_grid(m, a.gamma, a.theta, DEFAULT_B_GRID):
        print(f"{r.kind.value:>4} {r.b:5.2f} {r.w:9.4f} {r.premium:9.4f} {r.variance:10.5f} {r.sharpe:8.4f}")
    print()
    print(f"{'b':>5} {'dP(N-I)':>9} {'dP(U-N)':>9} {'dV(N-I)':>9} {'dV(U-N)':>9} {'E_g':>7}")
    for b in DEFAULT_B_GRID:
        pn, pu, _ = premium_gaps(m, a.gamma, b, a.theta)
        vn, vu, _, eg = variance_gaps(m, a.gamma, b, a.theta)
        print(f"{b:5.2f} {pn:9.4f} {pu:9.4f} {vn:9.5f} {vu:9.5f} {eg:7.4f}")


if __name__ == "__main__":
    main()
