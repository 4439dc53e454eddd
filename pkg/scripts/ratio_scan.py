"""Formula-mode divergence proxy over a range of p, one CSV per p plus a gnuplot script."""

import argparse
from fractions import Fraction
from pathlib import Path

import numpy as np

from knapp_cantor.cli import auto_r
from knapp_cantor.norms import ratio_trend, write_gnuplot
from knapp_cantor.params import derive_exponents, generate_sequences


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--beta", type=float, default=1.5)
    ap.add_argument("--n", type=int, nargs="+", default=[64, 72, 80, 88, 96])
    ap.add_argument("--p-min", type=float, default=2.0)
    ap.add_argument("--p-max", type=float, default=6.0)
    ap.add_argument("--steps", type=int, default=9)
    ap.add_argument("--out", default="results/ratio_scan")
    args = ap.parse_args()

    e = derive_exponents(args.d, args.alpha, args.beta)
    seq = generate_sequences(e, len(args.n), n_schedule=args.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = []
    for p in np.linspace(args.p_min, args.p_max, args.steps):
        r = auto_r(e.beta, e.d, p)
        rs = ratio_trend(seq, range(1, seq.J), float(p), r)
        name = f"ratio_p{p:.3f}.csv"
        rs.to_csv(out / name, {"s": seq.s, "t": seq.t, "n": seq.n, "r": r})
        names.append(name)
        print(f"p={p:6.3f} r={r} exponent={rs.fitted_exponent:+.4f} {rs.monotone:10s} {rs.classification}")
    print(f"p0 = {Fraction(rs.p0).limit_denominator(10 ** 6)} = {float(rs.p0):.4f}")
    write_gnuplot(out / "ratio.gp", names, "formula-mode proxy")


if __name__ == "__main__":
    main()
