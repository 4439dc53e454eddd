"""Ball-mass ratios nu(B(x, r)) / r^alpha on sampled balls, per stage."""

import argparse
from pathlib import Path

from knapp_cantor.cantor import build_all_stages
from knapp_cantor.geometry import verify_frostman
from knapp_cantor.params import derive_exponents, generate_sequences


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--beta", type=float, default=1.5)
    ap.add_argument("--J", type=int, default=6)
    ap.add_argument("--stages", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="directory for per-stage CSVs")
    args = ap.parse_args()

    e = derive_exponents(args.d, args.alpha, args.beta)
    seq = generate_sequences(e, args.J)
    built = build_all_stages(seq, max(args.stages), args.seed)
    prev = None
    for l in args.stages:
        rep = verify_frostman(built[l][2], args.d, args.alpha, args.samples, rng_seed=args.seed + l)
        factor = "" if prev is None else f"  factor vs previous {max(prev, rep.sup_ratio) / min(prev, rep.sup_ratio):.3f}"
        print(f"stage {l}: N={seq.N[l]:>8d} sup ratio {rep.sup_ratio:.5f}{factor}")
        prev = rep.sup_ratio
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            rep.to_csv(Path(args.out) / f"frostman_stage_{l}.csv", {"seed": args.seed})


if __name__ == "__main__":
    main()
