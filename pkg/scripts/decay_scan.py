"""Empirical Fourier decay constants per stage, with the reseeding harness and
the radialized profile constant for d = 2."""

import argparse

from knapp_cantor.cantor import build_all_stages
from knapp_cantor.fourier import decay_retry, gatesoupe_constant
from knapp_cantor.params import derive_exponents, generate_sequences


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--J", type=int, default=6)
    ap.add_argument("--stages", type=int, nargs="+", default=[2, 3, 4, 5])
    ap.add_argument("--budget", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--per-decade", type=int, default=100)
    ap.add_argument("--radial", action="store_true", help="also fit the radialized constant (slow at high stages)")
    args = ap.parse_args()

    e = derive_exponents(2, 1.5, 1.5)
    seq = generate_sequences(e, args.J)
    res = decay_retry(seq, args.stages, e.beta0 / 2, budget=args.budget, base_seed=args.seed,
                      per_decade=args.per_decade)
    print(f"seed={res.seed} attempts={res.attempts} spread={res.spread:.4f}")
    for j, C in res.C_by_stage.items():
        print(f"  stage {j}: N={seq.N[j]:>8d}  C_emp={C:.5f}")
    if args.radial and res.ok:
        built = build_all_stages(seq, max(args.stages), res.seed)
        for j in args.stages:
            C, raw, _, _ = gatesoupe_constant(built[j][2], 2, e.beta0, C_mu=res.C_by_stage[j], per_decade=40)
            print(f"  stage {j}: radial constant {C:.4f} (raw sup {raw:.4f})")


if __name__ == "__main__":
    main()
