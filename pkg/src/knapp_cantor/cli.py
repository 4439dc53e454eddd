"""Experiment driver: build -> verify -> energy -> ratio -> claim.

Exit codes: 0 success, 1 invariant failure, 2 configuration error,
3 resource refusal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .cantor import (EndpointSet, StageMeasure, build_all_stages, build_progression,
                     check_isolation, read_endpoints, write_endpoints)
from .energy import BoundViolation, InstanceTooLarge, check_chain, sumset_profile, write_summary
from .fourier import decay_profile, gatesoupe_constant
from .geometry import (FrostmanReport, IsolationError, SectorRegion, bump_nu_integral,
                       make_test_function, nu_region_mass, verify_frostman)
from .norms import (KnappBox, RatioSeries, WindowG, choose_eta, claim_I_nonneg, g1, g1_hat,
                    h1_hat, ratio_trend, write_gnuplot)
from .params import DomainError, GenerationError, ParamSequences, sequences_from_config, validate_sequences

log = logging.getLogger("knapp_cantor")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    d: int
    alpha: float
    beta: float
    J: int | None = None
    n_schedule: list[int] | None = None
    s: list[int] | None = None
    t: list[int] | None = None
    n: list[int] | None = None
    C_ratio: float = 4.0
    j0: int = 1
    global_seed: int = 0
    decay_K: float = 10.0
    decay_per_decade: int = 100
    frostman_samples: int = 10_000
    r: int = 2
    p_list: list[str] = field(default_factory=lambda: ["2", "10/3", "6"])
    out: str = "results"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("d", "alpha", "beta"):
            if key not in raw:
                raise ConfigError(f"config lacks required key {key!r}")
        if raw.get("J") is None and not all(raw.get(k) for k in ("s", "t", "n")):
            raise ConfigError("config needs J or explicit s, t, n")
        cfg = cls(**raw)
        cfg.p_list = [str(p) for p in cfg.p_list]
        return cfg

    def seq_dict(self) -> dict:
        out = {"d": self.d, "alpha": self.alpha, "beta": self.beta, "C_ratio": self.C_ratio, "j0": self.j0}
        if self.s and self.t and self.n:
            out.update(s=self.s, t=self.t, n=self.n)
        else:
            out.update(J=self.J, n_schedule=self.n_schedule)
        return out

    def canonical(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunManifest:
    config_hash: str
    config: dict
    seeds: dict
    versions: dict
    checks: dict

    def write(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _versions() -> dict:
    return {"knapp_cantor": __version__, "numpy": np.__version__}


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    return ExperimentConfig.from_dict(raw)


def make_sequences(cfg: ExperimentConfig) -> ParamSequences:
    try:
        seq = sequences_from_config(cfg.seq_dict())
    except (DomainError, GenerationError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    bad = seq.hard_violations()
    if bad:
        j, msg = bad[0]
        raise ConfigError(f"stage {j}: {msg}")
    return seq


def _parse_p(p) -> float:
    return float(Fraction(str(p)))


def _header(cfg: ExperimentConfig, **extra) -> dict:
    return {"config_hash": cfg.hash(), "config": json.dumps(cfg.canonical(), sort_keys=True), **extra}


def _stage_range(seq: ParamSequences, stage: int | None, lo: int = 1) -> list[int]:
    top = seq.J if stage is None else stage
    if top > seq.J:
        raise ConfigError(f"stage {top} beyond J={seq.J}")
    return list(range(lo, top + 1))


def load_stage(out: Path, seq: ParamSequences, j: int, seq_hash: str):
    a_path, p_path = out / f"stage_{j}_A.txt", out / f"stage_{j}_P.txt"
    if not a_path.exists() or not p_path.exists():
        raise ConfigError(f"missing build artifacts for stage {j} in {out}; run 'build' first")
    for path in (a_path, p_path):
        if _artifact_hash(path) != seq_hash:
            raise ConfigError(f"{path} was built from a different config")
    A, P = read_endpoints(a_path), read_endpoints(p_path)
    if A.N != seq.N[j] or P.N != seq.N[j]:
        raise ConfigError(f"stage {j} artifacts have N != N_{j} = {seq.N[j]}")
    return P, A, StageMeasure(A)


def _artifact_hash(path: Path) -> str | None:
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config_hash="):
                return line.split("=", 1)[1].strip()
    return None


# ---------------------------------------------------------------- commands

def cmd_build(cfg: ExperimentConfig, stage: int | None = None) -> dict:
    seq = make_sequences(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    stages = _stage_range(seq, stage)
    built = build_all_stages(seq, stages[-1], cfg.global_seed)
    h = cfg.hash()
    checks = {}
    for j in stages:
        P, A, _ = built[j]
        write_endpoints(out / f"stage_{j}_P.txt", P, h)
        write_endpoints(out / f"stage_{j}_A.txt", A, h)
        checks[f"stage_{j}"] = {
            "P_count": len(P), "A_count": len(A),
            "P_count_ok": len(P) == seq.S[j], "A_count_ok": len(A) == seq.T[j],
            "P_subset_A": P.key_set() <= A.key_set(),
            "isolation": check_isolation(A, P, seq),
        }
    rep = validate_sequences(seq)
    checks["sequences"] = {"hard_ok": rep.hard_ok, "r26": rep.r26, "r27": rep.r27,
                           "approx_26_ok": rep.approx_26_ok, "approx_27_ok": rep.approx_27_ok,
                           "n_nondecreasing": rep.n_nondecreasing,
                           "n_over_j_nonincreasing": rep.n_over_j_nonincreasing,
                           "log_ratio_nonincreasing": rep.log_ratio_nonincreasing}
    manifest = RunManifest(h, cfg.canonical(), {str(j): cfg.global_seed for j in stages},
                           _versions(), checks)
    manifest.write(out / "manifest.json")
    failed = [k for k, v in checks.items() if k.startswith("stage_") and not all(
        v[x] for x in ("P_count_ok", "A_count_ok", "P_subset_A", "isolation"))]
    if failed:
        raise InvariantFailure(f"construction invariants failed at {failed}")
    return checks


def _verify_decay(cfg, seq, out, stages) -> dict:
    beta0 = seq.exponents.beta0
    rows = {}
    for j in [0, *stages]:
        if j == 0:
            mu = build_all_stages(seq, 0, cfg.global_seed)[0][2]
        else:
            mu = load_stage(out, seq, j, cfg.hash())[2]
        rep = decay_profile(mu, beta0 / 2, K=cfg.decay_K, per_decade=cfg.decay_per_decade)
        rep.to_csv(out / f"decay_stage_{j}.csv", _header(cfg, stage=j))
        row = {"C_emp": rep.C_emp, "argsup": rep.argsup, "points": len(rep.xi)}
        if j == 0:
            grid = rep.xi
            env = ((1 + grid) ** (beta0 / 2) / (math.pi * grid)).max()
            row["sinc_envelope_sup"] = float(env)
            row["within_envelope"] = bool(rep.C_emp <= env * (1 + 1e-12))
        if seq.exponents.d in (2, 3) and j > 0:
            C_fit, _, _, _ = gatesoupe_constant(mu, seq.exponents.d, beta0, C_mu=rep.C_emp,
                                               K=cfg.decay_K, per_decade=cfg.decay_per_decade)
            row["gatesoupe_C"] = C_fit
        rows[str(j)] = row
    Cs = [rows[str(j)]["C_emp"] for j in stages]
    spread = max(Cs) / min(Cs) if Cs else 1.0
    # reported, not gated: a poor seed is handled by rebuilding with another --seed
    return {"stages": rows, "spread": spread, "stable_within_3": spread <= 3}


def _verify_frostman(cfg, seq, out, stages) -> dict:
    d, alpha = seq.exponents.d, seq.exponents.alpha
    rows = {}
    for j in stages:
        mu = load_stage(out, seq, j, cfg.hash())[2]
        rep = verify_frostman(mu, d, alpha, cfg.frostman_samples, cfg.global_seed + j)
        rep.to_csv(out / f"frostman_stage_{j}.csv", _header(cfg, stage=j))
        rows[str(j)] = {"samples": len(rep.r), "sup_ratio": rep.sup_ratio}
    sups = [rows[str(j)]["sup_ratio"] for j in stages if rows[str(j)]["samples"]]
    factors = [max(a, b) / min(a, b) for a, b in zip(sups, sups[1:]) if min(a, b) > 0]
    return {"stages": rows, "consecutive_factors": factors}


def _verify_geometry(cfg, seq, out, stages) -> dict:
    d = seq.exponents.d
    if d < 2:
        raise ConfigError("geometry checks need d >= 2")
    rows = {}
    for j in stages:
        P, A, mu = load_stage(out, seq, j, cfg.hash())
        if not check_isolation(A, P, seq):
            raise InvariantFailure(f"stage {j}: P-annuli are not isolated")
        f = make_test_function(P, A, seq, d)
        sandwich_ok = True
        scan = FrostmanReport(alpha=float(d - 1))
        radius, width, mass = [], [], []
        for b in f.bumps:
            lo = nu_region_mass(mu, d, SectorRegion(b.a, b.thickness, b.delta, d))
            hi = nu_region_mass(mu, d, SectorRegion(b.a, b.thickness, 2 * b.delta, d))
            v = bump_nu_integral(b, mu, A, P)
            sandwich_ok &= lo <= v <= hi
        dl = seq.N[j] ** -0.5
        for a in A.values:
            for w in (dl, 2 * dl):
                radius.append(a)
                width.append(w)
                mass.append(nu_region_mass(mu, d, SectorRegion(float(a), 1 / mu.N, w, d)) * mu.T)
        scan.radius, scan.r, scan.mass = np.array(radius), np.array(width), np.array(mass)
        scan.to_csv(out / f"caps_stage_{j}.csv", _header(cfg, stage=j, note="mass column is T_l * nu(C)"))
        spread = float(scan.ratio.max() / scan.ratio.min())
        rows[str(j)] = {"sandwich_ok": bool(sandwich_ok), "cap_ratio_spread": spread}
        if not sandwich_ok:
            raise InvariantFailure(f"stage {j}: bump integral outside its sector sandwich")
    return {"stages": rows}


def _verify_window(cfg, seq, out, stages) -> dict:
    d = seq.exponents.d
    res = {}
    for j in stages:
        box = KnappBox(choose_eta(cfg.r, d), seq.N[j], d)
        g = WindowG(box)
        H = box.half_widths()
        axes = [np.linspace(-h * 1.1, h * 1.1, 3 ** (d + 1) * 2 + 1) for h in H]
        pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = g(pts)
        inside8 = box.contains(pts, 1 / 8)
        outside = ~box.contains(pts, 1.0)
        ok = {
            "nonnegative": bool(vals.min() >= -1e-15 * g.peak()),
            "upper_bound": bool(vals.max() <= box.volume(0.5) * (1 + 1e-9)),
            "plateau_lower_bound": bool(np.all(vals[inside8] >= box.volume(1 / 8) * (1 - 1e-9))),
            "support": bool(np.all(vals[outside] == 0)),
        }
        x = np.linspace(0, 12, 97)
        ghat, hsq = g1_hat(x), h1_hat(x) ** 2
        ok["inverse_transform_nonnegative"] = bool(np.all(ghat >= -1e-9) and np.allclose(ghat, hsq, atol=1e-8))
        res[str(j)] = ok
        if not all(ok.values()):
            raise InvariantFailure(f"stage {j}: window property failed {ok}")
    return {"stages": res}


def cmd_verify(cfg: ExperimentConfig, which: str, stage: int | None = None) -> dict:
    seq = make_sequences(cfg)
    out = Path(cfg.out)
    stages = _stage_range(seq, stage)
    fn = {"decay": _verify_decay, "frostman": _verify_frostman,
          "geometry": _verify_geometry, "window": _verify_window}.get(which)
    if fn is None:
        raise ConfigError(f"unknown check {which!r}")
    result = fn(cfg, seq, out, stages)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"verify_{which}.json").write_text(json.dumps({**_header(cfg), **result}, indent=2) + "\n")
    return result


def cmd_energy(cfg: ExperimentConfig, r: int | None = None, stage: int | None = None) -> list[dict]:
    seq = make_sequences(cfg)
    out = Path(cfg.out)
    r = cfg.r if r is None else r
    summaries = []
    for l in _stage_range(seq, stage, lo=0):
        P = load_stage(out, seq, l, cfg.hash())[0] if l > 0 else build_progression(seq, 0)
        prof = sumset_profile(P, r)
        prof.to_csv(out / f"energy_stage_{l}_r{r}.csv", _header(cfg, stage=l, r=r))
        summaries.append(check_chain(prof, seq, l))
    write_summary(out / f"energy_summary_r{r}.json", summaries, _header(cfg))
    return summaries


def auto_r(beta: float, d: int, p: float) -> int:
    r = max(1, math.floor(d / beta) + 1, math.ceil(p / 2))
    return r


def cmd_ratio(cfg: ExperimentConfig, p_list=None, r: int | None = None, mode: str = "formula",
              stage: int | None = None) -> list[RatioSeries]:
    seq = make_sequences(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    e = seq.exponents
    p_list = cfg.p_list if p_list is None else p_list
    top = (seq.J - 1 if mode == "formula" else min(3, seq.J)) if stage is None else stage
    if mode == "formula" and top > seq.J - 1:
        raise ConfigError(f"formula mode needs n_(l+1); highest stage is {seq.J - 1}")
    stages = list(range(1, top + 1))
    series, paths = [], []
    summary = []
    for p_raw in p_list:
        p = _parse_p(p_raw)
        rr = auto_r(e.beta, e.d, p) if r is None else r
        if p > 2 * rr:
            raise ConfigError(f"p={p_raw} exceeds 2r={2 * rr}")
        if mode == "measured":
            if e.d not in (2, 3) or top > 3:
                raise InstanceTooLarge("measured mode is limited to d in {2, 3} and l <= 3")
            data = {}
            for l in stages:
                P, A, mu = load_stage(out, seq, l, cfg.hash())
                data[l] = (make_test_function(P, A, seq, e.d), mu)
            rs = ratio_trend(seq, stages, p, rr, e.d, mode, measured_data=data)
        else:
            rs = ratio_trend(seq, stages, p, rr, e.d, mode)
        name = f"ratio_{mode}_p{str(p_raw).replace('/', '_')}.csv"
        rs.to_csv(out / name, _header(cfg, r=rr))
        paths.append(name)
        series.append(rs)
        summary.append({"p": p_raw, "r": rr, "classification": rs.classification,
                        "monotone": rs.monotone, "fitted_exponent": rs.fitted_exponent,
                        "analytic_exponent": rs.analytic_exponent, "p0": str(rs.p0)})
    write_gnuplot(out / f"ratio_{mode}.gp", paths)
    (out / f"ratio_{mode}_summary.json").write_text(json.dumps({**_header(cfg), "series": summary}, indent=2) + "\n")
    return series


def _parse_tuples(spec: str, S: int, r: int, seed: int) -> list[list[int]]:
    tuples = []
    rng = np.random.default_rng(seed)
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if part == "diagonal":
            tuples.append([0] * (2 * r))
        elif part.startswith("random"):
            k = int(part.split(":", 1)[1]) if ":" in part else 1
            tuples.extend(rng.integers(0, S, 2 * r).tolist() for _ in range(k))
        else:
            idx = [int(x) for x in part.split(",")]
            if len(idx) != 2 * r or not all(0 <= i < S for i in idx):
                raise ConfigError(f"bad tuple {part!r}")
            tuples.append(idx)
    return tuples


def cmd_claim(cfg: ExperimentConfig, tuples: str = "diagonal", stage: int | None = None) -> list[dict]:
    seq = make_sequences(cfg)
    out = Path(cfg.out)
    e = seq.exponents
    l = 1 if stage is None else stage
    if e.d != 2 or cfg.r != 2 or l > 2:
        raise InstanceTooLarge("claim check is limited to d = 2, r = 2, l <= 2")
    P, A, mu = load_stage(out, seq, l, cfg.hash())
    f = make_test_function(P, A, seq, e.d)
    window = WindowG(KnappBox(choose_eta(cfg.r, e.d), mu.N, e.d))
    results = []
    for idx in _parse_tuples(tuples, len(f.bumps), cfg.r, cfg.global_seed):
        res = claim_I_nonneg([f.bumps[i] for i in idx], window, mu, e.d, cfg.r, beta=e.beta)
        results.append({"tuple": idx, **res.as_dict()})
    (out / "claim.json").write_text(json.dumps({**_header(cfg, stage=l), "results": results}, indent=2) + "\n")
    if not all(r["ok"] for r in results):
        raise InvariantFailure("claim check produced a negative or complex value")
    return results


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="knapp-cantor", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config file")
    common.add_argument("--seed", type=int, help="override global_seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--stage", type=int, help="highest stage to process")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("build", parents=[common])
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("which", choices=["frostman", "decay", "geometry", "window"])
    en = sub.add_parser("energy", parents=[common])
    en.add_argument("--r", type=int)
    ra = sub.add_parser("ratio", parents=[common])
    ra.add_argument("--r", type=int)
    ra.add_argument("--p", action="append", help="exponent, may repeat; fractions like 10/3 allowed")
    ra.add_argument("--mode", choices=["formula", "measured"], default="formula")
    cl = sub.add_parser("claim", parents=[common])
    cl.add_argument("--tuples", default="diagonal", help="'diagonal', 'random:K' or index lists, ';'-separated")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"global_seed": args.seed, "out": args.out})
        if args.command == "build":
            cmd_build(cfg, args.stage)
        elif args.command == "verify":
            cmd_verify(cfg, args.which, args.stage)
        elif args.command == "energy":
            cmd_energy(cfg, args.r, args.stage)
        elif args.command == "ratio":
            cmd_ratio(cfg, args.p, args.r, args.mode, args.stage)
        elif args.command == "claim":
            cmd_claim(cfg, args.tuples, args.stage)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except InstanceTooLarge as exc:
        log.error("refused: %s", exc)
        return EXIT_RESOURCE
    except (InvariantFailure, BoundViolation, IsolationError) as exc:
        log.error("invariant failure: %s", exc)
        return EXIT_INVARIANT
    log.info("%s finished, output in %s", args.command, cfg.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
