"""Parameter sequences s_j, t_j, n_j and their products.

All products are exact Python integers; ``float`` conversions happen only
where a ratio or logarithm is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence


class DomainError(ValueError):
    """Exponents outside the admissible range."""


class GenerationError(ValueError):
    """No integer sequence satisfies the hard constraints at some stage."""

    def __init__(self, stage: int, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class Exponents:
    d: int
    alpha: float
    beta: float
    alpha0: float
    beta0: float


def derive_exponents(d: int, alpha: float, beta: float) -> Exponents:
    """Reduced exponents alpha0 = alpha - (d-1), beta0 = beta - (d-1).

    Requires d - 1 < beta <= alpha < d (for d = 1 this is 0 < beta <= alpha < 1).
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got d={d}")
    if not beta > d - 1:
        raise DomainError(f"need beta > d-1: beta={beta}, d-1={d - 1}")
    if not beta <= alpha:
        raise DomainError(f"need beta <= alpha: beta={beta}, alpha={alpha}")
    if not alpha < d:
        raise DomainError(f"need alpha < d: alpha={alpha}, d={d}")
    return Exponents(d, alpha, beta, alpha - (d - 1), beta - (d - 1))


def _products(xs: Sequence[int]) -> tuple[int, ...]:
    out = [1]
    for x in xs:
        out.append(out[-1] * int(x))
    return tuple(out)


@dataclass(frozen=True)
class ParamSequences:
    """Stage sequences, 1-indexed in the maths, 0-indexed in ``s``, ``t``, ``n``.

    ``S``, ``T``, ``N`` have length J+1 with ``S[0] == T[0] == N[0] == 1``.
    """

    exponents: Exponents
    s: tuple[int, ...]
    t: tuple[int, ...]
    n: tuple[int, ...]
    j0: int = 1
    C_ratio: float = 4.0
    S: tuple[int, ...] = field(init=False)
    T: tuple[int, ...] = field(init=False)
    N: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if not (len(self.s) == len(self.t) == len(self.n)):
            raise ValueError("s, t, n must have equal length")
        if any(int(x) < 1 for x in (*self.s, *self.t, *self.n)):
            raise ValueError("sequences must be positive integers")
        for name in ("s", "t", "n"):
            object.__setattr__(self, name, tuple(int(x) for x in getattr(self, name)))
        object.__setattr__(self, "S", _products(self.s))
        object.__setattr__(self, "T", _products(self.t))
        object.__setattr__(self, "N", _products(self.n))

    @property
    def J(self) -> int:
        return len(self.n)

    # 1-indexed accessors matching the stage notation
    def s_(self, j: int) -> int:
        return self.s[j - 1]

    def t_(self, j: int) -> int:
        return self.t[j - 1]

    def n_(self, j: int) -> int:
        return self.n[j - 1]

    def hard_violations(self) -> list[tuple[int, str]]:
        """Stages breaking s_j <= t_j < n_j/2 or the selection-pool bound."""
        bad = []
        for j in range(1, self.J + 1):
            s, t, n = self.s_(j), self.t_(j), self.n_(j)
            if not (s <= t and 2 * t < n):
                bad.append((j, f"s_j <= t_j < n_j/2 fails (s={s}, t={t}, n={n})"))
            elif n - 2 * s - 1 < t - s:
                bad.append((j, f"selection pool too small (s={s}, t={t}, n={n})"))
        return bad

    def to_dict(self) -> dict:
        e = self.exponents
        return {
            "d": e.d, "alpha": e.alpha, "beta": e.beta,
            "s": list(self.s), "t": list(self.t), "n": list(self.n),
            "j0": self.j0, "C_ratio": self.C_ratio,
        }


def _log_target(N_next: int, j: int) -> float:
    return math.log(400 * j * N_next)


def dimension_target(exp: Exponents, N_next: int, j: int) -> float:
    """N_{j+1}^{alpha0} ln(400 j N_{j+1}); callers pass j+1 for the stage index."""
    return float(N_next) ** exp.alpha0 * _log_target(N_next, j)


def default_schedule(J: int) -> tuple[int, ...]:
    """Slowly increasing n_j = 8, 12, 16, ... (a choice, not a requirement)."""
    return tuple(8 + 4 * k for k in range(J))


def _clamp(x: int, lo: int, hi: int) -> int:
    return max(lo, min(hi, x))


def generate_sequences(exp: Exponents, J: int, n_schedule: Sequence[int] | None = None,
                       C_ratio: float = 4.0, j0: int = 1) -> ParamSequences:
    """Greedy integer rounding towards the growth targets for T_j and S_j/T_j.

    t_j is rounded towards N_{j+1}^{alpha0} ln(400(j+1)N_{j+1}) / T_{j-1}
    (N_J stands in for N_{J+1} at the last stage) and clamped into
    [1, ceil(n_j/2) - 1]; s_j is then rounded towards T_j N_j^{-beta0/2} / S_{j-1}
    and clamped into [1, t_j].
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    n = tuple(int(x) for x in (n_schedule if n_schedule is not None else default_schedule(J)))
    if len(n) < J:
        raise ValueError(f"n_schedule has {len(n)} entries, need {J}")
    n = n[:J]
    N = _products(n)
    s_out, t_out = [], []
    S_prev = T_prev = 1
    for j in range(1, J + 1):
        nj = n[j - 1]
        t_hi = -(-nj // 2) - 1
        if t_hi < 1:
            raise GenerationError(j, f"n_j={nj} cannot host 1 <= t_j < n_j/2")
        N_next = N[j + 1] if j < J else N[J]
        t_target = dimension_target(exp, N_next, j + 1) / T_prev
        tj = _clamp(round(t_target), 1, t_hi)
        Tj = T_prev * tj
        s_target = Tj * float(N[j]) ** (-exp.beta0 / 2) / S_prev
        sj = _clamp(round(s_target), 1, tj)
        if nj - 2 * sj - 1 < tj - sj:
            raise GenerationError(j, "selection pool smaller than t_j - s_j")
        s_out.append(sj)
        t_out.append(tj)
        S_prev *= sj
        T_prev = Tj
    return ParamSequences(exp, tuple(s_out), tuple(t_out), n, j0=j0, C_ratio=C_ratio)


@dataclass
class ValidationReport:
    products_ok: bool
    ordering_ok: list[bool]          # s_j <= t_j < n_j/2, per stage
    feasibility_ok: list[bool]       # n_j - 2 s_j - 1 >= t_j - s_j
    n_nondecreasing: bool            # trend diagnostics, never gates
    n_over_j_nonincreasing: bool
    log_ratio_nonincreasing: bool
    ratios_26: list[float]           # T_j / target, per stage j >= j0
    ratios_27: list[float]           # (S_k/T_k) / N_k^{-beta0/2}, per stage k >= j0
    r26: float
    r27: float
    C_ratio: float

    @property
    def hard_ok(self) -> bool:
        return self.products_ok and all(self.ordering_ok) and all(self.feasibility_ok)

    @property
    def approx_26_ok(self) -> bool:
        return self.r26 <= self.C_ratio

    @property
    def approx_27_ok(self) -> bool:
        return self.r27 <= self.C_ratio

    def failing_stages(self) -> list[int]:
        return [j for j, (a, b) in enumerate(zip(self.ordering_ok, self.feasibility_ok), 1)
                if not (a and b)]


def _two_sided(x: float) -> float:
    return max(x, 1.0 / x)


def _nonincreasing(xs: Sequence[float]) -> bool:
    return all(b <= a * (1 + 1e-12) for a, b in zip(xs, xs[1:]))


def validate_sequences(seq: ParamSequences) -> ValidationReport:
    exp = seq.exponents
    J, j0 = seq.J, max(1, seq.j0)
    products_ok = all(
        seq.S[j] == seq.S[j - 1] * seq.s_(j)
        and seq.T[j] == seq.T[j - 1] * seq.t_(j)
        and seq.N[j] == seq.N[j - 1] * seq.n_(j)
        for j in range(1, J + 1)
    ) and seq.S[0] == seq.T[0] == seq.N[0] == 1
    ordering = [seq.s_(j) <= seq.t_(j) and 2 * seq.t_(j) < seq.n_(j) for j in range(1, J + 1)]
    feas = [seq.n_(j) - 2 * seq.s_(j) - 1 >= seq.t_(j) - seq.s_(j) for j in range(1, J + 1)]

    js = range(j0, J + 1)
    n_sub = [seq.n_(j) for j in js]
    r26s = []
    for j in js:
        N_next = seq.N[j + 1] if j < J else seq.N[J]
        r26s.append(seq.T[j] / dimension_target(exp, N_next, j + 1))
    r27s = [(seq.S[k] / seq.T[k]) / float(seq.N[k]) ** (-exp.beta0 / 2) for k in js]
    d = exp.d
    log_ratio = [seq.n_(j) ** (d - 1) / math.log(400 * j * seq.N[j]) for j in js]
    return ValidationReport(
        products_ok=products_ok,
        ordering_ok=ordering,
        feasibility_ok=feas,
        n_nondecreasing=all(b >= a for a, b in zip(n_sub, n_sub[1:])),
        n_over_j_nonincreasing=_nonincreasing([n / j for n, j in zip(n_sub, js)]),
        log_ratio_nonincreasing=_nonincreasing(log_ratio),
        ratios_26=r26s,
        ratios_27=r27s,
        r26=max((_two_sided(x) for x in r26s), default=1.0),
        r27=max((_two_sided(x) for x in r27s), default=1.0),
        C_ratio=seq.C_ratio,
    )


def sequences_from_config(cfg: dict) -> ParamSequences:
    """Build sequences from a config mapping.

    Keys: d, alpha, beta, and either explicit s/t/n or J with optional
    n_schedule; C_ratio and j0 optional.
    """
    exp = derive_exponents(int(cfg["d"]), float(cfg["alpha"]), float(cfg["beta"]))
    C = float(cfg.get("C_ratio", 4.0))
    j0 = int(cfg.get("j0", 1))
    if all(k in cfg for k in ("s", "t", "n")):
        return ParamSequences(exp, tuple(cfg["s"]), tuple(cfg["t"]), tuple(cfg["n"]), j0=j0, C_ratio=C)
    J = int(cfg["J"])
    return generate_sequences(exp, J, cfg.get("n_schedule"), C_ratio=C, j0=j0)
