"""Additive energy of P_l: representation counts G(b), M_{l,r} and the
Cauchy-Schwarz lower-bound chain.

Sums are compared through scaled integer keys, so carries between digit
levels are handled by plain integer addition.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cantor import EndpointSet
from .params import ParamSequences

_FFT_EXACT_LIMIT = 2 ** 52
_BRUTE_LIMIT = 10 ** 8


class BoundViolation(AssertionError):
    """A counting bound that must hold by construction has failed."""


class InstanceTooLarge(ValueError):
    pass


@dataclass
class SumsetProfile:
    r: int
    N: int
    sums: np.ndarray       # key sums sum_i N (a_i - 1), increasing
    counts: np.ndarray     # G at each sum, positive integers
    method: str

    @property
    def b_scaled(self) -> np.ndarray:
        """N * b for each attained sum b."""
        return self.sums + self.r * self.N

    @property
    def size(self) -> int:
        return len(self.sums)

    @property
    def total(self) -> int:
        return int(sum(int(c) for c in self.counts))

    @property
    def M(self) -> int:
        return _sum_squares(self.counts)

    def as_dict(self) -> dict[int, int]:
        return {int(b): int(c) for b, c in zip(self.sums, self.counts)}

    def to_csv(self, path, header: dict | None = None):
        with open(path, "w", newline="") as fh:
            for k, v in (header or {}).items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh)
            w.writerow(["b_scaled", "G"])
            for b, c in zip(self.b_scaled, self.counts):
                w.writerow([int(b), int(c)])


def _sum_squares(counts) -> int:
    c = np.asarray(counts)
    if c.dtype != object and c.size and int(c.max()) ** 2 * c.size < 2 ** 62:
        return int((c.astype(np.int64) ** 2).sum())
    return sum(int(x) * int(x) for x in c)


def _indicator(P: EndpointSet) -> np.ndarray:
    v = np.zeros(P.N, dtype=np.int64)
    v[P.keys.astype(np.int64)] = 1
    return v


def _fft_power(v: np.ndarray, r: int):
    L = 1 << int(np.ceil(np.log2(r * (len(v) - 1) + 1)))
    F = np.fft.rfft(v.astype(float), L)
    g = np.fft.irfft(F ** r, L)[: r * (len(v) - 1) + 1]
    rounded = np.rint(g)
    return rounded, float(np.max(np.abs(g - rounded))) if len(g) else 0.0


def direct_power(keys, r: int, length: int | None = None) -> np.ndarray:
    """r-fold self-convolution of an indicator by repeated shift-and-add, exact."""
    keys = [int(k) for k in keys]
    if length is None:
        length = max(keys) + 1
    S = len(keys)
    big = S ** r >= 2 ** 62
    dtype = object if big else np.int64
    g = np.zeros(length, dtype=dtype)
    for k in keys:
        g[k] += 1
    for step in range(2, r + 1):
        new = np.zeros(step * (length - 1) + 1, dtype=dtype)
        n_old = len(g)
        for k in keys:
            new[k:k + n_old] += g
        g = new
    return g


def sumset_profile(P: EndpointSet, r: int, validate: bool | None = None,
                   method: str = "auto") -> SumsetProfile:
    """Counts G over the r-fold sumset of P via FFT, checked against a direct convolution.

    ``validate`` defaults to True when N <= 1e5.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    S = len(P)
    v = _indicator(P)
    use_fft = method in ("auto", "fft") and r * S ** r < _FFT_EXACT_LIMIT
    g = None
    used = "direct"
    if use_fft:
        g, residue = _fft_power(v, r)
        if residue > 0.25:
            g = None
        else:
            g = g.astype(np.int64)
            used = "fft"
    if g is None:
        g = direct_power(P.keys, r, P.N)
    if validate is None:
        validate = P.N <= 10 ** 5 and used == "fft"
    if validate and used == "fft":
        ref = direct_power(P.keys, r, P.N)
        if not np.array_equal(ref.astype(np.int64), g):
            raise BoundViolation("FFT and direct convolution disagree")
    nz = np.nonzero(g)[0]
    return SumsetProfile(r, P.N, nz.astype(np.int64), g[nz], used)


def weighted_energy(P: EndpointSet, weights, r: int) -> float:
    """Sum over solutions of a_1+..+a_r = a_{r+1}+..+a_{2r} of prod_i w(a_i).

    Floating point; used for the chain of product lower bounds.
    """
    v = np.zeros(P.N)
    v[P.keys.astype(np.int64)] = np.asarray(weights, dtype=float)
    L = 1 << int(np.ceil(np.log2(r * (P.N - 1) + 1)))
    g = np.fft.irfft(np.fft.rfft(v, L) ** r, L)
    return float((g * g).sum())


def energy_bruteforce(P: EndpointSet, r: int, limit: int = _BRUTE_LIMIT) -> int:
    """Count 2r-tuples with equal half sums by exhaustive comparison."""
    S = len(P)
    if S ** (2 * r) > limit:
        raise InstanceTooLarge(f"S^(2r) = {S ** (2 * r)} exceeds {limit}")
    keys = [int(k) for k in P.keys]
    half = np.array([sum(t) for t in itertools.product(keys, repeat=r)], dtype=np.int64)
    total = 0
    block = max(1, 10 ** 7 // len(half))
    for i in range(0, len(half), block):
        total += int((half[i:i + block, None] == half[None, :]).sum())
    return total


def energy_lower_bound(seq: ParamSequences, l: int, r: int) -> Fraction:
    """(2r)^{-l} S_l^{2r-1}, exactly."""
    return Fraction(seq.S[l] ** (2 * r - 1), (2 * r) ** l)


def sumset_size_bound(seq: ParamSequences, l: int, r: int) -> int:
    return (2 * r) ** l * seq.S[l]


def check_chain(profile: SumsetProfile, seq: ParamSequences, l: int) -> dict:
    """Exact integer checks of the chain M >= (S^r)^2/|P^r| >= (2r)^{-l} S^{2r-1}.

    Raises BoundViolation if any link fails.
    """
    r = profile.r
    S = seq.S[l]
    M, size, total = profile.M, profile.size, profile.total
    bound = sumset_size_bound(seq, l, r)
    lower = energy_lower_bound(seq, l, r)
    out = {
        "l": l, "r": r, "S_l": S, "M": M, "sumset_size": size, "total": total,
        "size_bound": bound, "energy_lower_bound": str(lower),
        "total_ok": total == S ** r,
        "cauchy_schwarz_ok": M * size >= total * total,
        "size_ok": size <= bound,
        "lower_ok": M >= lower,
    }
    out["bound_ok"] = all(out[k] for k in ("total_ok", "cauchy_schwarz_ok", "size_ok", "lower_ok"))
    if not out["size_ok"]:
        raise BoundViolation(f"|P^(+{r})| = {size} exceeds (2r)^l S_l = {bound}")
    if not out["bound_ok"]:
        raise BoundViolation(f"energy chain fails at l={l}, r={r}: {out}")
    return out


def write_summary(path, summaries: list[dict], header: dict | None = None):
    with open(path, "w") as fh:
        json.dump({**(header or {}), "stages": summaries}, fh, indent=2)
