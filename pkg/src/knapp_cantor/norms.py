"""Knapp box, window g, lower bounds for the L^p norms of (f_l nu)^ and the
divergence bookkeeping.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._quad import gauss_legendre, plateau
from .cantor import StageMeasure, build_all_stages
from .energy import weighted_energy
from .geometry import (TestFunction, bump_nu_integral, bump_transform, f_l1_norm,
                       f_l2_norm_sq, make_test_function)
from .fourier import TWO_PI
from .params import Exponents, ParamSequences


class QuadratureError(RuntimeError):
    pass


class TruncationError(RuntimeError):
    pass


def choose_eta(r: int, d: int) -> float:
    """Largest eta with (2^{2r} - 1) 6 pi d eta = 1/2."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return 1.0 / (2 * 6 * math.pi * d * (2 ** (2 * r) - 1))


@dataclass(frozen=True)
class KnappBox:
    """{xi : |xi_j| <= eta/delta for j < d, |xi_d| <= eta/delta^2}, delta = N^{-1/2}."""

    eta: float
    N: int
    d: int

    @property
    def delta(self) -> float:
        return self.N ** -0.5

    def half_widths(self, c: float = 1.0) -> np.ndarray:
        h = np.full(self.d, c * self.eta * math.sqrt(self.N))
        h[-1] = c * self.eta * self.N
        return h

    def volume(self, c: float = 1.0) -> float:
        """Lebesgue measure of c R_delta: (2 c eta)^d delta^{-(d+1)}."""
        return float(np.prod(2 * self.half_widths(c)))

    def nominal_volume(self, c: float = 1.0) -> float:
        """(c eta)^d delta^{-(d+1)}, the volume up to the factor 2^d."""
        return (c * self.eta) ** self.d * self.N ** ((self.d + 1) / 2)

    def contains(self, xi, c: float = 1.0) -> np.ndarray:
        xi = np.atleast_2d(xi)
        return np.all(np.abs(xi) <= self.half_widths(c), axis=1)

    def sample(self, rng: np.random.Generator, n: int, c: float = 1.0) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, (n, self.d)) * self.half_widths(c)


def _h1(u):
    return plateau(u, 0.25, 0.5)


_G1_NODES = 48


def g1(u, block: int = 8192):
    """Autocorrelation of the 1-d plateau h1 (1 on |u| <= 1/4, 0 on |u| >= 1/2)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if len(u) > block:
        return np.concatenate([g1(u[i:i + block], block) for i in range(0, len(u), block)])
    lo = np.maximum(-0.5, u - 0.5)
    hi = np.minimum(0.5, u + 0.5)
    bps = np.stack([lo, hi, *[np.full_like(u, c) for c in (-0.25, 0.25)],
                    u - 0.25, u + 0.25], axis=1)
    bps = np.sort(np.clip(bps, lo[:, None], hi[:, None]), axis=1)
    v, w = gauss_legendre(bps[:, :-1], bps[:, 1:], _G1_NODES)
    out = (w * _h1(v) * _h1(v - u[:, None, None])).sum(axis=(1, 2))
    return np.where(hi > lo, out, 0.0)


def h1_hat(x, n: int = 256):
    """Fourier transform of h1 (real and even)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v, w = gauss_legendre(np.array([-0.5, -0.25, 0.25]), np.array([-0.25, 0.25, 0.5]), n)
    v, w = v.ravel(), w.ravel()
    return (np.cos(TWO_PI * np.outer(x, v)) * (w * _h1(v))).sum(axis=1)


def g1_hat(x, n: int = 512):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    edges = np.linspace(-1.0, 1.0, 9)
    v, w = gauss_legendre(edges[:-1], edges[1:], n // 8)
    v, w = v.ravel(), w.ravel()
    return (np.cos(TWO_PI * np.outer(x, v)) * (w * g1(v))).sum(axis=1)


@dataclass(frozen=True)
class WindowG:
    """g = h * h~ with h a separable plateau, 1 on R/4 and supported in R/2."""

    box: KnappBox

    def h(self, xi) -> np.ndarray:
        xi = np.atleast_2d(xi)
        return np.prod(_h1(xi / self.box.half_widths()), axis=1)

    def __call__(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        H = self.box.half_widths()
        out = np.ones(len(xi))
        for j in range(self.box.d):
            vals, inv = np.unique(xi[:, j], return_inverse=True)
            out *= H[j] * g1(vals / H[j])[inv.ravel()]
        return out

    def peak(self) -> float:
        return float(self(np.zeros((1, self.box.d)))[0])

    def integral(self) -> float:
        # each factor integrates to (H_j * integral of h1)^2
        H = self.box.half_widths()
        v, w = gauss_legendre(np.array([-0.5, -0.25, 0.25]), np.array([-0.25, 0.25, 0.5]), 64)
        m = float((w * _h1(v)).sum())
        return float(np.prod((H * m) ** 2))


def _gl_box(half_widths, n: int, panels: int = 1):
    """Tensor Gauss-Legendre nodes on the box |xi_j| <= half_widths[j]."""
    axes_x, axes_w = [], []
    for H in half_widths:
        e = np.linspace(-H, H, panels + 1)
        x, w = gauss_legendre(e[:-1], e[1:], n)
        axes_x.append(x.ravel())
        axes_w.append(w.ravel())
    grids = np.meshgrid(*axes_x, indexing="ij")
    wgrid = np.ones_like(grids[0])
    for j, wj in enumerate(np.meshgrid(*axes_w, indexing="ij")):
        wgrid = wgrid * wj
    return np.stack([g.ravel() for g in grids], axis=1), wgrid.ravel()


def _initial_nodes(f: TestFunction, xi: np.ndarray) -> tuple[int, int]:
    xmax = float(np.max(np.abs(xi))) if xi.size else 0.0
    b = f.bumps[0]
    n_r = 8 + int(math.ceil(4 * xmax * (b.r_hi - b.r_lo)))
    n_t = 8 + int(math.ceil(4 * xmax * 3.0 * b.theta_outer))
    return min(n_r, 512), min(n_t, 512)


def _transform_sum(f: TestFunction, mu, xi: np.ndarray, n_r: int, n_t: int, block: int = 2048):
    out = np.zeros(len(xi), dtype=complex)
    for i in range(0, len(xi), block):
        x = xi[i:i + block]
        for b in f.bumps:
            out[i:i + block] += np.exp(-TWO_PI * 1j * x[:, -1] * b.a) * bump_transform(b, mu, x, n_r, n_t)
    return out


def f_hat_nu(f: TestFunction, mu: StageMeasure, d: int, xi, rtol: float = 1e-6,
             max_doublings: int = 4):
    """(f_l nu)^(xi) as a sum of sector integrals, accepted once doubling the nodes
    changes it by less than rtol times the L^1(nu) norm of f_l.
    """
    if d != f.d:
        raise ValueError("dimension mismatch")
    if d not in (2, 3):
        raise NotImplementedError("direct quadrature supports d in {2, 3}")
    xi = np.asarray(xi, dtype=float)
    lead = xi.shape[:-1]
    X = xi.reshape(-1, d)
    scale = f_l1_norm(f, mu)
    n_r, n_t = _initial_nodes(f, X)
    prev = _transform_sum(f, mu, X, n_r, n_t)
    for _ in range(max_doublings):
        n_r, n_t = 2 * n_r, 2 * n_t
        cur = _transform_sum(f, mu, X, n_r, n_t)
        err = float(np.max(np.abs(cur - prev))) if len(cur) else 0.0
        if err <= rtol * scale:
            return cur.reshape(lead)
        prev = cur
    raise QuadratureError(f"no convergence at n_r={n_r}, n_t={n_t}: change {err:.3e} vs scale {scale:.3e}")


def lp_lower_direct(f: TestFunction, mu: StageMeasure, d: int, p: float, r: int,
                    eta: float | None = None, box_scale: float = 1.0, n_xi: int = 6,
                    beta: float | None = None) -> float:
    """Integral of |(f_l nu)^|^p over box_scale * R_delta, a lower bound for ||(f_l nu)^||_p^p."""
    if p > 2 * r:
        raise ValueError(f"need p <= 2r, got p={p}, r={r}")
    if beta is not None and not r * beta > d:
        raise ValueError(f"need r beta > d, got r={r}, beta={beta}, d={d}")
    eta = choose_eta(r, d) if eta is None else eta
    box = KnappBox(eta, mu.N, d)
    nodes, w = _gl_box(box.half_widths(box_scale), n_xi)
    vals = np.abs(f_hat_nu(f, mu, d, nodes)) ** p
    return float((w * vals).sum())


def phase_bound_check(f: TestFunction, box: KnappBox, samples: int, rng_seed: int = 0):
    """Largest sampled |xi.(x - a e_d)| over x in supp psi_a and xi in R_delta."""
    rng = np.random.default_rng(rng_seed)
    d = f.d
    worst = 0.0
    per = max(1, samples // len(f.bumps))
    H = box.half_widths()
    for b in f.bumps:
        s = rng.uniform(b.r_lo, b.r_hi, per)
        th = rng.uniform(0.0, b.theta_outer, per)
        # extreme corners of both supports
        s[:4] = b.r_hi
        th[:4] = b.theta_outer
        u = rng.normal(size=(per, d - 1))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        x = np.concatenate([s[:, None] * np.sin(th)[:, None] * u, (s * np.cos(th))[:, None]], axis=1)
        x[:, -1] -= b.a
        xi = box.sample(rng, per)
        xi[:4] = np.sign(x[:4]) * H
        worst = max(worst, float(np.max(np.abs((xi * x).sum(axis=1)))))
    return worst, 3 * d * box.eta


# ---------------------------------------------------------------- formulas

def _log(x: int) -> float:
    return math.log(x)


def log_lemma_101_rhs(seq: ParamSequences, l: int, r: int, d: int) -> float:
    S, T, N = seq.S[l], seq.T[l], seq.N[l]
    return (-l * math.log(2 * r) + (d + 1) / 2 * _log(N) - r * (d - 1) * _log(N)
            - 2 * r * _log(T) + (2 * r - 1) * _log(S))


def lemma_101_rhs(seq: ParamSequences, l: int, r: int, d: int) -> float:
    """(2r)^{-l} N^{(d+1)/2} N^{-r(d-1)} T^{-2r} S^{2r-1} at stage l."""
    return math.exp(log_lemma_101_rhs(seq, l, r, d))


def ratio_exponent(exp: Exponents, p: float) -> float:
    """Power of N_l in the divergence ratio."""
    d, a0, b0 = exp.d, exp.alpha0, exp.beta0
    return -(p / 4) * (d - 1 + b0) + (d + 1) / 2 - a0 + b0 / 2


def critical_p(exp: Exponents) -> Fraction:
    """(4d - 4 alpha + 2 beta) / beta, exact in the binary values of alpha and beta."""
    a, b = Fraction(exp.alpha), Fraction(exp.beta)
    return (4 * exp.d - 4 * a + 2 * b) / b


def _subpoly_log(seq: ParamSequences, l: int, r: int) -> float:
    """log of (2r)^l n_{l+1}^{alpha0} ln(400 (l+1) N_{l+1})."""
    if l + 1 > seq.J:
        raise ValueError(f"stage {l} needs n_{l + 1}; sequences stop at J={seq.J}")
    a0 = seq.exponents.alpha0
    return l * math.log(2 * r) + a0 * math.log(seq.n_(l + 1)) + math.log(math.log(400 * (l + 1) * seq.N[l + 1]))


def log_lemma_111_rhs(seq: ParamSequences, l: int, p: float, r: int, d: int) -> float:
    e = seq.exponents
    k = -(p / 2) * (d - 1 + e.beta0) + (d + 1) / 2 - e.alpha0 + e.beta0 / 2
    return k * _log(seq.N[l]) - _subpoly_log(seq, l, r)


def lemma_111_rhs(seq: ParamSequences, l: int, p: float, r: int, d: int) -> float:
    return math.exp(log_lemma_111_rhs(seq, l, p, r, d))


def log_lemma_112_value(seq: ParamSequences, l: int, p: float, d: int) -> float:
    e = seq.exponents
    return -(p / 4) * (d - 1 + e.beta0) * _log(seq.N[l])


def lemma_112_value(seq: ParamSequences, l: int, p: float, d: int) -> float:
    return math.exp(log_lemma_112_value(seq, l, p, d))


@dataclass
class RatioSeries:
    p: float
    r: int
    d: int
    mode: str
    stages: list[int]
    N: list[int]
    log_values: list[float]
    p0: Fraction
    analytic_exponent: float
    fitted_exponent: float
    tol: float = 1e-9
    extras: dict = field(default_factory=dict)

    @property
    def values(self) -> list[float]:
        return [math.exp(v) for v in self.log_values]

    @property
    def monotone(self) -> str:
        diffs = np.diff(self.log_values)
        if np.all(diffs > 0):
            return "increasing"
        if np.all(diffs < 0):
            return "decreasing"
        return "mixed"

    @property
    def classification(self) -> str:
        if self.fitted_exponent > self.tol:
            return "diverging"
        if self.fitted_exponent < -self.tol:
            return "converging"
        return "threshold"

    def to_csv(self, path, header: dict | None = None):
        with open(path, "w", newline="") as fh:
            for k, v in (header or {}).items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh)
            w.writerow(["l", "N_l", "proxy", "mode", "p", "p0", "classification"])
            for l, N, v in zip(self.stages, self.N, self.values):
                w.writerow([l, N, f"{v:.17g}", self.mode, f"{self.p:.17g}",
                            f"{float(self.p0):.17g}", self.classification])


def _slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2:
        return float("nan")
    xc = x - x.mean()
    return float((xc * (y - y.mean())).sum() / (xc * xc).sum())


def ratio_trend(seq: ParamSequences, stages, p: float, r: int, d: int | None = None,
                mode: str = "formula", rng_seed: int = 0, measured_data: dict | None = None) -> RatioSeries:
    """Per-stage divergence proxy and its fitted N_l exponent.

    formula: the L^{2r} lower-bound formula over the L^2(nu) norm formula; the exponent is
    fitted after removing (2r)^l n_{l+1}^{alpha0} ln(400 (l+1) N_{l+1}).
    measured: lp_lower_direct over ||f_l||_{L^2(nu)}^p from quadrature.
    """
    exp = seq.exponents
    d = exp.d if d is None else d
    stages = list(stages)
    logN = [math.log(seq.N[l]) for l in stages]
    extras = {}
    if mode == "formula":
        logs = [log_lemma_111_rhs(seq, l, p, r, d) - log_lemma_112_value(seq, l, p, d) for l in stages]
        normalized = [v + _subpoly_log(seq, l, r) for v, l in zip(logs, stages)]
        # normalized = k log N_l with no intercept, so a single stage already fixes k
        x = np.asarray(logN)
        fitted = float(x @ np.asarray(normalized) / (x @ x))
        tol = 1e-9
    elif mode == "measured":
        if d not in (2, 3):
            raise ValueError("measured mode supports d in {2, 3}")
        if measured_data is None:
            built = build_all_stages(seq, max(stages), rng_seed)
            measured_data = {}
            for l in stages:
                P, A, mu = built[l]
                measured_data[l] = (make_test_function(P, A, seq, d), mu)
        logs = []
        for l in stages:
            f, mu = measured_data[l]
            top = lp_lower_direct(f, mu, d, p, r)
            bottom = f_l2_norm_sq(f, mu) ** (p / 2)
            logs.append(math.log(top) - math.log(bottom))
        fitted = _slope(logN, logs)
        tol = 0.0
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return RatioSeries(p, r, d, mode, stages, [seq.N[l] for l in stages], logs,
                       critical_p(exp), ratio_exponent(exp, p), fitted, tol, extras)


def write_gnuplot(path, csv_paths: list[str], title: str = "ratio proxy"):
    lines = [
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'N_l'",
        "set ylabel 'proxy'",
        f"set title '{title}'",
    ]
    plots = [f"'{p}' every ::1 using 2:3 with linespoints title '{p}'" for p in csv_paths]
    lines.append("plot " + ", \\\n     ".join(plots))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------- chain checks

def chain_lower_bound(f: TestFunction, mu: StageMeasure, P_l, r: int, eta: float | None = None) -> float:
    """(1 / (2 lambda(R/2))) * sum over energy solutions of prod psi_a-integrals * lambda(R/8)^2."""
    d = f.d
    eta = choose_eta(r, d) if eta is None else eta
    box = KnappBox(eta, mu.N, d)
    weights = [bump_nu_integral(b, mu) for b in f.bumps]
    W = weighted_energy(P_l, weights, r)
    return W * box.volume(1 / 8) ** 2 / (2 * box.volume(1 / 2))


@dataclass
class ClaimResult:
    real: float
    imag: float
    scale: float
    delta_sum: Fraction

    @property
    def ok(self) -> bool:
        return self.real >= -1e-8 * self.scale and abs(self.imag) <= 1e-8 * self.scale

    def as_dict(self) -> dict:
        return {"real": self.real, "imag": self.imag, "scale": self.scale,
                "delta_sum": str(self.delta_sum), "ok": self.ok}


def claim_I_nonneg(tuple_bumps, window: WindowG, mu: StageMeasure, d: int, r: int | None = None,
                   beta: float | None = None, n_xi: int = 8, panels: int = 8) -> ClaimResult:
    """Direct quadrature of I(a_1, ..., a_2r) over the support of g."""
    bumps = list(tuple_bumps)
    if r is None:
        r = len(bumps) // 2
    if len(bumps) != 2 * r:
        raise ValueError("need exactly 2r bumps")
    if d != 2 or r != 2:
        raise ValueError("cost guard: d = 2 and r = 2 only")
    if mu.j > 2:
        raise ValueError("cost guard: stage l <= 2 only")
    if beta is not None and not r * beta > d:
        raise ValueError("need r beta > d")
    box = window.box
    H = box.half_widths()
    # the support of g is the closed box R_delta; confirm g vanishes on its faces
    faces = np.array([[H[0], 0.0], [0.0, H[1]], [H[0], H[1]]])
    if float(np.max(window(faces))) > 1e-12 * window.peak():
        raise TruncationError("window does not vanish on the integration box")
    nodes, w = _gl_box(H, n_xi, panels)
    gvals = window(nodes)
    keep = gvals > 0
    nodes, w, gvals = nodes[keep], w[keep], gvals[keep]
    Nl = mu.N
    delta = Fraction(sum(int(b.key) for b in bumps[:r]) - sum(int(b.key) for b in bumps[r:]), Nl)
    cache = {}
    for b in bumps:
        if b.key not in cache:
            cache[b.key] = bump_transform(b, mu, nodes, 16, 32)
    prod = np.exp(-TWO_PI * 1j * nodes[:, -1] * float(delta))
    for b in bumps[:r]:
        prod = prod * cache[b.key]
    for b in bumps[r:]:
        prod = prod * np.conj(cache[b.key])
    val = (w * gvals * prod).sum()
    zero = np.zeros((1, d))
    scale = window.integral() * float(np.prod([bump_transform(b, mu, zero, 16, 32).real[0] for b in bumps]))
    return ClaimResult(float(val.real), float(val.imag), scale, delta)
