"""Fourier transforms of the stage measures and their decay diagnostics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._quad import gauss_legendre
from .cantor import StageMeasure, build_all_stages
from .params import ParamSequences

TWO_PI = 2.0 * math.pi

_SERIES_MAX_X = 12.0
_SERIES_TERMS = 80
_ASYM_TERMS = 40


def _bessel_series(nu: float, x: np.ndarray) -> np.ndarray:
    h = 0.5 * x
    q = -h * h
    term = np.power(h, nu) / math.gamma(nu + 1.0)
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + nu))
        total += term
    return total


def _bessel_asymptotic(nu: float, x: np.ndarray) -> np.ndarray:
    # Hankel expansion, each series truncated at its smallest term
    mu = 4.0 * nu * nu
    P = np.ones_like(x)
    Q = np.zeros_like(x)
    term = np.ones_like(x)
    prev = np.full_like(x, np.inf)
    live = np.ones(x.shape, dtype=bool)
    for k in range(1, _ASYM_TERMS):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(term)
        live &= mag < prev
        prev = np.where(live, mag, prev)
        contrib = np.where(live, term, 0.0)
        if k % 2:
            sign = 1.0 if (k // 2) % 2 == 0 else -1.0
            Q += sign * contrib
        else:
            sign = -1.0 if (k // 2) % 2 else 1.0
            P += sign * contrib
        if not live.any():
            break
    chi = x - (0.5 * nu + 0.25) * math.pi
    return np.sqrt(2.0 / (math.pi * x)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j(order: float, x):
    """J_order(x) for order >= 0 and x >= 0.

    Power series up to x = 12, Hankel asymptotic expansion beyond.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise ValueError("x must be >= 0")
    flat = np.atleast_1d(xa).ravel()
    out = np.empty_like(flat)
    small = flat <= _SERIES_MAX_X
    if small.any():
        out[small] = _bessel_series(order, flat[small])
    if (~small).any():
        out[~small] = _bessel_asymptotic(order, flat[~small])
    out = out.reshape(np.shape(xa))
    return float(out) if np.ndim(xa) == 0 else out


def sphere_hat(d: int, rho):
    """Fourier transform of the normalized surface measure on S^{d-1} at |xi| = rho.

    Gamma(d/2) (pi rho)^{-(d-2)/2} J_{(d-2)/2}(2 pi rho), equal to 1 at rho = 0.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    r = np.abs(np.asarray(rho, dtype=float))
    nu = 0.5 * (d - 2)
    z = TWO_PI * r
    if nu == 0:
        out = bessel_j(0.0, z)
    else:
        safe = np.where(r > 0, r, 1.0)
        out = math.gamma(d / 2) * np.power(math.pi * safe, -nu) * np.asarray(bessel_j(nu, z))
        # the series is well conditioned near 0; avoid the 0/0
        tiny = r < 1e-6
        if np.any(tiny):
            x2 = (math.pi * r) ** 2
            out = np.where(tiny, 1.0 - x2 / (nu + 1.0), out)
    return float(out) if np.ndim(out) == 0 else out


def _w(u: np.ndarray) -> np.ndarray:
    """Transform of the normalized indicator of [0, 1]: (1 - e^{-2 pi i u}) / (2 pi i u)."""
    small = np.abs(u) < 1e-8
    safe = np.where(small, 1.0, u)
    z = TWO_PI * 1j * safe
    full = (1.0 - np.exp(-z)) / z
    return np.where(small, 1.0 - 1j * math.pi * u, full)


def mu_hat(mu: StageMeasure, xi):
    """Exact transform (1/T) sum_a e^{-2 pi i a xi} w(xi / N) of a stage measure."""
    xa = np.atleast_1d(np.asarray(xi, dtype=float)).ravel()
    frac = mu.A.keys.astype(float) / float(mu.N)
    T = len(frac)
    out = np.empty(xa.shape, dtype=complex)
    block = max(1, 2_000_000 // max(T, 1))
    for i in range(0, len(xa), block):
        x = xa[i:i + block]
        ph = np.exp(-TWO_PI * 1j * np.outer(x, frac)).sum(axis=1) / T
        out[i:i + block] = ph * np.exp(-TWO_PI * 1j * x) * _w(x / mu.N)
    out = out.reshape(np.shape(xi))
    return complex(out) if np.ndim(xi) == 0 else out


def log_grid(max_xi: float, per_decade: int = 200, min_xi: float = 1.0) -> np.ndarray:
    """Points 10^(k/per_decade) from min_xi up to max_xi.

    Points depend only on the density, so grids for different stages share
    their low-frequency points.
    """
    k0 = math.ceil(per_decade * math.log10(min_xi) - 1e-9)
    k1 = math.floor(per_decade * math.log10(max_xi) + 1e-9)
    return 10.0 ** (np.arange(k0, k1 + 1) / per_decade)


@dataclass
class DecayReport:
    exponent: float
    xi: np.ndarray
    abs_transform: np.ndarray
    weighted: np.ndarray
    C_emp: float = field(init=False)
    argsup: float = field(init=False)
    grid_spec: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        i = int(np.argmax(self.weighted))
        self.C_emp = float(self.weighted[i])
        self.argsup = float(self.xi[i])

    def to_csv(self, path, header: dict | None = None) -> None:
        meta = {**self.grid_spec, "exponent": self.exponent, "seed": self.seed,
                "C_emp": self.C_emp, "argsup": self.argsup, **(header or {})}
        with open(path, "w", newline="") as fh:
            for k, v in meta.items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh)
            w.writerow(["xi", "abs_transform", "weighted_value"])
            for row in zip(self.xi, self.abs_transform, self.weighted):
                w.writerow([f"{v:.17g}" for v in row])


def decay_profile(mu: StageMeasure, exponent: float, grid=None, K: float = 10.0,
                  per_decade: int = 200) -> DecayReport:
    """sup over a log grid of |mu_hat(xi)| (1 + |xi|)^exponent."""
    if grid is None:
        grid = log_grid(K * mu.N, per_decade)
        spec = {"kind": "log", "per_decade": per_decade, "max_xi": K * mu.N, "count": len(grid)}
    else:
        grid = np.asarray(grid, dtype=float)
        spec = {"kind": "explicit", "max_xi": float(np.max(np.abs(grid))), "count": len(grid)}
    vals = np.abs(mu_hat(mu, grid))
    return DecayReport(exponent, grid, vals, vals * (1.0 + np.abs(grid)) ** exponent,
                       grid_spec=spec, seed=mu.A.seed)


@dataclass
class RetryResult:
    seed: int | None
    attempts: int
    C_by_stage: dict[int, float]
    spread: float
    history: list[tuple[int, float]]

    @property
    def ok(self) -> bool:
        return self.seed is not None


def decay_retry(seq: ParamSequences, stages, exponent: float, budget: int = 50,
                factor: float = 3.0, base_seed: int = 0, K: float = 10.0,
                per_decade: int = 100) -> RetryResult:
    """Reseed until the empirical decay constants over ``stages`` agree within ``factor``."""
    stages = sorted(stages)
    history = []
    best = None
    for attempt in range(budget):
        seed = base_seed + attempt
        built = build_all_stages(seq, stages[-1], seed)
        C = {j: decay_profile(built[j][2], exponent, K=K, per_decade=per_decade).C_emp for j in stages}
        spread = max(C.values()) / min(C.values())
        history.append((seed, spread))
        if best is None or spread < best[2]:
            best = (seed, C, spread)
        if spread <= factor:
            return RetryResult(seed, attempt + 1, C, spread, history)
    return RetryResult(None, budget, best[1], best[2], history)


def _radial_nodes(mu: StageMeasure, m: int):
    a = mu.A.values
    return gauss_legendre(a, a + 1.0 / mu.N, m)


def nu_hat(mu: StageMeasure, d: int, xi_mag):
    """Transform of the radialized measure |x|^{-(d-1)/2} d mu(|x|) x d sigma at |xi|.

    Real valued because sigma is symmetric; Gauss-Legendre on each interval
    with 8 + 4 ceil(|xi| / N) nodes.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    xs = np.atleast_1d(np.abs(np.asarray(xi_mag, dtype=float))).ravel()
    out = np.empty_like(xs)
    m_all = 8 + 4 * np.ceil(xs / mu.N).astype(int)
    weight = float(mu.N) / mu.T
    for m in np.unique(m_all):
        sel = m_all == m
        s, w = _radial_nodes(mu, int(m))
        s, w = s.ravel(), w.ravel() * weight * s.ravel() ** (-(d - 1) / 2)
        xsel = xs[sel]
        block = max(1, 4_000_000 // len(s))
        res = np.empty(len(xsel))
        for i in range(0, len(xsel), block):
            res[i:i + block] = sphere_hat(d, np.outer(xsel[i:i + block], s)) @ w
        out[sel] = res
    out = out.reshape(np.shape(xi_mag))
    return float(out) if np.ndim(xi_mag) == 0 else out


def gatesoupe_constant(mu: StageMeasure, d: int, beta0: float, grid=None, C_mu: float | None = None,
                       K: float = 10.0, per_decade: int = 100):
    """Fitted C with |nu_hat(r)| <= C C_mu r^{-(d-1)/2} (1 + r)^{-beta0/2} on the grid."""
    if grid is None:
        grid = log_grid(K * mu.N, per_decade)
    if C_mu is None:
        C_mu = decay_profile(mu, beta0 / 2, grid=grid).C_emp
    vals = np.abs(nu_hat(mu, d, grid))
    envelope = grid ** (-(d - 1) / 2) * (1.0 + grid) ** (-beta0 / 2)
    ratio = vals / envelope
    return float(ratio.max() / C_mu), float(ratio.max()), np.asarray(grid), vals


def write_decay_csv(path, report: DecayReport, header: dict | None = None) -> Path:
    report.to_csv(path, header)
    return Path(path)
