"""Annuli, sectors and caps of the radial measure nu, the bumps psi_a, and
the ball-condition scan.

Directions are described by the polar angle theta from the axis e; the
chord |omega - e| equals 2 sin(theta/2), so a chord cap of width w is the
angular cap theta <= 2 arcsin(w/4).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._quad import gauss_legendre, plateau
from .cantor import EndpointSet, StageMeasure, check_isolation
from .fourier import TWO_PI, bessel_j
from .params import ParamSequences


class IsolationError(RuntimeError):
    pass


def _sphere_norm(d: int) -> float:
    # integral of sin^{d-2} over [0, pi]
    return math.sqrt(math.pi) * math.gamma((d - 1) / 2) / math.gamma(d / 2)


def cap_fraction(d: int, theta, n: int = 64):
    """sigma({omega : angle(omega, e) <= theta}) for the uniform measure on S^{d-1}."""
    th = np.clip(np.asarray(theta, dtype=float), 0.0, math.pi)
    if d == 2:
        out = th / math.pi
    elif d >= 3:
        t, w = gauss_legendre(0.0, th, n)
        out = (np.sin(t) ** (d - 2) * w).sum(axis=-1) / _sphere_norm(d)
    else:
        raise ValueError("d must be >= 2")
    return float(out) if np.ndim(out) == 0 else out


def chord_to_angle(w):
    return 2.0 * np.arcsin(np.minimum(1.0, np.asarray(w, dtype=float) / 4.0))


def cap_measure(d: int, w: float) -> float:
    """sigma-measure of the chord cap {|omega - e| <= w/2}."""
    if not w > 0:
        raise ValueError(f"cap width must be positive, got {w}")
    if w >= 4:
        return 1.0
    return float(cap_fraction(d, float(chord_to_angle(w))))


def radial_weight_integral(d: int, lo, hi):
    """Exact integral of s^{-(d-1)/2} over [lo, hi]."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    k = (d - 1) / 2
    if k == 1:
        return np.log(hi / lo)
    return (hi ** (1 - k) - lo ** (1 - k)) / (1 - k)


@dataclass(frozen=True)
class SectorRegion:
    """{x : |x| in [a, a + thickness], |x/|x| - e| <= w/2}."""

    a: float
    thickness: float
    w: float
    d: int
    e: tuple[float, ...] | None = None

    def axis(self) -> np.ndarray:
        if self.e is None:
            v = np.zeros(self.d)
            v[-1] = 1.0
            return v
        v = np.asarray(self.e, dtype=float)
        return v / np.linalg.norm(v)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            chord = np.linalg.norm(x / r[:, None] - self.axis(), axis=1)
        return (r >= self.a) & (r <= self.a + self.thickness) & (chord <= self.w / 2)


def _interval_overlaps(mu: StageMeasure, lo: float, hi: float):
    """(clipped_lo, clipped_hi) arrays for the A-intervals meeting [lo, hi]."""
    left = mu.A.values
    L = 1.0 / mu.N
    i0 = max(0, int(np.searchsorted(left, lo - L, side="left")))
    i1 = int(np.searchsorted(left, hi, side="right"))
    a = left[i0:i1]
    clo, chi = np.maximum(a, lo), np.minimum(a + L, hi)
    keep = chi > clo
    return clo[keep], chi[keep]


def radial_mass(mu: StageMeasure, d: int, lo: float, hi: float) -> float:
    """Weighted radial mass: integral over [lo, hi] of s^{-(d-1)/2} d mu(s)."""
    clo, chi = _interval_overlaps(mu, lo, hi)
    if len(clo) == 0:
        return 0.0
    return float(radial_weight_integral(d, clo, chi).sum() * mu.N / mu.T)


def nu_region_mass(mu: StageMeasure, d: int, region: SectorRegion) -> float:
    cap = 1.0 if region.w >= 4 else cap_measure(d, region.w)
    return radial_mass(mu, d, region.a, region.a + region.thickness) * cap


def nu_total_mass(mu: StageMeasure, d: int) -> float:
    return nu_region_mass(mu, d, SectorRegion(1.0, 1.0, 4.0, d))


@dataclass(frozen=True)
class BumpSpec:
    """Smooth bump equal to 1 on C_{a, delta^2, delta, e_d}.

    The radial profile rises over [a - delta^2/4, a] and falls over
    [a + delta^2, a + 5 delta^2/4]; the angular profile falls from the core
    angle theta_core to theta_core + delta^2 / (4 (a + delta^2)). Any point
    of the support is then within delta^2/2 of the core sector.
    """

    a: float
    l: int
    N: int
    d: int
    key: int | None = None

    @property
    def delta(self) -> float:
        return self.N ** -0.5

    @property
    def thickness(self) -> float:
        return 1.0 / self.N

    @property
    def radial_collar(self) -> float:
        return self.thickness / 4

    @property
    def theta_core(self) -> float:
        return float(chord_to_angle(self.delta))

    @property
    def theta_outer(self) -> float:
        return self.theta_core + self.thickness / (4 * (self.a + self.thickness))

    @property
    def r_lo(self) -> float:
        return self.a - self.radial_collar

    @property
    def r_hi(self) -> float:
        return self.a + self.thickness + self.radial_collar

    def core(self) -> SectorRegion:
        return SectorRegion(self.a, self.thickness, self.delta, self.d)

    def radial_profile(self, r):
        mid = self.a + self.thickness / 2
        return plateau(np.asarray(r) - mid, self.thickness / 2, self.thickness / 2 + self.radial_collar)

    def angular_profile(self, theta):
        return plateau(theta, self.theta_core, self.theta_outer)


def make_bump(a, seq: ParamSequences, l: int, d: int, key: int | None = None) -> BumpSpec:
    if key is None:
        key = round((float(a) - 1.0) * seq.N[l])
    return BumpSpec(float(a), l, seq.N[l], d, key)


def polar_angle(x, e=None) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if e is None:
        e = np.zeros(x.shape[1])
        e[-1] = 1.0
    r = np.linalg.norm(x, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.clip((x @ e) / r, -1.0, 1.0)
    return np.arccos(c)


def bump_eval(bump: BumpSpec, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=1)
    v = bump.radial_profile(r) * bump.angular_profile(polar_angle(x))
    return v if len(v) > 1 else float(v[0])


@dataclass
class TestFunction:
    """f_l = sum of one bump per a in P_l; supports are disjoint."""

    __test__ = False  # not a pytest class

    l: int
    d: int
    bumps: list[BumpSpec]


def make_test_function(P_l: EndpointSet, A_l: EndpointSet, seq: ParamSequences, d: int) -> TestFunction:
    if P_l.j != A_l.j:
        raise ValueError("stage mismatch between P and A")
    if not check_isolation(A_l, P_l, seq):
        raise IsolationError(f"stage {P_l.j}: P-annuli are not isolated inside A")
    bumps = [make_bump(v, seq, P_l.j, d, int(k)) for v, k in zip(P_l.values, P_l.keys)]
    return TestFunction(P_l.j, d, bumps)


def _angular_nodes(bump: BumpSpec, n: int):
    """Nodes on [0, theta_outer] split at the core edge, with d-dependent sigma weights."""
    lo = np.array([0.0, bump.theta_core])
    hi = np.array([bump.theta_core, bump.theta_outer])
    t, w = gauss_legendre(lo, hi, n)
    t, w = t.ravel(), w.ravel()
    d = bump.d
    if d == 2:
        w = w / math.pi  # both signs of theta, density 1/(2 pi)
    else:
        w = w * np.sin(t) ** (d - 2) / _sphere_norm(d)
    return t, w


def _radial_nodes(bump: BumpSpec, mu: StageMeasure, n: int, power: int = 1):
    clo, chi = _interval_overlaps(mu, bump.r_lo, bump.r_hi)
    if len(clo) == 0:
        return np.zeros(0), np.zeros(0)
    s, w = gauss_legendre(clo, chi, n)
    s, w = s.ravel(), w.ravel()
    w = w * (mu.N / mu.T) * s ** (-(bump.d - 1) / 2) * bump.radial_profile(s) ** power
    return s, w


def _bump_moment(bump: BumpSpec, mu: StageMeasure, power: int, n_r: int, n_t: int) -> float:
    s, wr = _radial_nodes(bump, mu, n_r, power)
    t, wt = _angular_nodes(bump, n_t)
    return float(wr.sum() * (wt * bump.angular_profile(t) ** power).sum())


def _converged(fn, n0: int = 16, rtol: float = 1e-10, max_doublings: int = 6) -> float:
    prev = fn(n0)
    n = n0
    for _ in range(max_doublings):
        n *= 2
        cur = fn(n)
        if abs(cur - prev) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise RuntimeError(f"quadrature did not converge with {n} nodes")


def bump_nu_integral(bump: BumpSpec, mu: StageMeasure, A_l: EndpointSet | None = None,
                     P_l: EndpointSet | None = None, n: int | None = None) -> float:
    """Integral of psi_a against nu (radial Gauss-Legendre x polar-angle rule)."""
    if A_l is not None and P_l is not None and not check_isolation(A_l, P_l):
        raise IsolationError(f"stage {A_l.j}: isolation fails, upper bound argument breaks")
    if n is not None:
        return _bump_moment(bump, mu, 1, n, n)
    return _converged(lambda m: _bump_moment(bump, mu, 1, m, m))


def bump_l2_integral(bump: BumpSpec, mu: StageMeasure, n: int | None = None) -> float:
    if n is not None:
        return _bump_moment(bump, mu, 2, n, n)
    return _converged(lambda m: _bump_moment(bump, mu, 2, m, m))


def _check_disjoint(f: TestFunction):
    bs = sorted(f.bumps, key=lambda b: b.a)
    for b1, b2 in zip(bs, bs[1:]):
        if b1.r_hi > b2.r_lo:
            raise IsolationError(f"bumps at a={b1.a} and a={b2.a} overlap")


def f_l1_norm(f: TestFunction, mu: StageMeasure) -> float:
    _check_disjoint(f)
    return sum(bump_nu_integral(b, mu) for b in f.bumps)


def f_l2_norm_sq(f: TestFunction, mu: StageMeasure) -> float:
    """||f_l||^2 in L^2(nu) as the sum of the per-bump integrals of psi_a^2."""
    _check_disjoint(f)
    return sum(bump_l2_integral(b, mu) for b in f.bumps)


def bump_transform(bump: BumpSpec, mu: StageMeasure, xi, n_r: int = 12, n_t: int = 24,
                   centred: bool = True):
    """Integral of e^{-2 pi i xi.(x - a e_d)} psi_a(x) d nu(x) (``centred``) or of e^{-2 pi i xi.x} psi_a.

    ``xi`` has shape (..., d); only d in {2, 3} is supported.
    """
    d = bump.d
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != d:
        raise ValueError("xi must end in an axis of length d")
    s, wr = _radial_nodes(bump, mu, n_r)
    t, wt = _angular_nodes(bump, n_t)
    wt = wt * bump.angular_profile(t)
    shift = bump.a if centred else 0.0
    lead = xi.shape[:-1]
    X = xi.reshape(-1, d)
    xd = X[:, -1][:, None, None]
    perp = np.linalg.norm(X[:, :-1], axis=1)[:, None, None]
    S = s[None, :, None]
    Tt = t[None, None, :]
    phase_d = np.exp(-TWO_PI * 1j * xd * (S * np.cos(Tt) - shift))
    arg = TWO_PI * perp * S * np.sin(Tt)
    if d == 2:
        # theta and -theta pair into a cosine
        lateral = np.cos(arg)
    elif d == 3:
        lateral = bessel_j(0.0, arg)
    else:
        raise NotImplementedError("direct transforms are implemented for d in {2, 3}")
    vals = np.einsum("xst,s,t->x", phase_d * lateral, wr, wt)
    return vals.reshape(lead)


# ---------------------------------------------------------------- Frostman

@dataclass
class FrostmanReport:
    alpha: float
    radius: np.ndarray = field(default_factory=lambda: np.zeros(0))
    r: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mass: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def ratio(self) -> np.ndarray:
        return self.mass / self.r ** self.alpha if len(self.r) else np.zeros(0)

    @property
    def sup_ratio(self) -> float:
        return float(self.ratio.max()) if len(self.r) else 0.0

    def to_csv(self, path, header: dict | None = None):
        with open(path, "w", newline="") as fh:
            for k, v in {"alpha": self.alpha, "sup_ratio": self.sup_ratio, **(header or {})}.items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh)
            w.writerow(["x", "r", "mass", "ratio"])
            for row in zip(self.radius, self.r, self.mass, self.ratio):
                w.writerow([f"{v:.17g}" for v in row])


def ball_mass(mu: StageMeasure, d: int, x_norm: float, r: float, n: int = 16) -> float:
    """nu(B(x, r)) for |x| = x_norm, exact geometry up to quadrature.

    The sphere of radius s meets the ball in the cap of polar angle
    arccos((s^2 + |x|^2 - r^2) / (2 s |x|)) about x/|x|.
    """
    clo, chi = _interval_overlaps(mu, max(0.0, x_norm - r), x_norm + r)
    if len(clo) == 0:
        return 0.0
    s, w = gauss_legendre(clo, chi, n)
    if x_norm == 0:
        frac = np.where(s <= r, 1.0, 0.0)
    else:
        c = np.clip((s * s + x_norm * x_norm - r * r) / (2 * s * x_norm), -1.0, 1.0)
        frac = cap_fraction(d, np.arccos(c))
    return float((w * s ** (-(d - 1) / 2) * frac).sum() * mu.N / mu.T)


def verify_frostman(mu: StageMeasure, d: int, alpha: float, samples: int,
                    rng_seed: int = 0, r_min: float | None = None, r_max: float = 1.0) -> FrostmanReport:
    """Sample balls near supp nu with log-uniform radii and record nu(B)/r^alpha."""
    rep = FrostmanReport(alpha)
    if samples <= 0:
        return rep
    rng = np.random.default_rng(rng_seed)
    r_min = 1.0 / mu.N if r_min is None else r_min
    r = np.exp(rng.uniform(math.log(r_min), math.log(r_max), samples))
    centre = mu.sample_radii(rng, samples) + r * rng.uniform(-1.0, 1.0, samples)
    centre = np.abs(centre)
    mass = np.array([ball_mass(mu, d, c, rr) for c, rr in zip(centre, r)])
    rep.radius, rep.r, rep.mass = centre, r, mass
    return rep
