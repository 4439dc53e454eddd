"""Endpoint sets P_j, A_j and the stage measures mu_j.

An endpoint a = 1 + sum_k a^(k)/N_k is stored as its scaled integer key
N_j (a - 1) in [0, N_j). Keys are exact; floats appear only in ``values``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .params import ParamSequences


class ConstructionError(RuntimeError):
    pass


def _key_array(keys) -> np.ndarray:
    arr = np.asarray(sorted(int(k) for k in keys), dtype=object)
    if arr.size == 0 or int(arr[-1]) < 2**62:
        return arr.astype(np.int64)
    return arr


@dataclass(frozen=True)
class EndpointSet:
    """Sorted scaled keys of a stage-``j`` endpoint set (kind 'P' or 'A')."""

    j: int
    kind: str
    N: int
    keys: np.ndarray
    seed: int | None = None

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key) -> bool:
        i = np.searchsorted(self.keys, key)
        return bool(i < len(self.keys) and self.keys[i] == key)

    @property
    def values(self) -> np.ndarray:
        return 1.0 + self.keys.astype(float) / float(self.N)

    def fractions(self) -> list[Fraction]:
        return [1 + Fraction(int(k), self.N) for k in self.keys]

    def key_set(self) -> set[int]:
        return {int(k) for k in self.keys}

    def digits(self, seq: ParamSequences) -> np.ndarray:
        """Digit matrix, row i holds a^(1..j) of the i-th endpoint."""
        return keys_to_digits(self.keys, seq, self.j)


def keys_to_digits(keys, seq: ParamSequences, j: int) -> np.ndarray:
    out = np.zeros((len(keys), j), dtype=np.int64)
    rem = np.array([int(k) for k in keys], dtype=object)
    for k in range(j, 0, -1):
        nk = seq.n_(k)
        out[:, k - 1] = (rem % nk).astype(np.int64)
        rem = rem // nk
    return out


def digits_to_key(digits, seq: ParamSequences) -> int:
    j = len(digits)
    key = 0
    for k in range(1, j + 1):
        dk = int(digits[k - 1])
        if not 0 <= dk < seq.n_(k):
            raise ValueError(f"digit {dk} out of range at level {k}")
        key = key * seq.n_(k) + dk
    return key


@dataclass(frozen=True)
class StageMeasure:
    """Uniform probability measure on A_j + [0, 1/N_j]."""

    A: EndpointSet

    @property
    def j(self) -> int:
        return self.A.j

    @property
    def N(self) -> int:
        return self.A.N

    @property
    def T(self) -> int:
        return len(self.A)

    @property
    def interval_length(self) -> Fraction:
        return Fraction(1, self.N)

    @property
    def interval_mass(self) -> Fraction:
        return Fraction(1, self.T)

    def total_mass(self) -> Fraction:
        return sum((self.interval_mass for _ in range(self.T)), Fraction(0))

    def mass_of_interval(self, key: int) -> Fraction:
        return self.interval_mass if key in self.A else Fraction(0)

    def left_endpoints(self) -> np.ndarray:
        return self.A.values

    def sample_radii(self, rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.integers(0, self.T, size=size)
        return self.A.values[idx] + rng.random(size) / self.N


def build_progression(seq: ParamSequences, j: int) -> EndpointSet:
    """P_j: all digit vectors with a^(k) odd and <= 2 s_k - 1."""
    if not 0 <= j <= seq.J:
        raise ValueError(f"stage {j} outside 0..{seq.J}")
    keys = [0]
    for k in range(1, j + 1):
        odd = range(1, 2 * seq.s_(k), 2)
        keys = [p * seq.n_(k) + dgt for p in keys for dgt in odd]
    return EndpointSet(j, "P", seq.N[j], _key_array(keys))


def _parent_rng(seed: int, stage: int, parent_key: int) -> np.random.Generator:
    # stage and parent key enter the seed sequence so parents are independent
    ss = np.random.SeedSequence([int(seed) & (2**63 - 1), stage, *divmod(int(parent_key), 2**32)])
    return np.random.default_rng(ss)


def child_digits(is_p_parent: bool, s: int, t: int, n: int, rng: np.random.Generator) -> list[int]:
    if is_p_parent:
        pool = np.arange(2 * s + 1, n)
        if len(pool) < t - s:
            raise ConstructionError(f"pool of size {len(pool)} cannot supply {t - s} digits")
        extra = rng.choice(pool, size=t - s, replace=False) if t > s else []
        return sorted([*range(1, 2 * s, 2), *(int(x) for x in extra)])
    if t > n:
        raise ConstructionError(f"cannot pick {t} of {n} digits")
    return sorted(int(x) for x in rng.choice(n, size=t, replace=False))


def extend_endpoints(A_j: EndpointSet, P_j: EndpointSet, seq: ParamSequences,
                     rng_seed: int) -> EndpointSet:
    """A_{j+1} from A_j, keeping P_{j+1} inside and the even buffer around it."""
    j = A_j.j
    if j + 1 > seq.J:
        raise ValueError(f"sequences only reach stage {seq.J}")
    s, t, n = seq.s_(j + 1), seq.t_(j + 1), seq.n_(j + 1)
    p_keys = P_j.key_set()
    keys = []
    for parent in A_j.keys:
        parent = int(parent)
        rng = _parent_rng(rng_seed, j + 1, parent)
        for dgt in child_digits(parent in p_keys, s, t, n, rng):
            keys.append(parent * n + dgt)
    return EndpointSet(j + 1, "A", seq.N[j + 1], _key_array(keys), seed=rng_seed)


def build_stage(seq: ParamSequences, j: int, rng_seed: int = 0):
    """(P_j, A_j, mu_j), iterating the extension from A_0 = P_0 = {1}."""
    P, A = build_progression(seq, 0), EndpointSet(0, "A", 1, np.array([0], dtype=np.int64), seed=rng_seed)
    for k in range(j):
        A = extend_endpoints(A, P, seq, rng_seed)
        P = build_progression(seq, k + 1)
    return P, A, StageMeasure(A)


def build_all_stages(seq: ParamSequences, J: int, rng_seed: int = 0):
    """List of (P_j, A_j, mu_j) for j = 0..J sharing one realization."""
    P, A = build_progression(seq, 0), EndpointSet(0, "A", 1, np.array([0], dtype=np.int64), seed=rng_seed)
    out = [(P, A, StageMeasure(A))]
    for k in range(J):
        A = extend_endpoints(A, P, seq, rng_seed)
        P = build_progression(seq, k + 1)
        out.append((P, A, StageMeasure(A)))
    return out


def check_isolation(A_l: EndpointSet, P_l: EndpointSet, seq: ParamSequences | None = None) -> bool:
    """Every P-interval keeps a gap of at least 1/N_l to every other A-interval.

    With keys this is: neither k-1 nor k+1 belongs to A_l for any k in P_l.
    """
    a_keys = A_l.key_set()
    for k in P_l.keys:
        k = int(k)
        if k not in a_keys or (k - 1) in a_keys or (k + 1) in a_keys:
            return False
    return True


def write_endpoints(path, es: EndpointSet, config_hash: str = "") -> None:
    path = Path(path)
    lines = [f"# j={es.j} N={es.N} count={len(es)} kind={es.kind} seed={es.seed}"]
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.extend(str(int(k)) for k in es.keys)
    path.write_text("\n".join(lines) + "\n")


def read_endpoints(path) -> EndpointSet:
    header, keys = {}, []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    header[k] = v
        else:
            keys.append(int(line))
    seed = header.get("seed")
    return EndpointSet(int(header["j"]), header.get("kind", "A"), int(header["N"]), _key_array(keys),
                       seed=None if seed in (None, "None") else int(seed))
