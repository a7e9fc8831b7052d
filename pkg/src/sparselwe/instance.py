"""Generation, serialization and verification of LWE / RLWE instances.

Instances carry a sparse binary secret of Hamming weight h and rounded
Gaussian error. An instance directory holds ``instance.json`` (params, seed,
ground-truth flag) next to ``A.mat`` / ``b.mat`` in the shared matrix format;
``secret.mat`` / ``e.mat`` are written only for test fixtures.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .modmath import Rng, center, check_modulus, mat_mul_mod, read_matrix, write_matrix

# residual stdev below q/(4*sqrt(12)) counts as "nearly correct"
VERIFY_THRESHOLD_FRACTION = 0.25


@dataclass(frozen=True)
class LweParams:
    n: int
    q: int
    h: int
    sigma_e: float = 3.0
    m_total: int | None = None
    omega: int = 10

    def __post_init__(self):
        check_modulus(self.q)
        if not 0 < self.h <= self.n:
            raise ValueError(f"need 0 < h <= n, got h={self.h}, n={self.n}")
        if self.sigma_e <= 0:
            raise ValueError("sigma_e must be positive")
        if self.m_total is None:
            object.__setattr__(self, "m_total", 4 * self.n)
        if self.m_total < self.n:
            raise ValueError("need m_total >= n")

    def to_dict(self) -> dict:
        return {"n": self.n, "q": self.q, "h": self.h, "sigma_e": self.sigma_e,
                "m_total": self.m_total, "omega": self.omega}

    @classmethod
    def from_dict(cls, d: dict) -> "LweParams":
        return cls(**{k: d[k] for k in ("n", "q", "h", "sigma_e", "m_total", "omega")})


@dataclass(frozen=True)
class Secret:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.int64)
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("secret must be a 0/1 vector")
        object.__setattr__(self, "bits", bits)

    @property
    def weight(self) -> int:
        return int(self.bits.sum())


@dataclass
class LweInstance:
    params: LweParams
    A: np.ndarray
    b: np.ndarray
    secret: Secret | None = None
    e: np.ndarray | None = None
    seed: int | None = None


@dataclass
class RlweInstance:
    params: LweParams
    a_poly: np.ndarray
    A_circ: np.ndarray
    b_circ: np.ndarray
    secret: Secret | None = None
    e: np.ndarray | None = None
    seed: int | None = None


def gen_secret(n: int, h: int, rng: Rng, allow_zero: bool = False) -> Secret:
    """Uniformly random weight-h binary secret."""
    if h > n:
        raise ValueError(f"h={h} exceeds n={n}")
    if h == 0 and not allow_zero:
        raise ValueError("h must be positive (pass allow_zero=True for fixtures)")
    bits = np.zeros(n, dtype=np.int64)
    if h > 0:
        bits[rng.choice(n, size=h, replace=False)] = 1
    return Secret(bits)


def _sample_error(sigma_e: float, size: int, rng: Rng) -> np.ndarray:
    """Continuous Gaussian rounded to the nearest integer."""
    return np.rint(rng.normal(0.0, sigma_e, size=size)).astype(np.int64)


def gen_lwe(params: LweParams, secret: Secret, rng: Rng) -> LweInstance:
    """LWE samples b = A s + e mod q with uniform A and rounded Gaussian e."""
    n, q, m = params.n, params.q, params.m_total
    if secret.bits.size != n:
        raise ValueError("secret length does not match n")
    A = center(rng.integers(0, q, size=(m, n)), q)
    e = _sample_error(params.sigma_e, m, rng)
    b = center(mat_mul_mod(A, secret.bits, q) + e, q)
    return LweInstance(params, A, b, secret, e)


def skew_circulant(a_poly: np.ndarray, q: int) -> np.ndarray:
    """Matrix of multiplication by a(x) in Z_q[x]/(x^n + 1).

    Column j holds the coefficients of x^j * a(x) reduced mod x^n + 1, so
    wrap-around entries above the diagonal are negated.
    """
    a = np.asarray(a_poly, dtype=np.int64)
    n = a.size
    A = np.empty((n, n), dtype=np.int64)
    col = a.copy()
    for j in range(n):
        A[:, j] = col
        col = np.concatenate(([-col[-1]], col[:-1]))  # multiply by x: negacyclic shift
    return center(A, q)


def gen_rlwe(params: LweParams, secret: Secret, rng: Rng) -> RlweInstance:
    """RLWE sample in the 2-power cyclotomic ring Z_q[x]/(x^n + 1)."""
    n, q = params.n, params.q
    if n < 2 or n & (n - 1):
        raise ValueError(f"n must be a power of two >= 2, got {n}")
    if secret.bits.size != n:
        raise ValueError("secret length does not match n")
    a_poly = center(rng.integers(0, q, size=n), q)
    A_circ = skew_circulant(a_poly, q)
    e = _sample_error(params.sigma_e, n, rng)
    b_circ = center(mat_mul_mod(A_circ, secret.bits, q) + e, q)
    return RlweInstance(params, a_poly, A_circ, b_circ, secret, e)


def residual_stdev(A: np.ndarray, b: np.ndarray, bits: np.ndarray, q: int) -> float:
    r = center(mat_mul_mod(A, np.asarray(bits, dtype=np.int64), q) - b, q)
    return float(np.std(r.astype(np.float64)))


def verify_secret(A_orig: np.ndarray, b_orig: np.ndarray, candidate: Secret,
                  q: int, sigma_e: float) -> bool:
    """Accept a candidate iff the residual on the original samples is far
    below uniform: stdev < q/(4*sqrt(12))."""
    threshold = VERIFY_THRESHOLD_FRACTION * q / math.sqrt(12.0)
    return residual_stdev(A_orig, b_orig, candidate.bits, q) < threshold


# ---------------------------------------------------------------------------
# instance directories

def save_instance(inst: LweInstance | RlweInstance, directory, with_truth: bool = False) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    q = inst.params.q
    meta = {
        "params": inst.params.to_dict(),
        "seed": inst.seed,
        "rlwe": isinstance(inst, RlweInstance),
        "with_truth": with_truth,
    }
    if isinstance(inst, RlweInstance):
        write_matrix(directory / "a_poly.mat", inst.a_poly, q)
        write_matrix(directory / "A.mat", inst.A_circ, q)
        write_matrix(directory / "b.mat", inst.b_circ, q)
    else:
        write_matrix(directory / "A.mat", inst.A, q)
        write_matrix(directory / "b.mat", inst.b, q)
    if with_truth:
        if inst.secret is None or inst.e is None:
            raise ValueError("instance has no ground truth to save")
        write_matrix(directory / "secret.mat", inst.secret.bits, q)
        write_matrix(directory / "e.mat", inst.e, q)
    (directory / "instance.json").write_text(json.dumps(meta, indent=2))
    return directory


def load_instance(directory) -> LweInstance | RlweInstance:
    directory = Path(directory)
    meta = json.loads((directory / "instance.json").read_text())
    params = LweParams.from_dict(meta["params"])
    secret = e = None
    if meta.get("with_truth"):
        secret = Secret(read_matrix(directory / "secret.mat")[0].reshape(-1))
        e = read_matrix(directory / "e.mat")[0].reshape(-1)
    if meta.get("rlwe"):
        a_poly = read_matrix(directory / "a_poly.mat")[0].reshape(-1)
        A_circ = read_matrix(directory / "A.mat")[0]
        b_circ = read_matrix(directory / "b.mat")[0].reshape(-1)
        return RlweInstance(params, a_poly, A_circ, b_circ, secret, e, meta.get("seed"))
    A = read_matrix(directory / "A.mat")[0]
    b = read_matrix(directory / "b.mat")[0].reshape(-1)
    return LweInstance(params, A, b, secret, e, meta.get("seed"))
