"""Penalized q-ary embedding and its reduction.

The embedding of an m x n sample matrix A is the (m+n) x (m+n) basis

    Lambda = [[0,        q I_n],
              [omega I_m,    A]]

Reducing its rows with unimodular operations and extracting R (the left block
divided by omega) yields reduced sample pairs (R A, R b) whose column variance
profile drives the rest of the attack. The built-in reducer is LLL (floating
point Gram-Schmidt, exact integer row operations) plus "polish", an integer
pairwise size-reduction pass with strictly decreasing norms. External reducers
(BKZ2.0, flatter, ...) can be plugged in through a file-exchange command.
"""

from __future__ import annotations

import math
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .instance import LweInstance, LweParams, RlweInstance
from .modmath import Rng, center, mat_mul_mod, read_matrix, write_matrix

try:
    ExceptionGroup = ExceptionGroup  # builtin on Python >= 3.11
except NameError:
    from exceptiongroup import ExceptionGroup

_FLOAT_EXACT_LIMIT = 2**53
_MAX_SWAPS = 50_000_000
_GSO_REFRESH = 4096


@dataclass
class ReductionConfig:
    omega: int = 10
    tau: float | None = None
    stall_window: int = 3
    stall_epsilon: float = 1e-3
    lll_delta: float = 0.99
    external_reducer: list[str] | None = None
    block_sizes: tuple[int, int] | None = None

    def __post_init__(self):
        if self.omega < 1:
            raise ValueError("omega must be >= 1")
        if self.tau is not None and not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if not 0.25 < self.lll_delta < 1:
            raise ValueError("lll delta must lie in (0.25, 1)")

    def to_dict(self) -> dict:
        return {
            "omega": self.omega, "tau": self.tau,
            "stall_window": self.stall_window, "stall_epsilon": self.stall_epsilon,
            "lll_delta": self.lll_delta,
            "external_reducer": self.external_reducer,
            "block_sizes": list(self.block_sizes) if self.block_sizes else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReductionConfig":
        d = dict(d)
        if d.get("block_sizes"):
            d["block_sizes"] = tuple(d["block_sizes"])
        return cls(**d)


@dataclass
class Embedding:
    Lambda: np.ndarray
    omega: int
    m: int
    n: int
    q: int


@dataclass
class ReducedDataset:
    A_red: np.ndarray
    b_red: np.ndarray
    R: np.ndarray
    rho: float
    row_indices: np.ndarray
    params: LweParams
    config: ReductionConfig

    def save(self, directory) -> Path:
        import json
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        q = self.params.q
        write_matrix(directory / "A_red.mat", self.A_red, q)
        write_matrix(directory / "b_red.mat", self.b_red, q)
        # R is an unreduced integer transformation; serialize with a huge
        # modulus so no entry wraps
        r_mod = max(2 * int(np.abs(self.R).max(initial=1)) + 3, self.params.q)
        write_matrix(directory / "R.mat", self.R, min(r_mod, 2**41))
        meta = {
            "rho": self.rho,
            "row_indices": self.row_indices.tolist(),
            "params": self.params.to_dict(),
            "config": self.config.to_dict(),
        }
        (directory / "dataset.json").write_text(json.dumps(meta, indent=2))
        return directory

    @classmethod
    def load(cls, directory) -> "ReducedDataset":
        import json
        directory = Path(directory)
        meta = json.loads((directory / "dataset.json").read_text())
        params = LweParams.from_dict(meta["params"])
        A_red, _ = read_matrix(directory / "A_red.mat")
        b_red, _ = read_matrix(directory / "b_red.mat")
        R, _ = read_matrix(directory / "R.mat")
        return cls(A_red, b_red.reshape(-1), R, meta["rho"],
                   np.asarray(meta["row_indices"], dtype=np.int64),
                   params, ReductionConfig.from_dict(meta["config"]))


def subsample(instance: LweInstance, m: int, rng: Rng):
    """m distinct rows of the instance, chosen uniformly, indices recorded."""
    m_total = instance.A.shape[0]
    if m > m_total:
        raise ValueError(f"cannot subsample {m} rows from {m_total}")
    if m == m_total:
        idx = np.arange(m_total)
    else:
        idx = np.sort(rng.choice(m_total, size=m, replace=False))
    return instance.A[idx], instance.b[idx], idx


def default_subsample_count(n: int) -> int:
    # m = round(0.875 n), banker-free rounding
    return int(math.floor(0.875 * n + 0.5))


def embed(A_sub: np.ndarray, q: int, omega: int) -> Embedding:
    """Penalized q-ary embedding [[0, q I_n], [omega I_m, A]]."""
    if omega < 1:
        raise ValueError("omega must be >= 1")
    m, n = A_sub.shape
    Lam = np.zeros((m + n, m + n), dtype=np.int64)
    Lam[:n, m:] = q * np.eye(n, dtype=np.int64)
    Lam[n:, :m] = omega * np.eye(m, dtype=np.int64)
    Lam[n:, m:] = A_sub
    return Embedding(Lam, omega, m, n, q)


# ---------------------------------------------------------------------------
# LLL

@njit(cache=True, nogil=True)
def _gso(Bf, mu, bnorm):
    d = Bf.shape[0]
    nc = Bf.shape[1]
    bstar = np.empty((d, nc), dtype=np.float64)
    for i in range(d):
        v = Bf[i].copy()
        for j in range(i):
            m_ij = 0.0
            if bnorm[j] > 0.0:
                m_ij = np.dot(Bf[i], bstar[j]) / bnorm[j]
            mu[i, j] = m_ij
            v -= m_ij * bstar[j]
        bstar[i] = v
        bnorm[i] = np.dot(v, v)
        mu[i, i] = 1.0


@njit(cache=True, nogil=True)
def _lll_loop(B, delta, max_swaps, refresh):
    """In-place LLL. Returns (-1) on dependent rows, number of swaps otherwise."""
    d = B.shape[0]
    mu = np.zeros((d, d), dtype=np.float64)
    bnorm = np.zeros(d, dtype=np.float64)
    _gso(B.astype(np.float64), mu, bnorm)
    for i in range(d):
        if bnorm[i] <= 0.0:
            return -1
    swaps = 0
    since_refresh = 0
    k = 1
    while k < d and swaps < max_swaps:
        # size-reduce row k
        for j in range(k - 1, -1, -1):
            r = np.int64(np.rint(mu[k, j]))
            if r != 0:
                for t in range(B.shape[1]):
                    B[k, t] -= r * B[j, t]
                for t in range(j):
                    mu[k, t] -= r * mu[j, t]
                mu[k, j] -= r
        if bnorm[k] >= (delta - mu[k, k - 1] * mu[k, k - 1]) * bnorm[k - 1]:
            k += 1
            continue
        # swap rows k-1 and k, update GSO incrementally
        mu_k = mu[k, k - 1]
        bk = bnorm[k] + mu_k * mu_k * bnorm[k - 1]
        if bk <= 0.0:
            return -1
        mu[k, k - 1] = mu_k * bnorm[k - 1] / bk
        bnorm[k] = bnorm[k - 1] * bnorm[k] / bk
        bnorm[k - 1] = bk
        for t in range(B.shape[1]):
            tmp = B[k - 1, t]
            B[k - 1, t] = B[k, t]
            B[k, t] = tmp
        for t in range(k - 1):
            tmpf = mu[k - 1, t]
            mu[k - 1, t] = mu[k, t]
            mu[k, t] = tmpf
        for i in range(k + 1, d):
            t1 = mu[i, k]
            mu[i, k] = mu[i, k - 1] - mu_k * t1
            mu[i, k - 1] = t1 + mu[k, k - 1] * mu[i, k]
        swaps += 1
        since_refresh += 1
        if since_refresh >= refresh:
            _gso(B.astype(np.float64), mu, bnorm)
            since_refresh = 0
        if k > 1:
            k -= 1
    return swaps


def _check_lll(B: np.ndarray, delta: float, tol: float = 1e-9) -> bool:
    d = B.shape[0]
    mu = np.zeros((d, d))
    bnorm = np.zeros(d)
    _gso(B.astype(np.float64), mu, bnorm)
    if (bnorm <= 0).any():
        raise ValueError("basis rows are linearly dependent")
    off = np.abs(np.tril(mu, -1))
    if off.max(initial=0.0) > 0.5 + tol:
        return False
    lhs = bnorm[1:]
    rhs = (delta - np.diag(mu[1:, :-1]) ** 2) * bnorm[:-1]
    return bool((lhs >= rhs * (1 - tol) - tol).all())


def lll_reduce(basis: np.ndarray, delta: float = 0.99) -> np.ndarray:
    """LLL-reduce the rows of an integer basis (same lattice out as in)."""
    if not 0.25 < delta < 1:
        raise ValueError("delta must lie in (0.25, 1)")
    B = np.array(basis, dtype=np.int64, copy=True)
    if B.ndim != 2 or B.shape[0] < 1:
        raise ValueError("basis must be a nonempty 2-d integer matrix")
    if np.abs(B).max(initial=0) >= _FLOAT_EXACT_LIMIT:
        raise OverflowError("basis entries too large for float Gram-Schmidt")
    if B.shape[0] == 1:
        if not B.any():
            raise ValueError("basis rows are linearly dependent")
        return B
    for _ in range(4):
        status = _lll_loop(B, float(delta), _MAX_SWAPS, _GSO_REFRESH)
        if status < 0:
            raise ValueError("basis rows are linearly dependent")
        if np.abs(B).max() >= _FLOAT_EXACT_LIMIT:
            raise OverflowError("entries grew beyond exact float range during LLL")
        if _check_lll(B, delta):
            return B
    return B  # float drift kept us marginally short of delta; basis is still valid


# ---------------------------------------------------------------------------
# polish

def polish(basis: np.ndarray) -> np.ndarray:
    """Iterative pairwise integer size reduction with a strict-decrease guard.

    Replaces r_i by r_i - round(<r_i,r_j>/<r_j,r_j>) r_j whenever that strictly
    shrinks ||r_i||, until a fixed point. The squared Frobenius norm never
    increases; rows that collapse to zero are left in place (skipped later).
    """
    B = np.array(basis, dtype=np.int64, copy=True)
    if B.ndim != 2 or B.size == 0:
        raise ValueError("basis must be a nonempty 2-d integer matrix")
    d, nc = B.shape
    if float(np.abs(B).max(initial=0)) ** 2 * nc >= 2**62:
        raise OverflowError("basis entries too large for int64 Gram matrix")
    G = B @ B.T
    improved = True
    while improved:
        improved = False
        for j in range(d):
            gjj = G[j, j]
            if gjj == 0:
                continue
            c = np.rint(G[:, j] / gjj).astype(np.int64)
            c[j] = 0
            decrease = c * (c * gjj - 2 * G[:, j])
            rows = np.nonzero(decrease < 0)[0]
            if rows.size == 0:
                continue
            B[rows] -= c[rows, None] * B[j]
            Gr = B[rows] @ B.T
            G[rows, :] = Gr
            G[:, rows] = Gr.T
            improved = True
    return B


# ---------------------------------------------------------------------------
# interleaved controller

def embedding_rho(basis: np.ndarray, omega: int, m: int, n: int, q: int) -> float:
    """Reduction factor of the sample block inside a (partially) reduced
    embedding: rows with a nonzero transformation part, right block mod q."""
    left = basis[:, :m]
    keep = np.abs(left).sum(axis=1) > 0
    if not keep.any():
        return 0.0
    block = center(basis[keep][:, m:], q).astype(np.float64)
    return float(np.std(block)) / (q / math.sqrt(12.0))


def rho(A_red: np.ndarray, q: int) -> float:
    """std of all centered entries over q/sqrt(12)."""
    A_red = np.asarray(A_red)
    if A_red.size == 0:
        raise ValueError("empty matrix")
    return float(np.std(center(A_red, q).astype(np.float64))) / (q / math.sqrt(12.0))


def run_external_reducer(command: list[str], basis: np.ndarray, q: int,
                         block_sizes: tuple[int, int] | None = None) -> np.ndarray:
    """Invoke an external reducer: ``cmd [--beta1 b1 --beta2 b2] IN OUT``.

    The command must write a basis of the same lattice in the shared matrix
    format. The matrix is serialized with a modulus far above the entry
    range, leaving the reducer headroom: outputs modestly larger than the
    input must not wrap, or the lattice would be silently corrupted.
    """
    peak = int(np.abs(basis).max(initial=1))
    ser_mod = min(max(8 * peak + 3, 2 * q + 3), 2**41)
    if 2 * peak >= ser_mod:
        raise OverflowError(
            "basis entries too large for the matrix exchange format")
    with tempfile.TemporaryDirectory(prefix="sparselwe-reduce-") as tmp:
        inp = Path(tmp) / "in.mat"
        out = Path(tmp) / "out.mat"
        write_matrix(inp, basis, ser_mod)
        cmd = list(command)
        if block_sizes:
            cmd += ["--beta1", str(block_sizes[0]), "--beta2", str(block_sizes[1])]
        cmd += [str(inp), str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        if proc.returncode != 0 or not out.exists():
            raise RuntimeError(
                f"external reducer failed (exit {proc.returncode}): "
                f"stdout={proc.stdout!r} stderr={proc.stderr!r}"
            )
        reduced, _ = read_matrix(out)
    if reduced.shape != basis.shape:
        raise RuntimeError("external reducer returned a basis of the wrong shape")
    return reduced


def interleaved_reduce(embedding: Embedding, config: ReductionConfig,
                       progress_sink=None) -> np.ndarray:
    """Alternate reduction phases until the target rho or a double stall.

    Built-in phases are LLL and polish (polish additionally runs after every
    phase). A phase stalls when ``stall_window`` consecutive runs improve rho
    by less than ``stall_epsilon`` on average; a stall switches phases, and
    two consecutive stalls terminate.
    """
    basis = embedding.Lambda.copy()
    omega, m, n, q = embedding.omega, embedding.m, embedding.n, embedding.q
    cur = embedding_rho(basis, omega, m, n, q)
    if progress_sink:
        progress_sink("start", cur)
    if config.tau is not None and cur <= config.tau:
        return basis

    if config.external_reducer:
        phases = ["external", "polish"]
    else:
        phases = ["lll", "polish"]
    phase_idx = 0
    consecutive_stalls = 0
    history: list[float] = []

    while True:
        phase = phases[phase_idx]
        if phase == "lll":
            basis = lll_reduce(basis, config.lll_delta)
        elif phase == "external":
            basis = run_external_reducer(config.external_reducer, basis, q,
                                         config.block_sizes)
        basis = polish(basis)
        new = embedding_rho(basis, omega, m, n, q)
        history.append(cur - new)
        cur = new
        if progress_sink:
            progress_sink(phase, cur)
        if config.tau is not None and cur <= config.tau:
            return basis
        if len(history) >= config.stall_window:
            window = history[-config.stall_window:]
            if sum(window) / len(window) < config.stall_epsilon:
                consecutive_stalls += 1
                if consecutive_stalls >= 2:
                    return basis
                phase_idx = (phase_idx + 1) % len(phases)
                history = []
    return basis


# ---------------------------------------------------------------------------
# extraction

def extract(basis_reduced: np.ndarray, omega: int, m: int, n: int,
            A_sub: np.ndarray, b_sub: np.ndarray, q: int,
            row_indices: np.ndarray | None = None,
            params: LweParams | None = None,
            config: ReductionConfig | None = None) -> ReducedDataset:
    """Pull R and the reduced sample pairs out of a reduced embedding.

    Rows whose transformation part is zero (pure q I combinations) are
    dropped. The right block of the reduced embedding must agree with
    R A_sub mod q; a mismatch means the reduction corrupted the lattice.
    """
    left = basis_reduced[:, :m]
    right = basis_reduced[:, m:]
    if (left % omega != 0).any():
        raise ValueError("left block not divisible by omega: reduction corrupted")
    R_all = left // omega
    keep = np.abs(R_all).sum(axis=1) > 0
    R = R_all[keep]
    if R.shape[0] == 0:
        raise ValueError("no rows with a nonzero transformation part")
    A_red = mat_mul_mod(R, A_sub, q)
    if (A_red != center(right[keep], q)).any():
        raise ValueError("extraction mismatch: R A_sub != reduced right block mod q")
    b_red = mat_mul_mod(R, b_sub, q)
    if row_indices is None:
        row_indices = np.arange(A_sub.shape[0])
    if params is None:
        params = LweParams(n=n, q=q, h=1, m_total=max(A_sub.shape[0], n))
    if config is None:
        config = ReductionConfig(omega=omega)
    return ReducedDataset(A_red, b_red, R, rho(A_red, q), np.asarray(row_indices),
                          params, config)


# ---------------------------------------------------------------------------
# factory

def reduce_once(instance: LweInstance | RlweInstance, config: ReductionConfig,
                rng: Rng, m: int | None = None) -> ReducedDataset:
    """One subsample -> embed -> reduce -> extract pipeline."""
    params = instance.params
    if isinstance(instance, RlweInstance):
        source = LweInstance(params, instance.A_circ, instance.b_circ,
                             instance.secret, instance.e)
        m_total = params.n
    else:
        source = instance
        m_total = source.A.shape[0]
    if m is None:
        m = min(default_subsample_count(params.n), m_total)
    A_sub, b_sub, idx = subsample(source, m, rng)
    emb = embed(A_sub, params.q, config.omega)
    reduced = interleaved_reduce(emb, config)
    return extract(reduced, config.omega, m, params.n, A_sub, b_sub, params.q,
                   row_indices=idx, params=params, config=config)


def dataset_factory(instance: LweInstance | RlweInstance, config: ReductionConfig,
                    count: int, parallelism: int = 1, seed: int = 0,
                    m: int | None = None) -> list[ReducedDataset]:
    """``count`` independent reduction pipelines, deterministic per (seed, i)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    root = Rng(seed)

    def job(i: int) -> ReducedDataset:
        return reduce_once(instance, config, root.child(i), m=m)

    if parallelism <= 1:
        results = []
        errors = []
        for i in range(count):
            try:
                results.append(job(i))
            except Exception as exc:  # keep siblings running
                errors.append((i, exc))
    else:
        results = []
        errors = []
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = {pool.submit(job, i): i for i in range(count)}
            done = [(i, f) for f, i in futures.items()]
            done.sort()
            for i, f in done:
                try:
                    results.append(f.result())
                except Exception as exc:
                    errors.append((i, exc))
    if errors:
        raise ExceptionGroup(
            f"{len(errors)}/{count} reduction pipelines failed",
            [e for _, e in errors],
        )
    return results


def pool_datasets(datasets: list[ReducedDataset]):
    """Concatenate reduced samples from several datasets into one pool."""
    A = np.concatenate([d.A_red for d in datasets], axis=0)
    b = np.concatenate([d.b_red for d in datasets], axis=0)
    return A, b
