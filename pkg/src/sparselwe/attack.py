"""Secret search: brute force over cruel bits, greedy recovery of cool bits.

Candidates for the cruel bits are enumerated in ascending Hamming weight
(colexicographic within a weight class) and scored by the variance of the
residual A s* - b mod q with all cool bits at zero. The lowest-scoring
candidates are kept in a top-k set; at fixed intervals, and whenever a weight
class completes, each kept candidate is extended over the cool bits one bit
at a time and the result is checked against the original samples. Only a
candidate passing that final check is ever returned.
"""

from __future__ import annotations

import heapq
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .instance import Secret, verify_secret
from .profile import profile_columns
from .stattest import TestConfig, min_samples, sigma_r_ratio, variance_statistic


@dataclass
class SearchConfig:
    max_weight: int
    top_k: int = 64
    eval_interval: int = 100_000
    batch_size: int = 2048
    M_bruteforce: int | None = None
    M_greedy: int | None = None
    jobs: int = 1
    sigma_e_ratio_hint: float = 0.3

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.eval_interval < self.batch_size:
            raise ValueError("eval_interval must be >= batch_size")


@dataclass
class CandidateState:
    cruel_bits: np.ndarray
    score: float

    @property
    def weight(self) -> int:
        return int(self.cruel_bits.sum())


@dataclass
class AttackReport:
    recovered: Secret | None
    candidates_scored: int
    h_u_found: int | None
    elapsed: float
    stage_timings: dict = field(default_factory=dict)
    evaluations: int = 0
    n_u: int = 0

    def to_dict(self) -> dict:
        return {
            "recovered": self.recovered.bits.tolist() if self.recovered else None,
            "candidates_scored": self.candidates_scored,
            "h_u_found": self.h_u_found,
            "elapsed": self.elapsed,
            "stage_timings": self.stage_timings,
            "evaluations": self.evaluations,
            "n_u": self.n_u,
        }


# ---------------------------------------------------------------------------
# enumeration (ascending weight, colexicographic within a weight class)

@njit(cache=True)
def _next_colex(c, n):
    """Advance a strictly increasing index tuple to its colex successor."""
    k = c.size
    for j in range(k):
        nxt = c[j + 1] if j + 1 < k else n
        if c[j] + 1 < nxt:
            c[j] += 1
            for t in range(j):
                c[t] = t
            return True
    return False


def weight_class_indices(n_u: int, w: int, batch_size: int):
    """Yield (count, index_matrix) batches of all weight-w support sets."""
    if w == 0:
        yield 1, np.empty((1, 0), dtype=np.int64)
        return
    c = np.arange(w, dtype=np.int64)
    out = np.empty((batch_size, w), dtype=np.int64)
    filled = 0
    alive = True
    while alive:
        out[filled] = c
        filled += 1
        alive = bool(_next_colex(c, n_u))
        if filled == batch_size or not alive:
            yield filled, out[:filled]
            filled = 0


def enumerate_cruel(n_u: int, max_weight: int):
    """All 0/1 patterns of length n_u up to max_weight, ascending weight."""
    if max_weight > n_u:
        raise ValueError("max_weight exceeds n_u")
    for w in range(max_weight + 1):
        for count, idx in weight_class_indices(n_u, w, 4096):
            for r in range(count):
                v = np.zeros(n_u, dtype=np.int64)
                v[idx[r]] = 1
                yield v


def _patterns_from_indices(idx: np.ndarray, n_u: int) -> np.ndarray:
    pats = np.zeros((idx.shape[0], n_u), dtype=np.float64)
    rows = np.repeat(np.arange(idx.shape[0]), idx.shape[1])
    pats[rows, idx.reshape(-1)] = 1.0
    return pats


# ---------------------------------------------------------------------------
# scoring

def score_batch(candidates: np.ndarray, A_red_cruel: np.ndarray,
                b_red: np.ndarray, q: int) -> np.ndarray:
    """Variance statistic of A s* - b mod q for each candidate column.

    Everything stays exactly representable in float64 (values are bounded by
    n_u * q/2, far below 2^53 at supported sizes), so the residuals are exact
    integers before reduction.
    """
    A = np.asarray(A_red_cruel, dtype=np.float64)
    C = np.asarray(candidates, dtype=np.float64)
    r = A @ C.T - np.asarray(b_red, dtype=np.float64)[:, None]
    r -= q * np.floor(r / q + 0.5)
    return np.mean(r * r, axis=0)


# ---------------------------------------------------------------------------
# greedy cool-bit recovery (Algorithm 1 semantics: tie keeps the zero bit)

def greedy_cool(s_star: Secret, A_red: np.ndarray, b_red: np.ndarray, q: int,
                M_greedy: int | None = None,
                cool_indices: np.ndarray | None = None,
                passes: int = 1) -> Secret:
    """Set each cool bit to whichever value gives the lower residual variance.

    ``s_star`` must have its cruel bits fixed and cool bits at zero. Cool
    indices default to the below-threshold columns of A_red; pass an explicit
    index array when the split is already known. Extra passes revisit every
    cool bit against the updated residual, which mops up marginal decisions.
    """
    bits = np.array(s_star.bits, dtype=np.int64, copy=True)
    if cool_indices is None:
        cool_indices = np.nonzero(~profile_columns(A_red, q).cruel_mask)[0]
    cool_indices = np.sort(np.asarray(cool_indices))
    M = A_red.shape[0] if M_greedy is None else min(M_greedy, A_red.shape[0])
    A = np.asarray(A_red[:M], dtype=np.float64)
    b = np.asarray(b_red[:M], dtype=np.float64)
    r = A @ bits - b
    r -= q * np.floor(r / q + 0.5)
    for _ in range(max(1, passes)):
        changed = False
        for i in cool_indices:
            r_off = r - bits[i] * A[:, i]
            r_off -= q * np.floor(r_off / q + 0.5)
            r_on = r_off + A[:, i]
            r_on -= q * np.floor(r_on / q + 0.5)
            var0 = float(np.mean(r_off * r_off))
            var1 = float(np.mean(r_on * r_on))
            new = 0 if var0 <= var1 else 1
            if new != bits[i]:
                changed = True
            bits[i] = new
            r = r_off if new == 0 else r_on
        if not changed:
            break
    return Secret(bits)


# ---------------------------------------------------------------------------
# top-k bookkeeping

class _TopK:
    """Keep the k lowest-scoring candidates (deterministic tie-breaking)."""

    def __init__(self, k: int):
        self.k = k
        self._heap: list[tuple[float, int, bytes]] = []  # max-heap via negation
        self._counter = 0

    def offer(self, score: float, pattern_bytes: bytes) -> None:
        item = (-score, self._counter, pattern_bytes)
        self._counter += 1
        if len(self._heap) < self.k:
            heapq.heappush(self._heap, item)
        elif item > self._heap[0]:
            heapq.heapreplace(self._heap, item)

    def offer_batch(self, scores: np.ndarray, patterns: np.ndarray) -> None:
        if len(self._heap) == self.k:
            cutoff = -self._heap[0][0]
            good = np.nonzero(scores < cutoff)[0]
        else:
            good = np.argsort(scores, kind="stable")
        for i in good:
            self.offer(float(scores[i]), patterns[i].astype(np.int8).tobytes())

    def entries(self) -> list[CandidateState]:
        out = [CandidateState(np.frombuffer(p, dtype=np.int8).astype(np.int64), -s)
               for s, _, p in self._heap]
        out.sort(key=lambda c: c.score)
        return out


# ---------------------------------------------------------------------------
# driver

def _default_m_bruteforce(pool_size: int, prof, h: int, q: int,
                          cfg: SearchConfig, test: TestConfig) -> int:
    sigma_u2 = q * q / 12.0
    if prof.sigma_r_measured is not None and prof.n_r > 0:
        sr2 = (prof.sigma_r_measured / prof.sigma_u) ** 2
    else:
        sr2 = 0.0
    v = (h * sr2 + cfg.sigma_e_ratio_hint**2) * sigma_u2
    try:
        M = min_samples(test.alpha, test.beta, v, q)
    except ValueError:
        M = pool_size
    return int(np.clip(M, 30, pool_size))


def run_attack(datasets, original_instance, search_config: SearchConfig,
               test_config: TestConfig | None = None,
               cruel_mask: np.ndarray | None = None) -> AttackReport:
    """Full cruel-bit search with periodic greedy completion and verification."""
    t_start = time.monotonic()
    test = test_config or TestConfig(alpha=1e-6, beta=1e-3)
    params = datasets[0].params
    q, n, h = params.q, params.n, params.h

    from .reduction import pool_datasets
    A_pool, b_pool = pool_datasets(datasets)
    mean_rho = float(np.mean([d.rho for d in datasets]))
    prof = profile_columns(A_pool, q, rho=mean_rho)
    if cruel_mask is None:
        cruel_mask = prof.cruel_mask
    cruel_idx = np.nonzero(cruel_mask)[0]
    n_u = cruel_idx.size

    cfg = search_config
    M_bf = cfg.M_bruteforce or _default_m_bruteforce(A_pool.shape[0], prof, h, q, cfg, test)
    M_bf = min(M_bf, A_pool.shape[0])
    A_cruel = np.asarray(A_pool[:M_bf, :][:, cruel_idx], dtype=np.float64)
    b_bf = np.asarray(b_pool[:M_bf], dtype=np.float64)

    A_orig = original_instance.A_circ if hasattr(original_instance, "A_circ") else original_instance.A
    b_orig = original_instance.b_circ if hasattr(original_instance, "b_circ") else original_instance.b

    max_w = min(cfg.max_weight, n_u)
    top = _TopK(cfg.top_k)
    scored = 0
    evaluations = 0
    evaluated: set[bytes] = set()
    timings = {"score": 0.0, "evaluate": 0.0}

    def evaluate() -> Secret | tuple | None:
        nonlocal evaluations
        t0 = time.monotonic()
        result = None
        for cand in top.entries():
            key = cand.cruel_bits.astype(np.int8).tobytes()
            if key in evaluated:
                continue
            evaluated.add(key)
            evaluations += 1
            bits = np.zeros(n, dtype=np.int64)
            bits[cruel_idx] = cand.cruel_bits
            full = greedy_cool(Secret(bits), A_pool, b_pool, q,
                               M_greedy=cfg.M_greedy,
                               cool_indices=np.nonzero(~cruel_mask)[0],
                               passes=2)
            if verify_secret(A_orig, b_orig, full, q, params.sigma_e):
                result = (full, cand.weight)
                break
        timings["evaluate"] += time.monotonic() - t0
        return result

    pool = ThreadPoolExecutor(max_workers=cfg.jobs) if cfg.jobs > 1 else None
    try:
        since_eval = 0
        for w in range(max_w + 1):
            batches = weight_class_indices(n_u, w, cfg.batch_size)
            while True:
                chunk = []
                for _ in range(max(1, cfg.jobs)):
                    nxt = next(batches, None)
                    if nxt is None:
                        break
                    chunk.append(nxt)
                if not chunk:
                    break
                t0 = time.monotonic()
                pats = [_patterns_from_indices(idx, n_u) for _, idx in chunk]
                if pool is not None and len(pats) > 1:
                    scores = list(pool.map(
                        lambda p: score_batch(p, A_cruel, b_bf, q), pats))
                else:
                    scores = [score_batch(p, A_cruel, b_bf, q) for p in pats]
                timings["score"] += time.monotonic() - t0
                for p, s in zip(pats, scores):
                    top.offer_batch(s, p)
                    scored += p.shape[0]
                    since_eval += p.shape[0]
                if since_eval >= cfg.eval_interval:
                    since_eval = 0
                    hit = evaluate()
                    if hit:
                        return AttackReport(hit[0], scored, hit[1],
                                            time.monotonic() - t_start, timings,
                                            evaluations, n_u)
            # weight class completed
            since_eval = 0
            hit = evaluate()
            if hit:
                return AttackReport(hit[0], scored, hit[1],
                                    time.monotonic() - t_start, timings,
                                    evaluations, n_u)
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    return AttackReport(None, scored, None, time.monotonic() - t_start,
                        timings, evaluations, n_u)
