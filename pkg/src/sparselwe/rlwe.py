"""Rotation tricks for 2-power cyclotomic RLWE.

In Z_q[x]/(x^n + 1) multiplication by x is the negacyclic shift X with
X^n = -I. Because the skew-circulant sample matrix commutes with X, reduced
samples can be rotated k times without redoing any lattice reduction:
(A X^k, (R X^k) b_circ) is a valid LWE pair for the same secret. Sliding the
cruel window around the secret this way lets the brute force stop at the
minimum window weight instead of the weight of one fixed window.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import hypergeom

from .attack import (AttackReport, SearchConfig, _TopK, greedy_cool,
                     score_batch, weight_class_indices, _patterns_from_indices)
from .instance import RlweInstance, Secret, verify_secret
from .modmath import Rng, center, mat_mul_mod
from .profile import profile_columns
from .stattest import TestConfig


def shift_vector(v: np.ndarray, k: int) -> np.ndarray:
    """Coefficients of x^k * v(x) mod x^n + 1.

    One step maps (v0, ..., v_{n-1}) to (-v_{n-1}, v0, ..., v_{n-2});
    k steps compose, with period 2n (x^n = -1).
    """
    v = np.asarray(v)
    n = v.shape[-1]
    k = int(k) % (2 * n)
    sign = 1
    if k >= n:
        sign = -1
        k -= n
    if k == 0:
        return sign * v
    out = np.roll(v, k, axis=-1)
    out[..., :k] = -out[..., :k]
    return sign * out


def shift_matrix(n: int) -> np.ndarray:
    """The negacyclic shift operator X acting by right-multiplication:
    (v X)_j = (shift_vector(v, 1))_j."""
    X = np.zeros((n, n), dtype=np.int64)
    for i in range(n - 1):
        X[i, i + 1] = 1
    X[n - 1, 0] = -1
    return X


def rotate_samples(dataset, b_circ: np.ndarray, k: int):
    """Rotated LWE pair (A_k, b_k) for the same secret.

    A_k shifts every reduced sample row by k; b_k applies the shifted
    transformation rows to the original circulant b. The pair satisfies
    b_k = A_k s + (R X^k) e mod q.
    """
    if dataset.R is None:
        raise ValueError("dataset has no stored transformation matrix R")
    q = dataset.params.q
    n = dataset.params.n
    A_k = center(shift_vector(dataset.A_red, k), q)
    # scatter R columns back onto the circulant rows they came from
    R_full = np.zeros((dataset.R.shape[0], n), dtype=np.int64)
    R_full[:, np.asarray(dataset.row_indices)] = dataset.R
    R_shift = shift_vector(R_full, k)
    b_k = mat_mul_mod(R_shift, np.asarray(b_circ, dtype=np.int64), q)
    return A_k, b_k


@dataclass
class WindowStats:
    h_windows: np.ndarray
    h1_u: int


def window_weights(secret: Secret, n_u: int) -> WindowStats:
    """Hamming weight of every cyclic length-n_u window of the secret."""
    bits = secret.bits
    n = bits.size
    if n_u > n:
        raise ValueError("window length exceeds n")
    doubled = np.concatenate([bits, bits])
    csum = np.concatenate([[0], np.cumsum(doubled)])
    h = np.array([csum[i + n_u] - csum[i] for i in range(n)], dtype=np.int64)
    return WindowStats(h, int(h.min()))


# ---------------------------------------------------------------------------
# multi-window brute force

def run_rlwe_attack(datasets, rlwe_instance: RlweInstance,
                    search_config: SearchConfig, stride: int = 1,
                    test_config: TestConfig | None = None) -> AttackReport:
    """Brute force over n/stride rotated cruel windows in weight lockstep.

    All windows enumerate weight-w patterns before any window moves to
    weight w+1, so the search terminates at the minimum window weight (up to
    stride granularity). The success gate is a residual check against the
    original circulant samples.
    """
    t_start = time.monotonic()
    test = test_config or TestConfig(alpha=1e-6, beta=1e-3)
    params = datasets[0].params
    q, n, h = params.q, params.n, params.h
    cfg = search_config

    from .reduction import pool_datasets
    A_pool, b_pool = pool_datasets(datasets)
    mean_rho = float(np.mean([d.rho for d in datasets]))
    base_prof = profile_columns(A_pool, q, rho=mean_rho)
    base_mask = base_prof.cruel_mask
    n_u = int(base_mask.sum())

    b_circ = rlwe_instance.b_circ
    windows = list(range(0, n, max(1, stride)))
    pools = {}
    for k in windows:
        A_k = np.concatenate([rotate_samples(d, b_circ, k)[0] for d in datasets])
        b_k = np.concatenate([rotate_samples(d, b_circ, k)[1] for d in datasets])
        mask_k = np.roll(base_mask, k)
        pools[k] = (A_k, b_k, np.nonzero(mask_k)[0], np.nonzero(~mask_k)[0])

    from .attack import _default_m_bruteforce
    M_bf = cfg.M_bruteforce or _default_m_bruteforce(A_pool.shape[0], base_prof,
                                                     h, q, cfg, test)
    M_bf = min(M_bf, A_pool.shape[0])

    max_w = min(cfg.max_weight, n_u)
    tops = {k: _TopK(cfg.top_k) for k in windows}
    scored = 0
    evaluations = 0
    evaluated: set[tuple] = set()
    timings = {"score": 0.0, "evaluate": 0.0}

    def evaluate() -> tuple | None:
        nonlocal evaluations
        t0 = time.monotonic()
        hit = None
        for k in windows:
            A_k, b_k, cruel_idx, cool_idx = pools[k]
            for cand in tops[k].entries():
                key = (k, cand.cruel_bits.astype(np.int8).tobytes())
                if key in evaluated:
                    continue
                evaluated.add(key)
                evaluations += 1
                bits = np.zeros(n, dtype=np.int64)
                bits[cruel_idx] = cand.cruel_bits
                full = greedy_cool(Secret(bits), A_k, b_k, q,
                                   M_greedy=cfg.M_greedy, cool_indices=cool_idx,
                                   passes=2)
                if verify_secret(rlwe_instance.A_circ, b_circ, full, q,
                                 params.sigma_e):
                    hit = (full, cand.weight)
                    break
            if hit:
                break
        timings["evaluate"] += time.monotonic() - t0
        return hit

    since_eval = 0
    for w in range(max_w + 1):
        for k in windows:
            A_k, b_k, cruel_idx, _ = pools[k]
            A_cruel = np.asarray(A_k[:M_bf, :][:, cruel_idx], dtype=np.float64)
            b_bf = np.asarray(b_k[:M_bf], dtype=np.float64)
            for count, idx in weight_class_indices(n_u, w, cfg.batch_size):
                t0 = time.monotonic()
                pats = _patterns_from_indices(idx, n_u)
                scores = score_batch(pats, A_cruel, b_bf, q)
                timings["score"] += time.monotonic() - t0
                tops[k].offer_batch(scores, pats)
                scored += count
                since_eval += count
                if since_eval >= cfg.eval_interval:
                    since_eval = 0
                    hit = evaluate()
                    if hit:
                        return AttackReport(hit[0], scored, hit[1],
                                            time.monotonic() - t_start,
                                            timings, evaluations, n_u)
        since_eval = 0
        hit = evaluate()
        if hit:
            return AttackReport(hit[0], scored, hit[1],
                                time.monotonic() - t_start, timings,
                                evaluations, n_u)
    return AttackReport(None, scored, None, time.monotonic() - t_start,
                        timings, evaluations, n_u)


# ---------------------------------------------------------------------------
# cost estimators

@dataclass
class RlweCostModel:
    c: float = 1.0
    M: float = 1.0


def candidate_count(n_u: int, w: int) -> int:
    """Cumulative ascending-weight enumeration size sum_{k<=w} C(n_u, k)."""
    return sum(math.comb(n_u, k) for k in range(w + 1))


def estimate_costs(model: RlweCostModel, n: int, n_u: int, h: int,
                   num_secrets: int = 10_000, seed: int = 0) -> tuple[float, float, float]:
    """Expected guess costs T_lwe, T_rlwe and their ratio T_lwe / T_rlwe.

    The fixed-window weight h_u follows the hypergeometric law; the minimum
    window weight distribution is estimated over num_secrets random secrets.
    """
    if num_secrets < 1:
        raise ValueError("num_secrets must be >= 1")
    cM = model.c * model.M
    hyper = hypergeom(n, h, n_u)
    # P(h_u >= k) for k = 0..h
    p_ge = np.array([hyper.sf(k - 1) for k in range(h + 1)])
    t_lwe = cM * sum(math.comb(n_u, k) * p_ge[k] for k in range(h + 1))

    rng = Rng(seed)
    cap = (h * n_u) // n
    h1_samples = np.empty(num_secrets, dtype=np.int64)
    for i in range(num_secrets):
        bits = np.zeros(n, dtype=np.int64)
        bits[rng.choice(n, size=h, replace=False)] = 1
        h1_samples[i] = window_weights(Secret(bits), n_u).h1_u
    p1_ge = np.array([(h1_samples >= k).mean() for k in range(cap + 1)])
    t_rlwe = n * cM * sum(math.comb(n_u, k) * p1_ge[k] for k in range(cap + 1))
    return float(t_lwe), float(t_rlwe), float(t_lwe / t_rlwe)


def fit_time_model(counts: np.ndarray, times: np.ndarray) -> tuple[float, float]:
    """Least-squares fit time = b + a * cumulative candidate count."""
    A = np.vstack([np.asarray(counts, dtype=np.float64),
                   np.ones(len(counts))]).T
    (a, b), *_ = np.linalg.lstsq(A, np.asarray(times, dtype=np.float64), rcond=None)
    return float(a), float(b)
