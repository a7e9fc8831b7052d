"""Walkthrough: why RLWE structure makes sparse secrets cheaper to attack.

Rotating reduced RLWE samples by powers of x slides the cruel window around
the secret. The brute force then stops at the minimum window weight, which
for sparse secrets is far below the weight of any fixed window.
"""

import numpy as np

from sparselwe.instance import LweParams, gen_rlwe, gen_secret
from sparselwe.modmath import Rng, center, mat_mul_mod
from sparselwe.reduction import ReductionConfig, reduce_once
from sparselwe.rlwe import (RlweCostModel, candidate_count, estimate_costs,
                            rotate_samples, shift_vector, window_weights)

params = LweParams(n=64, q=2**12, h=6, sigma_e=1.0, m_total=64, omega=4)
rng = Rng(3)
secret = gen_secret(params.n, params.h, rng)
inst = gen_rlwe(params, secret, rng)

ds = reduce_once(inst, ReductionConfig(omega=4), Rng(4))
print(f"reduced once: rho = {ds.rho:.3f}")

# the rotation identity is exact: residual of (A_k, b_k) is -(R x^k) e
R_full = np.zeros((ds.R.shape[0], params.n), dtype=np.int64)
R_full[:, ds.row_indices] = ds.R
for k in (1, 17, 64, 100):
    A_k, b_k = rotate_samples(ds, inst.b_circ, k)
    lhs = center(mat_mul_mod(A_k, secret.bits, params.q) - b_k, params.q)
    rhs = center(-mat_mul_mod(shift_vector(R_full, k), inst.e, params.q), params.q)
    print(f"  k = {k:>3}: rotation identity exact = {np.array_equal(lhs, rhs)}")

# window weights: the fixed window vs the best one
n_u = 32
ws = window_weights(secret, n_u)
print(f"\nwindow weights over all rotations (n_u = {n_u}): {ws.h_windows.tolist()}")
print(f"fixed window weight {ws.h_windows[0]} vs best window {ws.h1_u}")
print(f"candidates: {candidate_count(n_u, int(ws.h_windows[0]))} "
      f"vs {candidate_count(n_u, ws.h1_u)}")

t_lwe, t_rlwe, ratio = estimate_costs(RlweCostModel(), 64, n_u, params.h,
                                      num_secrets=5000, seed=0)
print(f"\nexpected guess cost: LWE {t_lwe:.3g}, RLWE {t_rlwe:.3g}, "
      f"advantage ratio {ratio:.1f}")
