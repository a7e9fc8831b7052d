"""Walkthrough: the statistics behind the distinguisher, no lattices needed.

Shows the wrapped-Gaussian variance F_q(v) saturating toward the uniform
variance, the sample-count formula M(alpha, beta), and the predicted
cool-column stdev sigma_r as reduction quality varies.
"""

import math

from sparselwe.stattest import (estimate_min_samples, f_q, min_samples,
                                sigma_r_ratio, uniform_moments)

q = 2**12
s2u, _ = uniform_moments(q)
print(f"q = {q}, uniform variance q^2/12 = {s2u:.4g}")
print("\nF_q(v) saturates as the Gaussian wraps:")
for frac in (0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 4.0):
    v = frac * q * q
    print(f"  v = {frac:>5} q^2  ->  F_q(v)/ (q^2/12) = {f_q(v, q) / s2u:.4f}")

print("\nSamples needed vs signal strength (alpha = beta = 1e-3):")
for ratio in (0.1, 0.2, 0.3, 0.4, 0.5):
    v = (ratio * q) ** 2
    print(f"  residual stdev {ratio} q  ->  M = {min_samples(1e-3, 1e-3, v, q)}")

print("\nsigma_r predicted from the reduction factor (n = 256):")
for rho in (0.45, 0.55, 0.65, 0.75):
    n_u = math.floor(rho * rho * 256)
    r = sigma_r_ratio(rho, 256, n_u)
    print(f"  rho = {rho}: n_u ~ {n_u}, sigma_r = {r:.3f} sigma_u")

print("\nfull-configuration estimate (extreme-tail alpha = 2^-128):")
m_worst = estimate_min_samples(256, 2**12, 143, 12, 0.952, 2.0**-128, 1e-5,
                               rho=0.769, worst_case=True)
m_avg = estimate_min_samples(256, 2**12, 143, 12, 0.952, 2.0**-128, 1e-5,
                             rho=0.769, worst_case=False)
print(f"  n=256: worst case M = {m_worst}, average case M = {m_avg}")
