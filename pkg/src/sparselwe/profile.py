"""Column-variance analysis of reduced matrices.

After reduction the first columns of R A keep the full uniform variance
(q/sqrt(12), the "cruel" columns) while the rest are heavily reduced (the
"cool" columns). This module computes the per-column stdev profile, the
cruel/cool split, measured and predicted cool-column stdev, and the
Gram-Schmidt log-norm profile (a different, row-wise diagnostic).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .modmath import center, column_stdev, mat_mul_mod
from .stattest import sigma_r_ratio

# columns with stdev above this fraction of q/sqrt(12) count as cruel
CRUEL_THRESHOLD_FRACTION = 0.5


@dataclass
class ColumnProfile:
    stdevs: np.ndarray
    n_u: int
    n_r: int
    sigma_u: float
    sigma_r_measured: float | None
    sigma_r_predicted: float | None
    sigma_e_ratio: float | None = None
    cruel_mask: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "stdevs": self.stdevs.tolist(),
            "n_u": self.n_u,
            "n_r": self.n_r,
            "sigma_u": self.sigma_u,
            "sigma_r_measured": self.sigma_r_measured,
            "sigma_r_predicted": self.sigma_r_predicted,
            "sigma_e_ratio": self.sigma_e_ratio,
        }


def profile_columns(A_red: np.ndarray, q: int, rho: float | None = None,
                    threshold_fraction: float = CRUEL_THRESHOLD_FRACTION) -> ColumnProfile:
    """Per-column stdevs, cruel/cool split and cool-column stdev prediction."""
    stdevs = column_stdev(A_red, q)
    sigma_u = q / math.sqrt(12.0)
    cruel = stdevs > threshold_fraction * sigma_u
    n = stdevs.size
    n_u = int(cruel.sum())
    n_r = n - n_u
    sigma_r_measured = None
    sigma_r_predicted = None
    if n_r > 0:
        # RMS over cool columns, matching the variance decomposition
        sigma_r_measured = float(np.sqrt(np.mean(stdevs[~cruel] ** 2)))
        if rho is not None and rho * rho * n >= n_u:
            sigma_r_predicted = sigma_r_ratio(rho, n, n_u) * sigma_u
    return ColumnProfile(stdevs, n_u, n_r, sigma_u, sigma_r_measured,
                         sigma_r_predicted, cruel_mask=cruel)


def profile_dataset(dataset) -> ColumnProfile:
    """Profile a ReducedDataset (or anything with A_red, rho, params)."""
    return profile_columns(dataset.A_red, dataset.params.q, rho=dataset.rho)


def check_nu_rho(prof: ColumnProfile, rho: float, n: int) -> dict:
    """Compare the cruel count against rho^2 n."""
    expected = rho * rho * n
    return {
        "n_u": prof.n_u,
        "rho_sq_n": expected,
        "gap": abs(prof.n_u - expected),
        "relative_gap": abs(prof.n_u - expected) / n,
    }


def gs_profile(basis: np.ndarray) -> np.ndarray:
    """Natural-log norms of the Gram-Schmidt vectors of the rows.

    This is the classic row-wise "z-shape" diagnostic; it is not the same
    thing as the column-stdev profile above.
    """
    B = np.asarray(basis, dtype=np.float64)
    d = B.shape[0]
    out = np.empty(d)
    bstar = np.empty_like(B)
    norms = np.empty(d)
    for i in range(d):
        v = B[i].copy()
        for j in range(i):
            if norms[j] > 0:
                v -= (B[i] @ bstar[j] / norms[j]) * bstar[j]
        bstar[i] = v
        norms[i] = v @ v
        if norms[i] <= 0:
            raise ValueError("basis rows are linearly dependent")
        out[i] = 0.5 * math.log(norms[i])
    return out


def estimate_sigma_e(dataset, true_secret) -> float:
    """Ratio of the reduced-sample residual stdev mod q to q/sqrt(12).

    Requires ground truth: the residual b_red - A_red s equals the magnified
    error R e mod q.
    """
    if true_secret is None:
        raise ValueError("ground-truth secret required")
    bits = np.asarray(true_secret.bits if hasattr(true_secret, "bits") else true_secret,
                      dtype=np.int64)
    q = dataset.params.q
    resid = center(dataset.b_red - mat_mul_mod(dataset.A_red, bits, q), q)
    return float(np.std(resid.astype(np.float64))) / (q / math.sqrt(12.0))


def write_report(prof: ColumnProfile, nu_rho: dict | None, path) -> None:
    """profile.json report next to an optional per-column CSV."""
    report = prof.to_dict()
    if nu_rho is not None:
        report["nu_rho_check"] = nu_rho
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2)


def write_stdev_csv(prof: ColumnProfile, path) -> None:
    with open(path, "w") as fh:
        fh.write("column,stdev\n")
        for j, s in enumerate(prof.stdevs):
            fh.write(f"{j},{s:.6f}\n")
