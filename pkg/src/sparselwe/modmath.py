"""Exact integer matrix/vector arithmetic with centered modular reduction.

All arithmetic on LWE data happens here. Entries are kept as exact integers;
the centered representative of x mod q lives in (-q/2, q/2], with q/2 mapping
to +q/2 when q is even.

Matrices travel between tools in a plain text format:
line 1 is the header ``rows cols q``, followed by ``rows`` lines of ``cols``
space-separated integers. Raw residues and centered values are both accepted
on read; files are always written centered. Vectors are 1-column matrices.
"""

from __future__ import annotations

import numpy as np

# Largest dot-product magnitude we allow through the int64 fast path.
_INT64_HEADROOM = 2**62


def check_modulus(q: int) -> int:
    q = int(q)
    if q < 3 or q > 2**41:
        raise ValueError(f"modulus must satisfy 3 <= q <= 2^41, got {q}")
    return q


def center(x, q):
    """Centered representative of x mod q, in (-q/2, q/2].

    Works elementwise on arrays. Exact for integer inputs (the int64 path is
    used when safe, otherwise Python integers).
    """
    q = check_modulus(q)
    if np.isscalar(x) or isinstance(x, (int, np.integer)):
        return _center_scalar(int(x), q)
    x = np.asarray(x)
    if x.dtype == object:
        return np.vectorize(lambda v: _center_scalar(int(v), q), otypes=[object])(x)
    r = np.mod(x, q)
    # shift everything strictly above +q/2 down by q (q/2 itself stays positive)
    return np.where(r > q // 2, r - q, r).astype(np.int64)


def _center_scalar(x: int, q: int) -> int:
    r = x % q
    return r - q if r > q // 2 else r


def mat_mul_mod(x: np.ndarray, y: np.ndarray, q: int) -> np.ndarray:
    """Exact (X @ Y) mod q, centered.

    Uses int64 with chunked accumulation (partial sums re-centered before they
    can overflow) when q is small enough, and Python big integers otherwise.
    """
    q = check_modulus(q)
    x = np.asarray(x)
    y = np.asarray(y)
    y2d = y if y.ndim == 2 else y.reshape(-1, 1)
    if x.shape[-1] != y2d.shape[0]:
        raise ValueError(f"dimension mismatch: {x.shape} @ {y2d.shape}")
    half = q // 2
    if half * half < _INT64_HEADROOM:
        xc = center(x, q)
        yc = center(y2d, q)
        # chunk the inner dimension so partial sums fit in int64
        chunk = max(1, int(_INT64_HEADROOM // (half * half or 1)))
        k = xc.shape[-1]
        acc = np.zeros((xc.shape[0], yc.shape[1]), dtype=np.int64)
        for start in range(0, k, chunk):
            acc += xc[:, start:start + chunk] @ yc[start:start + chunk]
            acc = center(acc, q)
        out = center(acc, q)
    else:
        xo = np.asarray(x, dtype=object)
        yo = np.asarray(y2d, dtype=object)
        out = center(xo @ yo, q)
    return out if y.ndim == 2 else out.reshape(-1)


def column_stdev(x: np.ndarray, q: int) -> np.ndarray:
    """Sample standard deviation (divisor m-1) of each centered column."""
    q = check_modulus(q)
    x = np.asarray(x)
    if x.ndim != 2 or x.size == 0:
        raise ValueError("need a nonempty 2-d matrix")
    if x.shape[0] < 2:
        raise ValueError("need at least 2 rows for a sample stdev")
    return np.std(center(x, q).astype(np.float64), axis=0, ddof=1)


class Rng:
    """Seeded deterministic generator (NumPy PCG64).

    Identical seeds give identical streams across runs and platforms. Child
    streams derived through :meth:`child` are independent and reproducible.
    """

    algorithm = "pcg64"

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, *indices: int) -> "Rng":
        """Independent stream for a sub-task, keyed by (seed, *indices)."""
        rng = Rng.__new__(Rng)
        rng.seed = self.seed
        rng.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([self.seed, *map(int, indices)]))
        )
        return rng

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size, dtype=np.int64)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size=size)

    def choice(self, n, size, replace=False):
        return self.gen.choice(n, size=size, replace=replace)

    def permutation(self, n):
        return self.gen.permutation(n)


def write_matrix(path, x: np.ndarray, q: int) -> None:
    """Write a matrix in the shared text format (always centered)."""
    q = check_modulus(q)
    x = np.asarray(x)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    xc = center(x, q)
    with open(path, "w") as fh:
        fh.write(f"{xc.shape[0]} {xc.shape[1]} {q}\n")
        for row in xc:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_matrix(path) -> tuple[np.ndarray, int]:
    """Read a matrix in the shared text format. Returns (centered matrix, q)."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError(f"{path}: bad header, expected 'rows cols q'")
        rows, cols, q = (int(v) for v in header)
        data = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if data.shape != (rows, cols):
        raise ValueError(f"{path}: expected {rows}x{cols}, got {data.shape}")
    return center(data, q), q
