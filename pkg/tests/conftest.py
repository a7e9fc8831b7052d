"""Shared independent oracles for the test suite.

These deliberately avoid the library's own fast paths: matrix products are
schoolbook loops over Python ints, and lattice equality goes through a
Hermite normal form computed with exact integer arithmetic.
"""

import numpy as np
import pytest


def schoolbook_mat_mul_mod(A, B, q):
    """Exact modular matrix product over Python ints, centered in (-q/2, q/2]."""
    A = [[int(x) for x in row] for row in np.atleast_2d(A)]
    B = np.atleast_2d(B)
    if np.asarray(B).ndim == 1:
        B = B.reshape(-1, 1)
    B = [[int(x) for x in row] for row in B]
    rows, inner, cols = len(A), len(B), len(B[0])
    out = [[0] * cols for _ in range(rows)]
    half = q // 2
    for i in range(rows):
        for k in range(inner):
            a = A[i][k]
            if a == 0:
                continue
            for j in range(cols):
                out[i][j] += a * B[k][j]
    for i in range(rows):
        for j in range(cols):
            v = out[i][j] % q
            if v > half:
                v -= q
            out[i][j] = v
    return np.array(out, dtype=object)


def hnf(rows):
    """Row-style Hermite normal form of an integer matrix (exact, Python ints).

    Returns a canonical tuple of nonzero rows, so two bases generate the same
    lattice iff their HNFs compare equal.
    """
    M = [[int(x) for x in row] for row in rows]
    nrows = len(M)
    ncols = len(M[0]) if nrows else 0
    pivot_row = 0
    for col in range(ncols):
        # find a nonzero entry in this column at or below pivot_row
        nz = [i for i in range(pivot_row, nrows) if M[i][col] != 0]
        if not nz:
            continue
        # euclidean elimination within the column
        while len(nz) > 1:
            nz.sort(key=lambda i: abs(M[i][col]))
            i0 = nz[0]
            for i in nz[1:]:
                f = M[i][col] // M[i0][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[i0])]
            nz = [i for i in nz if M[i][col] != 0]
        i0 = nz[0]
        M[pivot_row], M[i0] = M[i0], M[pivot_row]
        if M[pivot_row][col] < 0:
            M[pivot_row] = [-a for a in M[pivot_row]]
        # reduce entries above the pivot into [0, pivot)
        p = M[pivot_row][col]
        for i in range(pivot_row):
            f = M[i][col] // p
            if f:
                M[i] = [a - f * b for a, b in zip(M[i], M[pivot_row])]
        pivot_row += 1
    return tuple(tuple(r) for r in M[:pivot_row] if any(r))


def same_lattice(B1, B2):
    return hnf(B1) == hnf(B2)


def poly_mul_negacyclic(a, b, q):
    """Schoolbook product of a(x) b(x) mod (x^n + 1, q), centered."""
    a = [int(x) for x in a]
    b = [int(x) for x in b]
    n = len(a)
    out = [0] * n
    for i in range(n):
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += a[i] * b[j]
            else:
                out[k - n] -= a[i] * b[j]
    half = q // 2
    res = []
    for v in out:
        v %= q
        if v > half:
            v -= q
        res.append(v)
    return np.array(res, dtype=np.int64)


@pytest.fixture
def oracle():
    class O:
        mat_mul_mod = staticmethod(schoolbook_mat_mul_mod)
        hnf = staticmethod(hnf)
        same_lattice = staticmethod(same_lattice)
        poly_mul = staticmethod(poly_mul_negacyclic)
    return O


# acceptance tests report one PASS/FAIL line each; collected here so they
# survive output capture and appear in the terminal summary
_acceptance_lines = []


@pytest.fixture
def acceptance():
    def _report(tag, ok, detail):
        line = f"[ACCEPTANCE] {tag}: {'PASS' if ok else 'FAIL'} ({detail})"
        _acceptance_lines.append(line)
        print(line, flush=True)
        assert ok, line
    return _report


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
