import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparselwe.instance import LweParams, gen_lwe, gen_rlwe, gen_secret
from sparselwe.modmath import Rng, center, mat_mul_mod
from sparselwe.reduction import (Embedding, ExceptionGroup, ReductionConfig,
                                 ReducedDataset,
                                 dataset_factory, default_subsample_count,
                                 embed, embedding_rho, extract,
                                 interleaved_reduce, lll_reduce, polish,
                                 pool_datasets, reduce_once, rho,
                                 run_external_reducer, subsample)


def small_basis(seed, d=8, span=40):
    rng = Rng(seed)
    while True:
        B = rng.integers(-span, span + 1, size=(d, d))
        if abs(np.linalg.det(B.astype(float))) > 0.5:
            return B


class TestEmbedding:
    def test_block_layout(self):
        A = np.arange(12, dtype=np.int64).reshape(3, 4)
        emb = embed(A, q=17, omega=5)
        L = emb.Lambda
        assert L.shape == (7, 7)
        assert np.array_equal(L[:4, 3:], 17 * np.eye(4, dtype=np.int64))
        assert np.array_equal(L[4:, :3], 5 * np.eye(3, dtype=np.int64))
        assert np.array_equal(L[4:, 3:], A)
        assert not L[:4, :3].any()

    def test_subsample_distinct_sorted(self):
        params = LweParams(n=16, q=2**12, h=2, m_total=64)
        rng = Rng(20)
        inst = gen_lwe(params, gen_secret(16, 2, rng), rng)
        A_sub, b_sub, idx = subsample(inst, 14, rng)
        assert len(set(idx.tolist())) == 14
        assert np.array_equal(idx, np.sort(idx))
        assert np.array_equal(A_sub, inst.A[idx])
        with pytest.raises(ValueError):
            subsample(inst, 65, rng)

    def test_default_subsample_count(self):
        assert default_subsample_count(64) == 56
        assert default_subsample_count(256) == 224


class TestLll:
    def test_preserves_lattice(self, oracle):
        for seed in range(10):
            B = small_basis(seed)
            R = lll_reduce(B)
            assert oracle.same_lattice(B, R)

    def test_reduces_norms(self):
        B = small_basis(3, d=10, span=200)
        R = lll_reduce(B)
        assert np.linalg.norm(R.astype(float)) <= np.linalg.norm(B.astype(float))

    def test_lovasz_and_size_reduction_hold(self):
        from sparselwe.reduction import _check_lll
        for seed in range(5):
            R = lll_reduce(small_basis(seed + 50, d=12, span=100), delta=0.99)
            assert _check_lll(R, 0.99)

    def test_dependent_rows_rejected(self):
        B = np.array([[1, 2], [2, 4]], dtype=np.int64)
        with pytest.raises(ValueError, match="dependent"):
            lll_reduce(B)

    def test_entry_size_guard(self):
        B = np.eye(2, dtype=np.int64) * 2**53
        with pytest.raises(OverflowError):
            lll_reduce(B)

    def test_delta_validation(self):
        with pytest.raises(ValueError):
            lll_reduce(np.eye(2, dtype=np.int64), delta=1.0)


class TestPolish:
    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_frobenius_never_increases(self, seed):
        rng = Rng(seed)
        B = rng.integers(-100, 101, size=(8, 8))
        P = polish(B)
        assert np.linalg.norm(P.astype(float)) <= np.linalg.norm(B.astype(float)) + 1e-9

    def test_preserves_lattice(self, oracle):
        for seed in range(10):
            B = small_basis(seed + 100)
            assert oracle.same_lattice(B, polish(B))

    def test_fixed_point(self):
        B = small_basis(7)
        P = polish(B)
        assert np.array_equal(polish(P), P)

    def test_strict_decrease_guard(self):
        # a basis already pairwise-reduced must come back unchanged
        B = np.array([[5, 0, 0], [0, 7, 0], [0, 0, 3]], dtype=np.int64)
        assert np.array_equal(polish(B), B)


class TestRho:
    def test_uniform_matrix_near_one(self):
        q = 2**12
        rng = Rng(30)
        A = center(rng.integers(0, q, size=(400, 50)), q)
        assert rho(A, q) == pytest.approx(1.0, abs=0.05)

    def test_scales_down_with_entries(self):
        q = 2**12
        rng = Rng(31)
        A = np.rint(rng.normal(0, q / 40, size=(400, 50))).astype(np.int64)
        assert rho(A, q) < 0.2

    def test_embedding_rho_ignores_pure_q_rows(self):
        A = np.arange(6, dtype=np.int64).reshape(2, 3)
        emb = embed(A, q=101, omega=3)
        # rows 0..2 are pure q-identity rows; only the two sample rows count
        r = embedding_rho(emb.Lambda, 3, 2, 3, 101)
        expected = float(np.std(center(A, 101).astype(float))) / (101 / math.sqrt(12))
        assert r == pytest.approx(expected)


class TestExtract:
    def test_identity_reduction_roundtrip(self):
        params = LweParams(n=12, q=2**12, h=2, m_total=48)
        rng = Rng(33)
        s = gen_secret(12, 2, rng)
        inst = gen_lwe(params, s, rng)
        A_sub, b_sub, idx = subsample(inst, 10, rng)
        emb = embed(A_sub, params.q, 4)
        ds = extract(emb.Lambda, 4, 10, 12, A_sub, b_sub, params.q,
                     row_indices=idx, params=params)
        # unreduced embedding: R rows are unit vectors, A_red == A_sub mod q
        assert np.array_equal(np.abs(ds.R).sum(axis=1), np.ones(10))
        assert np.array_equal(ds.A_red, center(A_sub, params.q))

    def test_reduced_pairs_consistent(self):
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=64)
        rng = Rng(34)
        s = gen_secret(16, 2, rng)
        inst = gen_lwe(params, s, rng)
        ds = reduce_once(inst, ReductionConfig(omega=4), rng)
        q = params.q
        assert np.array_equal(ds.A_red, mat_mul_mod(ds.R, inst.A[ds.row_indices], q))
        assert np.array_equal(ds.b_red, mat_mul_mod(ds.R, inst.b[ds.row_indices], q))
        # residual equals the magnified error R e
        resid = center(ds.b_red - mat_mul_mod(ds.A_red, s.bits, q), q)
        assert np.array_equal(resid, center(ds.R @ inst.e[ds.row_indices], q))

    def test_corrupted_left_block_detected(self):
        A = np.arange(6, dtype=np.int64).reshape(2, 3)
        emb = embed(A, q=101, omega=4)
        bad = emb.Lambda.copy()
        bad[4, 0] = 3  # not divisible by omega
        with pytest.raises(ValueError, match="omega"):
            extract(bad, 4, 2, 3, A, np.zeros(2, dtype=np.int64), 101)


class TestInterleavedController:
    def test_reduction_lowers_rho(self):
        params = LweParams(n=32, q=2**12, h=3, sigma_e=1.0, m_total=128)
        rng = Rng(36)
        inst = gen_lwe(params, gen_secret(32, 3, rng), rng)
        ds = reduce_once(inst, ReductionConfig(omega=4), rng)
        assert ds.rho < 0.5

    def test_tau_early_termination(self):
        # small-entry samples start far below tau, so no phase ever runs
        q = 101
        rng = Rng(37)
        A_sub = np.rint(rng.normal(0, 3, size=(10, 12))).astype(np.int64)
        emb = embed(A_sub, q, 4)
        events = []
        out = interleaved_reduce(emb, ReductionConfig(omega=4, tau=0.9),
                                 progress_sink=lambda ph, r: events.append(ph))
        assert events == ["start"]  # tau satisfied before any phase
        assert np.array_equal(out, emb.Lambda)

    def test_progress_and_stall_terminates(self):
        params = LweParams(n=24, q=2**12, h=2, sigma_e=1.0, m_total=96)
        rng = Rng(38)
        inst = gen_lwe(params, gen_secret(24, 2, rng), rng)
        A_sub, b_sub, idx = subsample(inst, 21, rng)
        emb = embed(A_sub, params.q, 4)
        rhos = []
        interleaved_reduce(emb, ReductionConfig(omega=4),
                           progress_sink=lambda ph, r: rhos.append(r))
        assert len(rhos) >= 2
        assert rhos[-1] <= rhos[0]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ReductionConfig(omega=0)
        with pytest.raises(ValueError):
            ReductionConfig(tau=1.5)
        with pytest.raises(ValueError):
            ReductionConfig(lll_delta=0.2)


class TestExternalReducer:
    def test_file_exchange_roundtrip(self, tmp_path):
        # a do-nothing reducer written as a tiny script: copies input to output
        script = tmp_path / "copy_reducer.py"
        script.write_text(
            "import sys, shutil\n"
            "args = [a for a in sys.argv[1:] if not a.startswith('--beta')]\n"
            "args = [a for a in args if not a.isdigit()]\n"
            "shutil.copy(args[0], args[1])\n")
        B = small_basis(40)
        out = run_external_reducer([sys.executable, str(script)], B, 101,
                                   block_sizes=(10, 12))
        assert np.array_equal(out, B)

    def test_failure_surfaces_output(self, tmp_path):
        script = tmp_path / "bad_reducer.py"
        script.write_text("import sys; print('boom'); sys.exit(3)\n")
        with pytest.raises(RuntimeError, match="boom"):
            run_external_reducer([sys.executable, str(script)],
                                 np.eye(3, dtype=np.int64), 101)

    def test_used_in_pipeline(self, tmp_path):
        # an external LLL: shells back into this library, exercising the
        # file-exchange protocol end to end
        script = tmp_path / "lll_reducer.py"
        script.write_text(
            "import sys\n"
            "from sparselwe.modmath import read_matrix, write_matrix\n"
            "from sparselwe.reduction import lll_reduce\n"
            "args = sys.argv[1:]\n"
            "if args[0] == '--beta1': args = args[4:]\n"
            "B, q = read_matrix(args[0])\n"
            "write_matrix(args[1], lll_reduce(B), q)\n")
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=64)
        rng = Rng(41)
        inst = gen_lwe(params, gen_secret(16, 2, rng), rng)
        cfg = ReductionConfig(omega=4,
                              external_reducer=[sys.executable, str(script)],
                              block_sizes=(18, 22))
        ds = reduce_once(inst, cfg, rng)
        assert ds.rho < 0.6


class TestFactory:
    def test_deterministic_and_independent(self):
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=64)
        rng = Rng(42)
        inst = gen_lwe(params, gen_secret(16, 2, rng), rng)
        cfg = ReductionConfig(omega=4)
        a = dataset_factory(inst, cfg, 3, seed=9)
        b = dataset_factory(inst, cfg, 3, seed=9)
        for x, y in zip(a, b):
            assert np.array_equal(x.A_red, y.A_red)
            assert np.array_equal(x.row_indices, y.row_indices)
        assert not np.array_equal(a[0].row_indices, a[1].row_indices)

    def test_parallel_matches_serial(self):
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=64)
        rng = Rng(43)
        inst = gen_lwe(params, gen_secret(16, 2, rng), rng)
        cfg = ReductionConfig(omega=4)
        serial = dataset_factory(inst, cfg, 4, parallelism=1, seed=5)
        parallel = dataset_factory(inst, cfg, 4, parallelism=3, seed=5)
        for x, y in zip(serial, parallel):
            assert np.array_equal(x.A_red, y.A_red)
            assert np.array_equal(x.b_red, y.b_red)

    def test_sibling_failures_grouped(self):
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=64)
        rng = Rng(44)
        inst = gen_lwe(params, gen_secret(16, 2, rng), rng)
        cfg = ReductionConfig(omega=4,
                              external_reducer=["/nonexistent-reducer"])
        with pytest.raises(ExceptionGroup) as exc_info:
            dataset_factory(inst, cfg, 3, seed=5)
        assert len(exc_info.value.exceptions) == 3

    def test_pooling(self):
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=64)
        rng = Rng(45)
        inst = gen_lwe(params, gen_secret(16, 2, rng), rng)
        dss = dataset_factory(inst, ReductionConfig(omega=4), 3, seed=2)
        A, b = pool_datasets(dss)
        assert A.shape[0] == sum(d.A_red.shape[0] for d in dss)
        assert b.size == A.shape[0]


class TestDatasetSerialization:
    def test_roundtrip(self, tmp_path):
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=64)
        rng = Rng(46)
        inst = gen_lwe(params, gen_secret(16, 2, rng), rng)
        ds = reduce_once(inst, ReductionConfig(omega=4), rng)
        ds.save(tmp_path / "d")
        back = ReducedDataset.load(tmp_path / "d")
        assert np.array_equal(back.A_red, ds.A_red)
        assert np.array_equal(back.b_red, ds.b_red)
        assert np.array_equal(back.R, ds.R)
        assert np.array_equal(back.row_indices, ds.row_indices)
        assert back.rho == ds.rho
        assert back.params == ds.params

    def test_rlwe_reduction_uses_circulant_rows(self):
        params = LweParams(n=16, q=2**12, h=2, sigma_e=1.0, m_total=16)
        rng = Rng(47)
        s = gen_secret(16, 2, rng)
        inst = gen_rlwe(params, s, rng)
        ds = reduce_once(inst, ReductionConfig(omega=4), rng)
        q = params.q
        assert np.array_equal(
            ds.A_red, mat_mul_mod(ds.R, inst.A_circ[ds.row_indices], q))
