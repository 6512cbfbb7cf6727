import numpy as np
import pytest

import siacoop as sc
from siacoop.precoding import condition_slots

from conftest import run_pipeline


@pytest.fixture(scope="module")
def small_gf_pipeline():
    ring = sc.ScalarRing.prime_field()
    return run_pipeline(3, 1, 1, ring, seed=12)


class TestConditionSlots:

    @pytest.mark.parametrize("K,M", [(3, 1), (4, 2), (5, 3)])
    def test_one_slot_per_generator(self, K, M):
        for j in range(1, M + 1):
            slots = condition_slots(K, M, j)
            assert len(slots) == K * (2 * M - 1)
            # per user: M residual-alignment generators, M-1 cross-stream
            for k in range(1, K + 1):
                mine = [s for s in slots if s.k == k]
                assert len(mine) == 2 * M - 1
                assert sum(1 for s in mine if s.kind == "t_res") == M
                assert all(s.idx != j for s in mine if s.kind == "g")

    def test_slots_are_k_major_and_deterministic(self):
        slots = condition_slots(4, 2, 1)
        assert [s.k for s in slots] == sorted(s.k for s in slots)
        assert slots == condition_slots(4, 2, 1)


class TestGeneratorExtraction:

    def test_generators_are_the_processed_coefficients(
            self, small_gf_pipeline):
        params, _, processed, generators, _ = small_gf_pipeline
        for k in range(1, params.K + 1):
            st = processed[k]
            assert generators.T(k) is st.Tk
            for r in range(1, params.M + 1):
                assert generators.G(k, r) is st.g[r - 1]
                assert generators.T_res(k, r) is st.r[r - 1]

    def test_degenerate_common_coefficient_rejected(self, gf):
        params = sc.build_params(3, 1, 1)
        channels = sc.sample_channels(params, gf, seed=0)
        processed = {k: sc.sia_run(sc.stack_decoder(channels, k))
                     for k in range(1, 4)}
        bad = processed[1]
        bad.Tk = sc.DiagonalOperator(gf, gf.zeros(params.lambda_n))
        with pytest.raises(sc.DegenerateChannelError):
            sc.extract_generators(processed)


class TestEnumeration:

    def test_counts_and_lexicographic_order(self):
        params = sc.build_params(3, 1, 2)
        lo = list(sc.enumerate_indices(params, 1, 2))
        hi = list(sc.enumerate_indices(params, 1, 3))
        assert len(lo) == params.mu_n == 8
        assert len(hi) == params.mu_n1 == 27
        assert lo[0].exps == (0, 0, 0)
        assert lo[-1].exps == (1, 1, 1)
        exps = [i.exps for i in hi]
        assert exps == sorted(exps)

    def test_enumeration_bound_enforced(self):
        params = sc.build_params(3, 1, 3)
        with pytest.raises(sc.ResourceBoundError):
            list(sc.enumerate_indices(params, 1, 4, bound=10))

    def test_invalid_level_rejected(self):
        params = sc.build_params(3, 1, 1)
        with pytest.raises(ValueError):
            list(sc.enumerate_indices(params, 1, 3))


class TestBasisConstruction:

    def test_shapes_and_index_map(self, small_gf_pipeline):
        params, _, _, generators, bases = small_gf_pipeline
        b = bases[1][params.n + 1]
        assert b.columns.shape == (params.mu_n1, params.lambda_n)
        assert [b.position[i.exps] for i in b.indices] == list(
            range(b.ncols))

    def test_column_is_generator_product_times_homogenizer(
            self, small_gf_pipeline):
        params, _, _, generators, bases = small_gf_pipeline
        ring = generators.ring
        b = bases[1][params.n]
        for c, idx in enumerate(b.indices):
            expect = ring.ones(params.lambda_n)
            degree = {k: 0 for k in range(1, params.K + 1)}
            for slot, e in zip(b.slots, idx.exps):
                expect = ring.mul(expect,
                                  ring.pow(generators.for_slot(slot).entries,
                                           e))
                degree[slot.k] += e
            for k, d in degree.items():
                expect = ring.mul(expect,
                                  ring.pow(generators.T(k).entries,
                                           params.P - d))
            assert np.array_equal(b.columns[c], expect)

    def test_basis_is_deterministic(self, small_gf_pipeline):
        params, _, _, generators, _ = small_gf_pipeline
        a = sc.build_basis(generators, params, 1, params.n)
        b = sc.build_basis(generators, params, 1, params.n)
        assert np.array_equal(a.columns, b.columns)

    def test_float_basis_builds(self, real):
        params, _, _, _, bases = run_pipeline(3, 1, 1, real, seed=12)
        b = bases[1][1]
        assert b.columns.dtype == np.float64
        assert np.all(np.isfinite(b.columns))


class TestAlignment:

    def test_all_conditions_hold_exactly(self, small_gf_pipeline):
        params, _, _, generators, bases = small_gf_pipeline
        report = sc.check_alignment(bases, generators, params)
        assert report.all_pass
        assert len(report.conditions) == params.M * params.K * (
            2 * params.M - 1)

    def test_witness_is_the_slot_increment(self, small_gf_pipeline):
        params, _, _, generators, bases = small_gf_pipeline
        ring = generators.ring
        lo, hi = bases[1][params.n], bases[1][params.n + 1]
        for s, slot in enumerate(lo.slots):
            gen = generators.for_slot(slot).entries
            Tk = generators.T(slot.k).entries
            for c, idx in enumerate(lo.indices):
                shifted = list(idx.exps)
                shifted[s] += 1
                # one homogenizer power moves across the identity
                assert np.array_equal(ring.mul(gen, lo.columns[c]),
                                      ring.mul(Tk, hi.column(shifted)))

    def test_ablation_fails_exactly_the_omitted_condition(self, gf):
        params, _, _, generators, bases = run_pipeline(
            3, 1, 1, gf, seed=12, omit_slot=1)
        report = sc.check_alignment(bases, generators, params)
        assert not report.all_pass
        failing = report.failing()
        assert {f.slot_index for f in failing} == {1}
        assert all(f.failure_mode == "missing-witness-column"
                   for f in failing)

    def test_float_alignment_within_tolerance(self, real):
        params, _, _, generators, bases = run_pipeline(3, 1, 1, real, seed=2)
        assert sc.check_alignment(bases, generators, params).all_pass


class TestStreamDisjointness:
    """With multiple streams, the bases must not share columns.

    Columns whose cross-stream exponents are all zero would otherwise be
    identical across streams (and each such desired column would equal
    an interference column of another stream), making the decodability
    matrices rank-deficient for every channel realization.  The
    own-stream tag factor keeps the exponent patterns disjoint.
    """

    def test_no_shared_columns_and_desired_escapes(self, gf):
        params, _, _, generators, bases = run_pipeline(4, 2, 1, gf, seed=3)
        ring = generators.ring
        hi1 = bases[1][2].columns
        hi2 = bases[2][2].columns
        seen = {hi1[c].tobytes() for c in range(hi1.shape[0])}
        assert all(hi2[c].tobytes() not in seen for c in range(hi2.shape[0]))
        # the desired column must not appear among the interference
        # columns of either stream (k = 1 decoder)
        Tk = generators.T(1).entries
        for j in (1, 2):
            desired = ring.mul(generators.G(1, j).entries,
                               bases[j][1].columns[0])
            for hi in (hi1, hi2):
                prod = ring.mul(Tk[None, :], hi)
                assert not np.any(np.all(prod == desired[None, :], axis=1))

    def test_single_stream_has_no_tag(self, small_gf_pipeline):
        params, _, _, generators, _ = small_gf_pipeline
        from siacoop.precoding import _stream_tag
        assert _stream_tag(generators, params, 1) is None
