from fractions import Fraction

import numpy as np
import pytest

import siacoop as sc
from siacoop.channel import identity_channels


class TestSchemeParams:

    @pytest.mark.parametrize("K,M,n,l,mu_n,lambda_n,P", [
        (3, 1, 1, 3, 1, 9, 1),
        (3, 1, 2, 3, 8, 35, 2),
        (4, 2, 1, 12, 1, 8193, 3),
        (5, 3, 1, 25, 1, 100663297, 5),
    ])
    def test_derived_quantities(self, K, M, n, l, mu_n, lambda_n, P):
        p = sc.build_params(K, M, n)
        assert p.l == l
        assert p.mu_n == mu_n
        assert p.mu_n1 == (n + 1) ** l
        assert p.lambda_n == lambda_n
        assert p.lambda_n == p.mu_n + M * p.mu_n1
        assert p.P == P == (2 * M - 1) * n

    @pytest.mark.parametrize("K,M,limit", [
        (3, 1, Fraction(3, 2)),
        (4, 2, Fraction(8, 3)),
        (5, 3, Fraction(15, 4)),
    ])
    def test_dof_limit(self, K, M, limit):
        assert sc.build_params(K, M, 1).dof_limit == limit

    def test_dof_total_is_exact_rational(self):
        p = sc.build_params(4, 2, 1)
        assert p.dof_total == Fraction(8, 8193)
        assert isinstance(p.dof_total, Fraction)

    @pytest.mark.parametrize("K,M,n", [(4, 1, 1), (3, 2, 1), (5, 5, 1),
                                       (2, 0, 1), (3, 1, 0)])
    def test_invalid_parameters_rejected(self, K, M, n):
        with pytest.raises(ValueError):
            sc.build_params(K, M, n)

    def test_materializable_flag(self):
        assert sc.build_params(3, 1, 1).materializable
        assert sc.build_params(4, 2, 1).materializable
        assert not sc.build_params(5, 3, 1).materializable


class TestCooperationSet:

    def test_members_wrap_cyclically(self):
        cs = sc.cooperation_set(4, 5, 3)
        assert cs.members == (4, 5, 1)

    def test_single_receiver_when_no_cooperation(self):
        assert sc.cooperation_set(2, 3, 1).members == (2,)

    def test_every_receiver_appears_in_m_sets(self):
        K, M = 5, 3
        counts = {i: 0 for i in range(1, K + 1)}
        for k in range(1, K + 1):
            for rx in sc.cooperation_set(k, K, M).members:
                counts[rx] += 1
        assert all(c == M for c in counts.values())


class TestSampleChannels:

    @pytest.mark.parametrize("ring_name", ["gf", "real", "cplx"])
    def test_seeded_and_deterministic(self, ring_name, request):
        ring = request.getfixturevalue(ring_name)
        params = sc.build_params(3, 1, 1)
        a = sc.sample_channels(params, ring, seed=7)
        b = sc.sample_channels(params, ring, seed=7)
        c = sc.sample_channels(params, ring, seed=8)
        assert np.array_equal(a.h(2, 3).entries, b.h(2, 3).entries)
        assert not np.array_equal(a.h(2, 3).entries, c.h(2, 3).entries)

    def test_entries_canonical_and_nonzero(self, gf):
        params = sc.build_params(4, 2, 1)
        channels = sc.sample_channels(params, gf, seed=0)
        for j in range(1, 5):
            for i in range(1, 5):
                e = channels.h(j, i).entries
                assert e.shape == (params.lambda_n,)
                assert np.all(e >= 1) and np.all(e < gf.p)

    def test_dimension_override_for_structural_studies(self, gf):
        params = sc.build_params(5, 3, 1)  # lambda_n far beyond the bound
        channels = sc.sample_channels(params, gf, seed=0, dim=7)
        assert channels.dim == 7
        assert channels.h(1, 1).dim == 7

    def test_materialization_bound_enforced(self, gf):
        params = sc.build_params(5, 3, 1)
        with pytest.raises(sc.ResourceBoundError):
            sc.sample_channels(params, gf, seed=0)

    def test_identity_channels_are_all_ones(self, gf):
        params = sc.build_params(3, 1, 1)
        channels = identity_channels(params, gf)
        assert np.all(channels.h(2, 1).entries == 1)
