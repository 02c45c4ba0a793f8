"""Causality, boosts, Riemannian constructions, energy tensors."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from genwave.nets import (
    GeneralizedNumber,
    NetClass,
    classify,
    constant_net,
    is_strictly_nonzero,
    make_indicator,
    make_power,
)
from genwave.linalg import GenMatrix, GenVector, is_positive_definite_minors
from genwave.lorentz import (
    CausalClass,
    CausalityError,
    CsVerdict,
    GenBilinearForm,
    NotLorentzianError,
    classify_causal,
    dec_check,
    energy_tensor,
    flip_metric,
    inverse_cs_gap,
    lorentz_boost,
    minkowski,
    riemann_from_pair,
    same_time_orientation,
    unit_normalize,
)
from conftest import random_timelike


@pytest.fixture(scope="module")
def eta(grid):
    return minkowski(4, grid)


class TestClassifyCausal:
    def test_time_axis(self, eta, grid):
        assert classify_causal(eta, GenVector.constant([1, 0, 0, 0], grid)) is CausalClass.TIMELIKE

    def test_lightlike(self, eta, grid):
        assert classify_causal(eta, GenVector.constant([1, 1, 0, 0], grid)) is CausalClass.NULL

    def test_branch_indicator_indeterminate(self, eta, grid, chi_even):
        u = GenVector.from_nets([chi_even, chi_even, constant_net(0, grid), constant_net(0, grid)])
        assert classify_causal(eta, u) is CausalClass.INDETERMINATE

    def test_spacelike_and_zero(self, eta, grid):
        assert classify_causal(eta, GenVector.constant([0, 1, 0, 0], grid)) is CausalClass.SPACELIKE
        assert classify_causal(eta, GenVector.constant([0, 0, 0, 0], grid)) is CausalClass.NULL

    def test_requires_lorentzian(self, grid):
        riem = GenBilinearForm(GenMatrix.constant(np.eye(4), grid))
        with pytest.raises(NotLorentzianError):
            classify_causal(riem, GenVector.constant([1, 0, 0, 0], grid))


class TestTimeOrientation:
    def test_same_vector(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        assert same_time_orientation(eta, u, u)

    def test_opposite(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        assert not same_time_orientation(eta, u, -u)

    def test_boosted_companion(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        v = GenVector.constant(1.25 * np.array([1, 0.6, 0, 0]), grid)
        assert same_time_orientation(eta, u, v)

    def test_rejects_non_timelike(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        w = GenVector.constant([0, 1, 0, 0], grid)
        with pytest.raises(CausalityError):
            same_time_orientation(eta, u, w)


class TestInverseCauchySchwarz:
    def test_strict_gap(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        v = GenVector.constant([2, 1, 0, 0], grid)
        gap, verdict = inverse_cs_gap(eta, u, v)
        assert_allclose(gap.values, 1.0, rtol=0)
        assert verdict is CsVerdict.STRICT

    def test_equality_for_same_vector(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        gap, verdict = inverse_cs_gap(eta, u, u)
        assert np.all(gap.values == 0.0)
        assert verdict is CsVerdict.EQUALITY

    def test_idempotent_counterexample(self, small_grid):
        # a short grid keeps eps**2 above the cancellation floor of the
        # O(1) terms in the gap, so both branches stay visible
        g = minkowski(4, small_grid)
        chi = make_indicator(lambda k: k % 2 == 0, small_grid)
        u = GenVector.constant([1, 0, 0, 0], small_grid)
        v = GenVector.from_nets(
            [constant_net(1, small_grid), chi * make_power(1, 1, small_grid),
             constant_net(0, small_grid), constant_net(0, small_grid)]
        )
        gap, verdict = inverse_cs_gap(g, u, v)
        expected = chi * make_power(1, 2, small_grid)
        assert_allclose(gap.values, expected.values, atol=1e-15)
        assert verdict is CsVerdict.WEAK
        # odd branch identically zero, even branch decays at order two
        assert np.all(gap.values[1::2] == 0.0)
        from genwave.nets import valuation
        assert abs(valuation(gap).slope - 2.0) < 1e-6

    def test_random_pairs_nonnegative_and_strict(self, cs_grid):
        g = minkowski(4, cs_grid)
        rng = np.random.default_rng(17)
        for _ in range(200):
            u = random_timelike(rng, cs_grid, power_entries=True)
            v = random_timelike(rng, cs_grid, power_entries=True)
            if not same_time_orientation(g, u, v):
                v = -v
            gap, verdict = inverse_cs_gap(g, u, v)
            uv2 = g.inner(u, v).values ** 2
            uuvv = np.abs(g.inner(u, u).values * g.inner(v, v).values)
            scale = np.maximum(np.maximum(uv2, uuvv), 1.0)
            assert np.min((gap.values / scale)[cs_grid.tail]) >= -1e-9
            minor = u.values[:, 0] * v.values[:, 1] - u.values[:, 1] * v.values[:, 0]
            if is_strictly_nonzero(GeneralizedNumber(cs_grid, minor)):
                assert verdict is CsVerdict.STRICT


class TestLorentzBoost:
    def test_identity_for_equal_vectors(self, eta, grid):
        xi = GenVector.constant([1, 0, 0, 0], grid)
        boost = lorentz_boost(eta, xi, xi)
        assert_allclose(boost.values, np.tile(np.eye(4), (grid.k, 1, 1)), atol=1e-14)

    def test_standard_boost(self, eta, grid):
        xi = GenVector.constant([1, 0, 0, 0], grid)
        zeta = GenVector.constant(1.25 * np.array([1, 0.6, 0, 0]), grid)
        boost = lorentz_boost(eta, xi, zeta)
        mapped = np.einsum("kij,kj->ki", boost.values, xi.values)
        assert np.max(np.abs(mapped - zeta.values)) <= 1e-12
        pres = np.einsum("kji,kjl,kln->kin", boost.values, eta.matrix.values, boost.values)
        assert np.max(np.abs(pres - eta.matrix.values)) <= 1e-12

    def test_random_unit_pairs(self, eta, grid):
        rng = np.random.default_rng(29)
        for _ in range(25):
            xi = unit_normalize(eta, random_timelike(rng, grid))
            zeta = unit_normalize(eta, random_timelike(rng, grid))
            if not same_time_orientation(eta, xi, zeta):
                zeta = -zeta
            boost = lorentz_boost(eta, xi, zeta)
            mapped = np.einsum("kij,kj->ki", boost.values, xi.values)
            assert np.max(np.abs(mapped - zeta.values)) <= 1e-10
            pres = np.einsum("kji,kjl,kln->kin", boost.values, eta.matrix.values, boost.values)
            assert np.max(np.abs(pres - eta.matrix.values)) <= 1e-10

    def test_boost_preserves_causal_class(self, eta, grid):
        rng = np.random.default_rng(31)
        xi = unit_normalize(eta, random_timelike(rng, grid))
        zeta = unit_normalize(eta, random_timelike(rng, grid))
        if not same_time_orientation(eta, xi, zeta):
            zeta = -zeta
        boost = lorentz_boost(eta, xi, zeta)
        # timelike and spacelike survive float rounding; an exactly null
        # vector does not (its image norm is rounding noise), so only
        # stably classifiable vectors are checked
        for vec in ([1, 0.2, 0.1, 0], [0.1, 2, 0, 0], [3, 1, -1, 0.5]):
            w = GenVector.constant(vec, grid)
            mapped = GenVector(grid, np.einsum("kij,kj->ki", boost.values, w.values))
            assert classify_causal(eta, mapped) is classify_causal(eta, w)

    def test_rejects_non_unit(self, eta, grid):
        xi = GenVector.constant([2, 0, 0, 0], grid)
        with pytest.raises(CausalityError):
            lorentz_boost(eta, xi, xi)


class TestRiemannFromPair:
    def test_unit_pair_half_identity(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        h = riemann_from_pair(eta, u, u)
        assert_allclose(h.matrix.values, np.tile(np.diag([0.5] * 4), (grid.k, 1, 1)), atol=1e-15)

    def test_boosted_pair_positive_definite(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        v = GenVector.constant(1.25 * np.array([1, 0.6, 0, 0]), grid)
        h = riemann_from_pair(eta, u, v)
        assert is_positive_definite_minors(h.matrix)
        assert h.index_report.index == 0

    def test_random_pairs_positive_on_free_vectors(self, eta, grid):
        rng = np.random.default_rng(41)
        for _ in range(20):
            u = random_timelike(rng, grid)
            v = random_timelike(rng, grid)
            if not same_time_orientation(eta, u, v):
                v = -v
            h = riemann_from_pair(eta, u, v)
            w = GenVector.constant(rng.normal(size=4), grid)
            q = h.inner(w, w)
            assert classify(q) is NetClass.STRICTLY_POSITIVE

    def test_boosted_frame_lower_bound(self, eta, grid):
        # in the frame u = e_t, v = gamma (1, V, 0, 0):
        # h(w,w) > (gamma/2) (w3^2 + w4^2)
        rng = np.random.default_rng(43)
        for vel in (0.2, 0.6, 0.9):
            gamma = 1.0 / np.sqrt(1 - vel**2)
            u = GenVector.constant([1, 0, 0, 0], grid)
            v = GenVector.constant(gamma * np.array([1, vel, 0, 0]), grid)
            h = riemann_from_pair(eta, u, v)
            for _ in range(20):
                w = rng.normal(size=4)
                q = float(h.inner(GenVector.constant(w, grid), GenVector.constant(w, grid)).values[0])
                assert q > (gamma / 2) * (w[2] ** 2 + w[3] ** 2) - 1e-9


class TestFlipMetric:
    def test_minkowski_time_axis(self, eta, grid):
        theta = GenVector.constant([1, 0, 0, 0], grid)
        k_lo, k_up = flip_metric(eta, theta)
        assert_allclose(k_lo.values, np.tile(np.eye(4), (grid.k, 1, 1)), atol=1e-15)
        assert_allclose(k_up.values, np.tile(np.eye(4), (grid.k, 1, 1)), atol=1e-15)

    def test_static_block_form(self, grid):
        v_net = 1.0 + 0.5 * grid.samples  # position-free lapse net
        hvals = np.tile(np.diag([0.0, 2.0, 3.0, 4.0]), (grid.k, 1, 1))
        hvals[:, 0, 0] = -(v_net**2)
        g = GenBilinearForm(GenMatrix(grid, hvals))
        theta = GenVector(grid, np.column_stack([1.0 / v_net, np.zeros((grid.k, 3))]))
        k_lo, k_up = flip_metric(g, theta)
        expected = hvals.copy()
        expected[:, 0, 0] = v_net**2
        assert_allclose(k_lo.values, expected, rtol=1e-12)
        prod = np.einsum("kij,kjl->kil", k_lo.values, k_up.values)
        assert np.max(np.abs(prod - np.eye(4))) <= 1e-10

    def test_random_lorentzian_inverse_identity(self, grid):
        rng = np.random.default_rng(47)
        a = np.eye(4) + 0.3 * rng.normal(size=(4, 4))
        g = GenBilinearForm(GenMatrix.constant(a.T @ np.diag([-1.0, 1, 1, 1]) @ a, grid))
        ainv = np.linalg.inv(a)
        theta = unit_normalize(g, GenVector.constant(ainv @ np.array([1, 0, 0, 0.0]), grid))
        k_lo, k_up = flip_metric(g, theta)
        prod = np.einsum("kij,kjl->kil", k_lo.values, k_up.values)
        assert np.max(np.abs(prod - np.eye(4))) <= 1e-10


class TestEnergyTensor:
    def test_order_zero_constant(self, eta, grid):
        t = energy_tensor(eta, None, constant_net(1, grid), 0)
        assert_allclose(t.components.values, np.tile(np.diag([0.5, -0.5, -0.5, -0.5]), (grid.k, 1, 1)), atol=1e-15)

    def test_order_one_covector(self, eta, grid):
        w = np.tile([1.0, 0, 0, 0], (grid.k, 1))
        t = energy_tensor(eta, None, w, 1)
        assert_allclose(t.components.values, np.tile(np.diag([0.5] * 4), (grid.k, 1, 1)), atol=1e-15)

    def test_zero_source(self, eta, grid):
        w = np.zeros((grid.k, 4))
        t = energy_tensor(eta, None, w, 1)
        assert np.all(t.components.values == 0.0)

    def test_symmetry_all_orders(self, eta, grid):
        rng = np.random.default_rng(53)
        theta = GenVector.constant([1, 0, 0, 0], grid)
        _, e_up = flip_metric(eta, theta)
        for k, shape in ((0, (grid.k,)), (1, (grid.k, 4)), (2, (grid.k, 4, 4))):
            w = rng.normal(size=shape)
            t = energy_tensor(eta, e_up, w, k)
            assert np.max(np.abs(t.components.values - np.swapaxes(t.components.values, 1, 2))) <= 1e-12

    def test_rank_mismatch(self, eta, grid):
        with pytest.raises(ValueError):
            energy_tensor(eta, None, np.zeros((grid.k, 4)), 0)


class TestDecCheck:
    def test_unit_chain_closed_form(self, eta, grid):
        u = GenVector.constant([1, 0, 0, 0], grid)
        w = eta.lower(u).values
        t = energy_tensor(eta, None, w, 1)
        rep = dec_check(t, eta, u, u)
        assert_allclose(rep.s1.values, 0.5, rtol=0)
        assert_allclose(rep.flux.values, np.tile([-0.5, 0, 0, 0], (grid.k, 1)), atol=1e-15)
        assert rep.flux_class is CausalClass.TIMELIKE
        assert rep.identity_residual <= 1e-12
        assert rep.identity_ok

    def test_zero_divisor_norm_not_timelike(self, eta, grid, chi_even):
        u = GenVector.constant([1, 0, 0, 0], grid)
        theta = GenVector.from_nets(
            [chi_even, constant_net(0, grid), constant_net(0, grid), constant_net(0, grid)]
        )
        w = eta.lower(theta).values  # <theta,theta> = -chi_even, a zero divisor
        t = energy_tensor(eta, None, w, 1)
        rep = dec_check(t, eta, u, u)
        assert rep.flux_class is not CausalClass.TIMELIKE
        assert rep.flux_not_spacelike

    def test_zero_source_vanishes(self, eta, grid):
        t = energy_tensor(eta, None, np.zeros((grid.k, 4)), 1)
        rep = dec_check(t, eta, GenVector.constant([1, 0, 0, 0], grid), GenVector.constant([1.25, 0.75, 0, 0], grid))
        assert np.all(rep.s1.values == 0.0) and np.all(rep.s2.values == 0.0)

    def test_random_sweep_nonnegative(self, eta, grid):
        rng = np.random.default_rng(59)
        for _ in range(50):
            k = int(rng.integers(0, 3))
            xi = random_timelike(rng, grid)
            zeta = random_timelike(rng, grid)
            if not same_time_orientation(eta, xi, zeta):
                zeta = -zeta
            _, e_up = flip_metric(eta, unit_normalize(eta, xi))
            if k == 0:
                w = rng.normal() * np.ones(grid.k)
            elif k == 1:
                w = np.tile(rng.normal(size=4), (grid.k, 1))
            else:
                w = np.tile(rng.normal(size=(4, 4)), (grid.k, 1, 1))
            rep = dec_check(energy_tensor(eta, e_up, w, k), eta, xi, zeta)
            assert rep.s1_nonneg and rep.s2_nonneg
            assert rep.flux_not_spacelike
            if k == 1:
                assert rep.identity_ok

    def test_s2_matches_riemann_contraction(self, eta, grid):
        # T^{ab,1}(W) xi_a eta_b equals the contraction of W with the
        # pair-built Riemannian metric
        rng = np.random.default_rng(61)
        for _ in range(20):
            xi = random_timelike(rng, grid)
            zeta = random_timelike(rng, grid)
            if not same_time_orientation(eta, xi, zeta):
                zeta = -zeta
            w = np.tile(rng.normal(size=4), (grid.k, 1))
            t = energy_tensor(eta, None, w, 1)
            rep = dec_check(t, eta, xi, zeta)
            h = riemann_from_pair(eta, xi, zeta, normalize=False)
            hw = np.einsum("kab,kc,kd,kca,kdb->k", h.matrix.values,
                           w, w, eta.inverse.values, eta.inverse.values)
            scale = max(1.0, float(np.max(np.abs(rep.s2.values))))
            assert np.max(np.abs(rep.s2.values - hw)) <= 1e-9 * scale
