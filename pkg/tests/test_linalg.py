"""Linear algebra over the ring: eigen, index, freeness, projections."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from genwave.nets import (
    ClassificationError,
    GeneralizedNumber,
    NetClass,
    classify,
    constant_net,
    make_indicator,
    make_power,
    valuation,
)
from genwave.linalg import (
    GenMatrix,
    GenVector,
    eigen_sym,
    extend_to_basis,
    index,
    is_free,
    is_nondegenerate,
    is_positive_definite_minors,
    orthogonal_basis,
    orthogonal_projection,
    perturbed_eigen_comparison,
    symmetrize,
    well_definedness_check,
)

MINKOWSKI = np.diag([-1.0, 1.0, 1.0, 1.0])


def rotation(phi):
    return np.array([[np.cos(phi), np.sin(phi)], [-np.sin(phi), np.cos(phi)]])


class TestSymmetrize:
    def test_symmetric_unchanged(self, grid):
        a = GenMatrix.constant([[2.0, 1.0], [1.0, 3.0]], grid)
        assert np.array_equal(symmetrize(a).values, a.values)

    def test_offdiagonal_halved(self, grid):
        a = GenMatrix.constant([[0.0, 1.0], [0.0, 0.0]], grid)
        assert_allclose(symmetrize(a).values[0], [[0.0, 0.5], [0.5, 0.0]], rtol=0)

    def test_negligible_antisymmetric_part(self, grid):
        a = GenMatrix.constant([[1.0, 0.2], [0.2, 2.0]], grid)
        skew = np.zeros((grid.k, 2, 2))
        skew[:, 0, 1] = grid.samples**14
        skew[:, 1, 0] = -(grid.samples**14)
        perturbed = GenMatrix(grid, a.values + skew)
        diff = symmetrize(perturbed) - a
        for i in range(2):
            for j in range(2):
                fit = valuation(diff.entry(i, j))
                assert fit.all_below_floor or fit.slope >= 13


class TestEigenSym:
    def test_constant_diagonal(self, grid):
        eig = eigen_sym(GenMatrix.constant(np.diag([1.0, -1.0]), grid))
        assert np.all(eig.eigenvalues[0].values == 1.0)
        assert np.all(eig.eigenvalues[1].values == -1.0)

    def test_offdiagonal_epsilon(self, grid):
        vals = np.zeros((grid.k, 2, 2))
        vals[:, 0, 1] = grid.samples
        vals[:, 1, 0] = grid.samples
        eig = eigen_sym(GenMatrix(grid, vals))
        assert_allclose(eig.eigenvalues[0].values, grid.samples, rtol=1e-12)
        assert_allclose(eig.eigenvalues[1].values, -grid.samples, rtol=1e-12)

    def test_branch_rotated_representative_same_eigenvalues(self, grid):
        # conjugating single slices by a rotation must not change the
        # (sorted) eigenvalue nets
        base = np.diag([1.0, -1.0])
        vals = np.tile(base, (grid.k, 1, 1))
        r = rotation(np.pi / 2)
        for k in range(0, grid.k, 2):
            vals[k] = r @ base @ r.T
        eig = eigen_sym(symmetrize(GenMatrix(grid, vals)))
        assert_allclose(eig.eigenvalues[0].values, 1.0, atol=1e-12)
        assert_allclose(eig.eigenvalues[1].values, -1.0, atol=1e-12)

    def test_decomposition_invariants(self, grid):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(4, 4))
        a = GenMatrix.constant(a + a.T, grid)
        eig = eigen_sym(a)
        u = eig.transform.values
        ortho = np.einsum("kij,klj->kil", u, u)
        assert np.max(np.abs(ortho - np.eye(4))) <= 1e-10
        lam = np.stack([l.values for l in eig.eigenvalues], axis=1)
        diag = np.einsum("kij,kjl,kml->kim", u, a.values, u)
        scale = np.max(np.abs(a.values))
        assert np.max(np.abs(diag - lam[:, :, None] * np.eye(4))) <= 1e-10 * scale

    def test_requires_symmetry(self, grid):
        with pytest.raises(ValueError, match="symmetr"):
            eigen_sym(GenMatrix.constant([[0.0, 1.0], [0.0, 0.0]], grid))


class TestWellDefinedness:
    def test_zero_perturbation(self, small_grid):
        a = GenMatrix.constant(np.diag([2.0, -1.0]), small_grid)
        zero = GenMatrix(small_grid, np.zeros((small_grid.k, 2, 2)))
        assert well_definedness_check(a, zero) == 0.0

    def test_negligible_random_perturbation(self, small_grid):
        rng = np.random.default_rng(5)
        sym = rng.normal(size=(3, 3))
        a = GenMatrix.constant(sym + sym.T, small_grid)
        r = rng.normal(size=(3, 3))
        pert = GenMatrix(small_grid, small_grid.samples[:, None, None] ** 14 * r)
        dists, bounds, diffs = perturbed_eigen_comparison(a, pert)
        assert np.all(dists <= bounds * (1 + 1e-12))
        # matched eigenvalue differences carry the perturbation's decay
        for col in range(3):
            net_vals = np.zeros(small_grid.k)
            net_vals[small_grid.tail] = diffs[:, col]
            fit = valuation(GeneralizedNumber(small_grid, np.maximum(net_vals, 1e-300)))
            assert fit.slope >= 13

    def test_rotation_conjugated_diagonal(self, small_grid):
        # a similarity transform leaves the eigenvalues exactly in place
        base = np.diag([1.0, -1.0])
        vals = np.tile(base, (small_grid.k, 1, 1))
        pert = np.zeros_like(vals)
        for k in range(small_grid.k):
            phi = small_grid.samples[k] ** 14
            r = rotation(phi)
            pert[k] = r @ base @ r.T - base
        a = GenMatrix(small_grid, vals)
        dists, bounds, _ = perturbed_eigen_comparison(a, GenMatrix(small_grid, pert))
        assert np.all(dists <= bounds * (1 + 1e-12))
        assert np.all(dists <= 1e-40)

    def test_rejects_visible_perturbation(self, small_grid):
        a = GenMatrix.constant(np.diag([1.0, 2.0]), small_grid)
        pert = GenMatrix(small_grid, small_grid.samples[:, None, None] ** 2 * np.ones((1, 2, 2)))
        with pytest.raises(ClassificationError):
            well_definedness_check(a, pert)


class TestNondegenerate:
    def test_minkowski(self, grid):
        assert is_nondegenerate(GenMatrix.constant(MINKOWSKI, grid))

    def test_zero_divisor_determinant(self, grid, chi_even):
        mat = GenMatrix.diagonal([chi_even, constant_net(1, grid)])
        assert not is_nondegenerate(mat)

    def test_power_diagonal(self, grid):
        mat = GenMatrix.diagonal([make_power(1, 1, grid), make_power(1, 2, grid)])
        assert is_nondegenerate(mat, m_inv=8)


class TestIndex:
    def test_minkowski_index_one(self, grid):
        rep = index(GenMatrix.constant(MINKOWSKI, grid))
        assert (rep.nu_plus, rep.nu_minus, rep.stable, rep.index) == (3, 1, True, 1)

    def test_small_positive_powers(self, grid):
        eps = make_power(1, 1, grid)
        rep = index(GenMatrix.diagonal([eps, eps, eps]))
        assert rep.index == 0 and rep.stable

    def test_branch_alternating_sign_absent(self, grid, chi_even, chi_odd):
        rep = index(GenMatrix.diagonal([chi_even - chi_odd, constant_net(1, grid)]))
        assert rep.index is None and not rep.stable
        assert rep.nu_plus == 1 and rep.nu_minus == 0


class TestMinors:
    def test_identity(self, grid):
        assert is_positive_definite_minors(GenMatrix.constant(np.eye(3), grid))

    def test_negative_power_fails(self, grid):
        mat = GenMatrix.diagonal([constant_net(1, grid), -make_power(1, 1, grid)])
        assert not is_positive_definite_minors(mat)

    def test_agrees_with_index_zero(self, grid):
        rng = np.random.default_rng(9)
        for _ in range(10):
            b = rng.normal(size=(3, 3))
            sym = GenMatrix.constant(b + b.T, grid)
            rep = index(sym)
            if rep.stable:
                assert is_positive_definite_minors(sym) == (rep.index == 0)


class TestFree:
    def test_canonical_vector(self, grid):
        assert is_free(GenVector.constant([1.0, 0.0], grid))

    def test_complementary_indicators(self, grid, chi_even, chi_odd):
        assert is_free(GenVector.from_nets([chi_even, chi_odd]))

    def test_single_indicator_not_free(self, grid, chi_even):
        assert not is_free(GenVector.from_nets([chi_even, constant_net(0, grid)]))


class TestExtendToBasis:
    def test_canonical_vector_permutation(self, grid):
        basis = extend_to_basis(GenVector.constant([0.0, 1.0, 0.0], grid))
        det = basis.det()
        assert np.all(np.abs(det.values) == 1.0)

    def test_indicator_pair_alternating_pivot(self, grid, chi_even, chi_odd):
        v = GenVector.from_nets([chi_even, chi_odd])
        basis = extend_to_basis(v)
        det = basis.det()
        assert np.all(np.abs(det.values) == 1.0)
        # pivot follows the active branch
        assert_allclose(basis.values[0, :, 0], [1.0, 0.0], rtol=0)
        assert_allclose(basis.values[1, :, 0], [0.0, 1.0], rtol=0)

    def test_epsilon_one_pair(self, grid):
        v = GenVector.from_nets([make_power(1, 1, grid), constant_net(1, grid)])
        basis = extend_to_basis(v)
        assert classify(basis.det()) in (NetClass.STRICTLY_NONZERO, NetClass.STRICTLY_POSITIVE, NetClass.STRICTLY_NEGATIVE)
        assert int(np.argmax(np.abs(v.values[-1]))) == 1

    def test_not_free_raises(self, grid, chi_even):
        with pytest.raises(ClassificationError):
            extend_to_basis(GenVector.from_nets([chi_even, constant_net(0, grid)]))


class TestOrthogonalBasis:
    def test_diagonal_input_signed_permutation(self, grid):
        u = orthogonal_basis(GenMatrix.constant(np.diag([1.0, 2.0]), grid))
        assert_allclose(np.abs(u.values), np.tile(np.eye(2)[::-1], (grid.k, 1, 1)), atol=1e-12)

    def test_quarter_rotation(self, grid):
        b = GenMatrix.constant([[0.0, 1.0], [1.0, 0.0]], grid)
        u = orthogonal_basis(b)
        assert_allclose(np.abs(u.values), np.full((grid.k, 2, 2), 1 / np.sqrt(2)), atol=1e-12)
        diag = np.einsum("kij,kjl,kml->kim", u.values, b.values, u.values)
        assert np.max(np.abs(diag[:, 0, 1])) <= 1e-10

    def test_sheared_minkowski_keeps_index(self, grid):
        rng = np.random.default_rng(2)
        a = np.eye(4) + 0.3 * rng.normal(size=(4, 4))
        sheared = GenMatrix.constant(a.T @ MINKOWSKI @ a, grid)
        u = orthogonal_basis(sheared)
        diag = np.einsum("kij,kjl,kml->kim", u.values, sheared.values, u.values)
        off = diag - diag * np.eye(4)
        assert np.max(np.abs(off)) <= 1e-10 * np.max(np.abs(sheared.values))
        assert index(sheared).index == 1


class TestOrthogonalProjection:
    def test_project_onto_axis(self, grid):
        h = GenMatrix.constant(np.eye(2), grid)
        e1 = GenVector.constant([1.0, 0.0], grid)
        v = GenVector.constant([1.0, 1.0], grid)
        proj = orthogonal_projection([e1], h, v)
        assert_allclose(proj.values, np.tile([1.0, 0.0], (grid.k, 1)), atol=1e-14)

    def test_minkowski_timelike_projection(self, grid):
        g = GenMatrix.constant(MINKOWSKI, grid)
        u = GenVector.constant([1.0, 0.0, 0.0, 0.0], grid)
        v = GenVector.constant([2.0, 3.0, 0.0, 0.0], grid)
        proj = orthogonal_projection([u], g, v)
        assert_allclose(proj.values, np.tile([2.0, 0.0, 0.0, 0.0], (grid.k, 1)), atol=1e-14)
        # residual is g-orthogonal to the basis vector
        resid = v - proj
        inner = np.einsum("ki,kij,kj->k", resid.values, g.values, u.values)
        assert np.max(np.abs(inner)) <= 1e-12

    def test_member_projects_to_itself(self, grid):
        h = GenMatrix.constant(np.eye(3), grid)
        b1 = GenVector.constant([1.0, 0.0, 0.0], grid)
        b2 = GenVector.constant([0.0, 1.0, 1.0], grid)
        v = GenVector.constant([2.0, -1.0, -1.0], grid)
        proj = orthogonal_projection([b1, b2], h, v)
        diff = v - proj
        for i in range(3):
            fit = valuation(diff.component(i))
            assert fit.all_below_floor or fit.slope >= 12

    def test_degenerate_gram_raises(self, grid):
        g = GenMatrix.constant(MINKOWSKI[:2, :2], grid)
        null = GenVector.constant([1.0, 1.0], grid)  # g(null, null) = 0
        with pytest.raises(ClassificationError):
            orthogonal_projection([null], g, GenVector.constant([1.0, 0.0], grid))


class TestModuleInvariants:
    def test_reconstruction_random_power_families(self, grid):
        rng = np.random.default_rng(21)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            vals = np.zeros((grid.k, n, n))
            for i in range(n):
                for j in range(i, n):
                    c, a = rng.uniform(-2, 2), rng.uniform(-2, 2)
                    vals[:, i, j] = vals[:, j, i] = c * grid.samples**a
            mat = GenMatrix(grid, vals)
            eig = eigen_sym(mat)
            u = eig.transform.values
            lam = np.stack([l.values for l in eig.eigenvalues], axis=1)
            recon = np.einsum("kji,kj,kjl->kil", u, lam, u)
            scale = np.max(np.abs(vals), axis=(1, 2))
            err = np.max(np.abs(recon - vals), axis=(1, 2))
            assert np.all(err <= 1e-9 * np.maximum(scale, 1e-30))

    def test_symmetric_negligible_perturbation_valuation(self, small_grid):
        rng = np.random.default_rng(23)
        sym = rng.normal(size=(3, 3))
        a = GenMatrix.constant(sym + sym.T, small_grid)
        r = rng.normal(size=(3, 3))
        pert_vals = small_grid.samples[:, None, None] ** 12 * (r + r.T)
        dists, bounds, diffs = perturbed_eigen_comparison(a, GenMatrix(small_grid, pert_vals))
        for col in range(3):
            vals = np.zeros(small_grid.k)
            vals[small_grid.tail] = diffs[:, col]
            fit = valuation(GeneralizedNumber(small_grid, np.maximum(vals, 1e-300)))
            assert fit.slope >= 11  # m_max - 1

    def test_determinant_equals_eigenvalue_product(self, grid):
        rng = np.random.default_rng(31)
        b = rng.normal(size=(4, 4))
        mat = GenMatrix.constant(b + b.T, grid)
        eig = eigen_sym(mat)
        prod = np.prod(np.stack([l.values for l in eig.eigenvalues], axis=1), axis=1)
        det = mat.det().values
        assert np.max(np.abs(prod - det)) <= 1e-9 * np.max(np.abs(det))

    def test_sylvester_congruence_invariance(self, grid):
        rng = np.random.default_rng(37)
        for _ in range(50):
            n = 4
            b = rng.normal(size=(n, n))
            sym = GenMatrix.constant(b + b.T + np.diag(rng.uniform(0.5, 1, n) * rng.choice([-1, 1], n)), grid)
            a = np.eye(n) + 0.4 * rng.normal(size=(n, n))
            cong = GenMatrix.constant(a.T, grid) @ sym @ GenMatrix.constant(a, grid)
            cong = symmetrize(cong)
            r1, r2 = index(sym), index(cong)
            if r1.stable and r2.stable:
                assert r1.index == r2.index
