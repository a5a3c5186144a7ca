"""Operator-layer oracles: hand-computed values and algebraic invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_density, random_hermitian
from nchv.errors import DimensionMismatchError, ValidationError
from nchv.opcore import (
    ALGEBRA_TOL,
    STRUCT_TOL,
    HermitianObservable,
    OrthonormalBasis,
    atom_projections,
    basis_distance,
    basis_from_json,
    basis_to_json,
    check_density,
    check_projection,
    commutator,
    nontrivial_masks,
    operator_from_json,
    operator_norm,
    operator_to_json,
    pairwise_commutator_norms,
    spectral_resolution,
    subset_projections,
    validate_resolution,
)

HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)


def seeded(draw_seed):
    return np.random.default_rng(draw_seed)


class TestOperatorNorm:
    def test_nilpotent_shift(self):
        assert operator_norm(np.array([[0, 1], [0, 0]])) == pytest.approx(1.0)

    def test_diagonal_takes_largest_magnitude(self):
        assert operator_norm(np.diag([3.0, -4.0])) == pytest.approx(4.0)

    def test_rank_one_projector_commutator_is_half(self):
        # |[ |0><0|, |+><+| ]| = 1/2, a textbook value worth freezing
        p = np.diag([1.0, 0.0])
        plus = np.full((2, 2), 0.5)
        assert operator_norm(commutator(p, plus)) == pytest.approx(0.5, abs=1e-12)

    def test_pairwise_matches_loop(self):
        rng = seeded(5)
        a = np.stack([random_hermitian(3, rng) for _ in range(4)])
        b = np.stack([random_hermitian(3, rng) for _ in range(5)])
        table = pairwise_commutator_norms(a, b)
        for i in range(4):
            for j in range(5):
                assert table[i, j] == pytest.approx(
                    operator_norm(commutator(a[i], b[j])), abs=1e-12
                )


class TestProjectionAndDensity:
    def test_projection_rank(self):
        assert check_projection(np.diag([1.0, 1.0, 0.0])) == 2

    def test_rejects_non_idempotent(self):
        with pytest.raises(ValidationError):
            check_projection(np.diag([0.5, 0.0]))

    def test_density_accepts_maximally_mixed(self):
        check_density(np.eye(4) / 4)

    def test_density_rejects_trace(self):
        with pytest.raises(ValidationError):
            check_density(np.eye(2))

    def test_density_rejects_negative_eigenvalue(self):
        with pytest.raises(ValidationError):
            check_density(np.diag([1.5, -0.5]))

    def test_dimension_mismatch_raised(self):
        with pytest.raises(DimensionMismatchError):
            commutator(np.eye(2), np.eye(3))


class TestBasis:
    def test_columns_must_be_orthonormal(self):
        with pytest.raises(ValidationError):
            OrthonormalBasis(np.array([[1.0, 1.0], [0.0, 0.0]]))

    def test_distance_to_hadamard_is_two(self):
        # I - H has eigenvalues {0, 2} since H is a Hermitian unitary
        b1 = OrthonormalBasis(np.eye(2))
        b2 = OrthonormalBasis(HADAMARD)
        assert basis_distance(b1, b2) == pytest.approx(2.0, abs=1e-12)

    def test_distance_is_order_sensitive(self):
        # the metric lives on ordered bases: a swap (eigenvalue -1) is
        # maximally far, a 3-cycle sits at |1 - e^{2pi i/3}| = sqrt(3)
        b1 = OrthonormalBasis(np.eye(2))
        assert basis_distance(b1, b1.permuted([1, 0])) == pytest.approx(2.0, abs=1e-12)
        c1 = OrthonormalBasis(np.eye(3))
        assert basis_distance(c1, c1.permuted([1, 2, 0])) == pytest.approx(
            np.sqrt(3), abs=1e-12
        )

    def test_atoms_resolve_identity(self):
        rng = seeded(11)
        z = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        q, _ = np.linalg.qr(z)
        atoms = atom_projections(OrthonormalBasis(q))
        assert np.allclose(atoms.sum(axis=0), np.eye(4), atol=1e-12)

    def test_json_roundtrip(self):
        b = OrthonormalBasis(HADAMARD)
        again = basis_from_json(basis_to_json(b))
        assert basis_distance(b, again) == pytest.approx(0.0, abs=1e-15)


class TestSubsetProjections:
    def test_mask_count(self):
        assert len(nontrivial_masks(3)) == 6
        assert len(nontrivial_masks(4)) == 14

    def test_each_is_a_projection_of_popcount_rank(self):
        rng = seeded(2)
        z = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        q, _ = np.linalg.qr(z)
        basis = OrthonormalBasis(q)
        masks = nontrivial_masks(3)
        stack = subset_projections(basis, masks)
        for mask, proj in zip(masks, stack):
            assert check_projection(proj) == bin(mask).count("1")

    def test_complement_masks_sum_to_identity(self):
        basis = OrthonormalBasis(np.eye(3))
        stack = subset_projections(basis, [0b011, 0b100])
        assert np.allclose(stack[0] + stack[1], np.eye(3), atol=STRUCT_TOL)


class TestSpectralResolution:
    def test_merges_near_degenerate_eigenvalues(self):
        h = np.diag([1.0, 1.0 + 1e-12, 5.0])
        pairs = spectral_resolution(h)
        assert len(pairs) == 2
        ranks = [check_projection(p) for _, p in pairs]
        assert ranks == [2, 1]

    def test_eigenvalues_ascend(self):
        h = np.diag([3.0, -1.0, 2.0])
        vals = [v for v, _ in spectral_resolution(h)]
        assert vals == sorted(vals)

    @given(st.integers(0, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_reconstructs_random_hermitian(self, seed):
        h = random_hermitian(4, seeded(seed))
        rebuilt = sum(v * p for v, p in spectral_resolution(h))
        assert operator_norm(h - rebuilt) < 1e-9

    @given(st.integers(0, 10**6))
    @settings(max_examples=40, deadline=None)
    def test_projections_sum_to_identity(self, seed):
        h = random_hermitian(3, seeded(seed))
        total = sum(p for _, p in spectral_resolution(h))
        assert operator_norm(total - np.eye(3)) < 1e-10


class TestHermitianObservable:
    def test_diagonal_spectrum(self):
        obs = HermitianObservable.from_operator(np.diag([1.0, 2.0, 3.0]))
        assert obs.eigenvalues == pytest.approx((1.0, 2.0, 3.0))
        assert obs.is_nondegenerate()

    def test_degenerate_flagged(self):
        obs = HermitianObservable.from_operator(np.diag([1.0, 1.0, 3.0]))
        assert not obs.is_nondegenerate()
        assert len(obs.projections) == 2

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValidationError):
            HermitianObservable.from_operator(np.array([[0, 1], [0, 0]], dtype=complex))


class TestValidateResolution:
    def test_projective_resolution_passes(self):
        assert validate_resolution([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])

    def test_smooth_povm_passes(self):
        third = np.eye(2) / 3
        assert validate_resolution([third, third, third])

    def test_short_sum_fails(self):
        assert not validate_resolution([np.diag([1.0, 0.0]), np.diag([0.0, 0.5])])

    def test_negative_member_fails(self):
        assert not validate_resolution([np.diag([1.5, 1.0]), np.diag([-0.5, 0.0])])

    @given(st.integers(0, 10**6))
    @settings(max_examples=25, deadline=None)
    def test_random_density_spectral_family(self, seed):
        """Eigenprojections of any density operator resolve the identity."""
        d = random_density(3, seeded(seed))
        assert validate_resolution([p for _, p in spectral_resolution(d)])


class TestOperatorJson:
    def test_roundtrip_preserves_entries(self):
        rng = seeded(9)
        m = random_hermitian(3, rng)
        again = operator_from_json(operator_to_json(m))
        assert operator_norm(m - again) == 0.0

    def test_malformed_payload(self):
        with pytest.raises(ValidationError):
            operator_from_json({"dim": 2, "re": [[1, 0], [0, 1]]})
