"""matrix_core のテスト"""
import numpy as np
import pytest

from faircss.errors import PreconditionError
from faircss.matrix_core import (
    DenseMatrix,
    best_rank_k_error,
    column_residual,
    has_orthonormal_columns,
    is_upper_triangular,
    numeric_rank,
    orthonormal_basis,
    pivoted_qr,
    projection_residual,
    svd,
)


class TestDenseMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(PreconditionError):
            DenseMatrix(np.array([[1.0, np.nan]]))

    def test_rejects_wrong_shape(self):
        with pytest.raises(PreconditionError):
            DenseMatrix(np.array([1.0, 2.0]))
        with pytest.raises(PreconditionError):
            DenseMatrix(np.zeros((0, 3)))

    def test_values_are_read_only_copy(self):
        source = np.eye(3)
        m = DenseMatrix(source)
        source[0, 0] = 7.0
        assert m.values[0, 0] == 1.0
        assert m.values.flags.f_contiguous
        with pytest.raises(ValueError):
            m.values[0, 0] = 2.0


class TestSvd:
    def test_reconstruction(self, rng):
        a = rng.standard_normal((7, 5))
        d = svd(a)
        np.testing.assert_allclose(d.u @ np.diag(d.singular_values) @ d.vt, a, atol=1e-8)
        assert has_orthonormal_columns(d.u)
        assert has_orthonormal_columns(d.vt.T)
        assert np.all(np.diff(d.singular_values) <= 0)

    def test_rank_deficient(self, rng):
        a = rng.standard_normal((5, 4))
        a[:, 3] = a[:, 0] + a[:, 1]
        assert numeric_rank(a) == 3
        assert svd(a).rank == 3


class TestResiduals:
    def test_best_rank_k_error(self, diag321):
        assert best_rank_k_error(diag321, 1) == pytest.approx(np.sqrt(5.0))
        assert best_rank_k_error(diag321, 2) == pytest.approx(1.0)
        assert best_rank_k_error(diag321, 3) == 0.0
        with pytest.raises(PreconditionError):
            best_rank_k_error(diag321, 0)

    def test_axis_columns(self, diag321):
        assert column_residual(diag321, [0, 1]) == pytest.approx(1.0)
        assert column_residual(diag321, [0, 1, 2]) == pytest.approx(0.0, abs=1e-12)

    def test_matches_pseudoinverse(self, rng):
        m = rng.standard_normal((8, 5))
        c = m[:, [0, 2]]
        expected = np.linalg.norm(m - c @ np.linalg.pinv(c) @ m, "fro")
        assert projection_residual(m, c) == pytest.approx(expected, rel=1e-10)

    def test_row_mismatch(self, rng):
        with pytest.raises(PreconditionError):
            projection_residual(rng.standard_normal((4, 3)), rng.standard_normal((5, 1)))

    def test_pythagorean_split(self, rng):
        m = rng.standard_normal((10, 6))
        q = orthonormal_basis(m[:, [1, 4]])
        projected = np.linalg.norm(q @ (q.T @ m), "fro")
        residual = column_residual(m, [1, 4])
        assert projected ** 2 + residual ** 2 == pytest.approx(np.linalg.norm(m, "fro") ** 2, rel=1e-10)

    def test_adding_columns_never_increases_residual(self, rng):
        m = rng.standard_normal((8, 7))
        order = rng.permutation(7).tolist()
        residuals = [column_residual(m, order[:size]) for size in range(1, 8)]
        assert all(later <= earlier + 1e-12 for earlier, later in zip(residuals, residuals[1:]))
        assert residuals[-1] == pytest.approx(0.0, abs=1e-10)


def test_pivoted_qr(rng):
    a = rng.standard_normal((9, 6))
    f = pivoted_qr(a)
    np.testing.assert_allclose(f.q @ f.r, a[:, f.perm], atol=1e-10)
    assert is_upper_triangular(f.r)
    assert has_orthonormal_columns(f.q)
    assert np.all(np.diag(f.r) >= 0)
    assert sorted(f.perm.tolist()) == list(range(6))


def test_pivoted_qr_trailing_block_is_residual(rng):
    a = rng.standard_normal((9, 6))
    f = pivoted_qr(a)
    for k in range(1, 6):
        trailing = np.linalg.norm(f.r[k:, k:], "fro")
        assert trailing == pytest.approx(projection_residual(a, a[:, f.perm[:k]]), rel=1e-9, abs=1e-12)


def test_pivoted_qr_takes_largest_column_first():
    f = pivoted_qr(np.diag([1.0, 5.0, 2.0]))
    assert f.perm.tolist() == [1, 2, 0]
    np.testing.assert_allclose(np.diag(f.r), [5.0, 2.0, 1.0])
