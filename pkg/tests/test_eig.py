import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from hardexc.eig import (EigenSolverError, eig, hessenberg_reduce, lu_det,
                         lu_factor_complex, lu_solve_complex, qr_eigvals)


def greedy_match_error(mine, ref):
    """Worst relative mismatch under greedy nearest pairing."""
    used = np.zeros(len(ref), bool)
    scale = max(1.0, float(np.abs(ref).max()))
    worst = 0.0
    for lam in mine:
        d = np.abs(ref - lam)
        d[used] = np.inf
        k = int(np.argmin(d))
        used[k] = True
        worst = max(worst, d[k] / scale)
    return worst


def square_matrices(nmax=8, scale=1.0):
    side = st.integers(1, nmax)
    return side.flatmap(lambda n: hnp.arrays(
        np.float64, (n, n),
        elements=st.floats(-scale, scale, allow_nan=False)))


@given(square_matrices())
def test_eigenvalues_match_reference_solver(a):
    mine = qr_eigvals(a)
    ref = np.linalg.eigvals(a)
    assert greedy_match_error(mine, ref) <= 1e-10


@settings(max_examples=20)
@given(square_matrices(nmax=6, scale=1e9))
def test_eigenvalues_match_reference_solver_large_scale(a):
    mine = qr_eigvals(a)
    ref = np.linalg.eigvals(a)
    assert greedy_match_error(mine, ref) <= 1e-10


def test_hessenberg_preserves_spectrum_and_structure():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(6, 6))
    h = hessenberg_reduce(a)
    assert np.allclose(np.tril(h, -2), 0.0)
    assert greedy_match_error(np.linalg.eigvals(h), np.linalg.eigvals(a)) < 1e-12


@given(square_matrices(nmax=6))
def test_eigenvector_residuals_below_validated_bound(a):
    if a.shape[0] < 2:
        return
    vals, vecs = eig(a)
    anorm = max(float(np.max(np.sum(np.abs(a), axis=1))), 1e-300)
    for j in range(len(vals)):
        r = np.max(np.abs(a @ vecs[:, j] - vals[j] * vecs[:, j]))
        assert r <= 1e-8 * anorm


def test_conjugate_pairs_are_exact():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.normal(size=(6, 6)) * 10.0 ** rng.integers(-2, 9)
        vals = qr_eigvals(a)
        cplx = [v for v in vals if v.imag != 0.0]
        assert len(cplx) % 2 == 0
        remaining = list(cplx)
        while remaining:
            v = remaining.pop()
            assert v.conjugate() in remaining
            remaining.remove(v.conjugate())


def test_characteristic_polynomial_vanishes_at_eigenvalues():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(6, 6)) * 3.0
    vals = qr_eigvals(a)
    # |det(A - lam I)| should be tiny relative to the product of singular scales
    scale = np.prod(np.sum(np.abs(a), axis=1) + 1.0)
    for lam in vals:
        assert abs(lu_det(a - lam * np.eye(6))) <= 1e-9 * scale


def test_repeated_and_defective_eigenvalues():
    assert np.allclose(np.sort_complex(qr_eigvals(np.diag([2.0, 2.0, -1.0]))),
                       [-1.0, 2.0, 2.0])
    vals = qr_eigvals(np.array([[1.0, 1.0], [0.0, 1.0]]))
    assert np.allclose(vals, [1.0, 1.0])


def test_eigenvalue_order_is_deterministic_and_sorted():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 6))
    v1 = qr_eigvals(a)
    v2 = qr_eigvals(a.copy())
    assert np.array_equal(v1, v2)
    assert np.all(np.diff(v1.real) <= 1e-12 * (1 + np.abs(v1.real[:-1])))


def test_lu_det_matches_reference():
    rng = np.random.default_rng(9)
    for n in (1, 3, 5, 6):
        a = rng.normal(size=(n, n))
        ref = np.linalg.det(a)
        assert abs(lu_det(a) - ref) <= 1e-10 * max(1.0, abs(ref))


def test_lu_solve_complex_round_trip():
    rng = np.random.default_rng(13)
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    x = rng.normal(size=6) + 1j * rng.normal(size=6)
    lu, piv, bumped = lu_factor_complex(a)
    got = lu_solve_complex(lu, piv, a @ x)
    assert not bumped
    assert np.allclose(got, x, rtol=1e-10, atol=1e-12)


def test_singular_shift_is_bumped_not_fatal():
    a = np.eye(3, dtype=complex)
    lu, piv, bumped = lu_factor_complex(a - 1.0 * np.eye(3))
    assert bumped


def test_non_square_rejected():
    with pytest.raises(ValueError):
        hessenberg_reduce(np.zeros((2, 3)))
