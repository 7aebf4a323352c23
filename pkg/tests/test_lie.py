import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from quadexp import (
    ChkMatrix,
    CskMatrix,
    CcrKernel,
    KernelMeasure,
    KernelSolver,
    NumericalFailure,
    bch_product,
    build_ccr_kernel,
    chk_exp,
    csk_log,
    lambda_product,
    magnus_derivative_check,
    make_grid,
    mho_scalar,
    mho_superop,
    random_measure,
    random_model,
    sinhc_scalar,
    sinhc_superop,
    solve_measure_from_chk,
    symplectic_residual,
    ups_scalar,
    ups_superop,
)


# Reference series, kept local to the tests: 40 Taylor terms bound the
# truncation tail by 5^41 / 42! < 1e-21 on the disk |z| <= 5.

def ups_reference(z):
    return sum(z**k / math.factorial(k + 1) for k in range(41))


def sinhc_reference(z):
    return sum(z ** (2 * k) / math.factorial(2 * k + 1) for k in range(21))


def disk_samples():
    pts = []
    for r in (0.0, 1e-5, 1e-3, 0.1, 1.0, 3.0, 5.0):
        for ang in (0.0, 0.7, 2.1, np.pi, 4.4):
            pts.append(r * np.exp(1j * ang))
    return pts


def _scale_measure(q, factor):
    return KernelMeasure(q.grid, factor * q.weights, q.support_index)


def _scaled_measure(rng, ccr, target_norm):
    q = random_measure(rng, ccr.grid, ccr.dim, complex_entries=False)
    exponent_norm = np.linalg.norm(4j * ccr.big @ q.weights, 1)
    return _scale_measure(q, target_norm / exponent_norm)


def test_scalar_functions_match_reference_series():
    for z in disk_samples():
        ref_u = ups_reference(z)
        assert abs(ups_scalar(z) - ref_u) <= 1e-13 * (1.0 + abs(ref_u))
        ref_s = sinhc_reference(z)
        assert abs(sinhc_scalar(z) - ref_s) <= 1e-13 * (1.0 + abs(ref_s))
        # Mho is the reciprocal; the disk radius 5 stays inside the first
        # pole ring at |z| = 2 pi.
        ref_m = 1.0 / ref_u
        assert abs(mho_scalar(z) - ref_m) <= 1e-12 * (1.0 + abs(ref_m))


def test_scalar_identities():
    for z in disk_samples():
        assert abs(ups_scalar(z) * mho_scalar(z) - 1.0) <= 1e-12
        half = np.exp(z / 2.0) * sinhc_scalar(z / 2.0)
        assert abs(ups_scalar(z) - half) <= 1e-13 * (1.0 + abs(half))


def test_mho_pole_guard():
    with pytest.raises(NumericalFailure, match="pole"):
        mho_scalar(2j * np.pi)


def _adjoint_series(x, y, weights):
    term = y.copy()
    total = weights[0] * term
    for k in range(1, len(weights)):
        term = x @ term - term @ x
        total = total + weights[k] * term
    return total


def test_ups_superop_matches_adjoint_series(rng):
    x = 0.25 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    y = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    weights = [1.0 / math.factorial(k + 1) for k in range(20)]
    series = _adjoint_series(x, y, weights)
    value, err = ups_superop(x, y)
    assert np.linalg.norm(value - series) <= 1e-12 * (1.0 + np.linalg.norm(series))
    assert err <= 1e-12 * (1.0 + np.linalg.norm(series))


def test_sinhc_superop_matches_adjoint_series(rng):
    x = 0.25 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    y = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    weights = [
        1.0 / math.factorial(k + 1) if k % 2 == 0 else 0.0 for k in range(20)
    ]
    series = _adjoint_series(x, y, weights)
    value, _ = sinhc_superop(x, y)
    assert np.linalg.norm(value - series) <= 1e-12 * (1.0 + np.linalg.norm(series))


def test_superop_commuting_case_is_identity(rng):
    x = rng.normal(size=(3, 3))
    y = 0.7 * x @ x + 0.2 * x - 0.5 * np.eye(3)
    for op in (ups_superop, sinhc_superop):
        value, _ = op(x, y)
        assert np.allclose(value, y, atol=1e-12)
    value, _ = mho_superop(x, y)
    assert np.allclose(value, y, atol=1e-12)


def test_mho_inverts_ups(rng):
    x = 0.2 * (rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    y = rng.normal(size=(4, 4))
    forward, _ = ups_superop(x, y)
    back, tail = mho_superop(x, forward)
    assert np.linalg.norm(back - y) <= 1e-10 * (1.0 + np.linalg.norm(y))
    assert tail <= 1e-10


def test_mho_superop_radius_guard():
    x = 4.0 * np.eye(3)
    with pytest.raises(NumericalFailure, match="Bernoulli"):
        mho_superop(x, np.eye(3))


def test_derivative_identity_second_order(rng):
    a = 0.5 * rng.normal(size=(3, 3))
    b = 0.5 * rng.normal(size=(3, 3))

    def phi(t):
        return t * a + 0.5 * t * t * b

    reports = []
    for h in (0.02, 0.01):
        ts = 0.5 + h * np.arange(-2, 3)
        reports.append(magnus_derivative_check([phi(t) for t in ts], h))
    for rep in reports:
        assert rep.samples == 3
    # Central differences drive both identity residuals at second order.
    assert reports[0].left_max / reports[1].left_max == pytest.approx(4.0, rel=0.3)
    assert reports[0].right_max / reports[1].right_max == pytest.approx(4.0, rel=0.3)
    assert reports[1].left_max < 1e-4


@pytest.fixture
def ccr8(model2):
    return build_ccr_kernel(model2, make_grid(1.0, 8))


def test_exp_is_symplectic(ccr8, rng):
    for _ in range(10):
        q = _scaled_measure(rng, ccr8, 3.0)
        s = chk_exp(lambda_product(ccr8, q), ccr8)
        residual, scale = symplectic_residual(s)
        assert residual <= 1e-10 * scale


def test_exp_norm_gate(ccr8, rng):
    q = _scaled_measure(rng, ccr8, 80.0)
    with pytest.raises(NumericalFailure, match="1-norm"):
        chk_exp(lambda_product(ccr8, q), ccr8)


def test_csk_matrix_rejects_non_symplectic(ccr8, rng):
    mat = np.eye(ccr8.big.shape[0]) + 0.1 * rng.normal(size=ccr8.big.shape)
    with pytest.raises(NumericalFailure, match="symplectic"):
        CskMatrix(ccr8.grid, mat, ccr8)


def test_log_inverts_exp_principal(ccr8, rng):
    q = _scaled_measure(rng, ccr8, 1.0)
    chk = lambda_product(ccr8, q)
    s = chk_exp(chk, ccr8)
    ham = csk_log(s)
    assert np.linalg.norm(ham.ham - 4j * chk.ham) <= 1e-10 * (
        1.0 + np.linalg.norm(chk.ham)
    )
    recovered, report = solve_measure_from_chk(
        ChkMatrix(ham.grid, ham.ham / 4j, None), ccr8, support_index=q.support_index
    )
    assert np.linalg.norm(recovered.weights - q.weights) <= 1e-9 * (
        1.0 + np.linalg.norm(q.weights)
    )
    assert report.relative <= 1e-9


def test_log_anchor_follows_branch(ccr8, rng):
    # Push the exponent beyond the principal strip; the anchored form
    # must land back on the original branch.
    q = _scaled_measure(rng, ccr8, 1.0)
    exponent = 4j * ccr8.big @ q.weights
    eigs = np.linalg.eigvals(exponent)
    factor = 4.2 / np.max(np.abs(eigs.imag))
    scaled = factor * exponent
    s = CskMatrix(ccr8.grid, expm(scaled), ccr8)
    ham = csk_log(s, anchor=scaled)
    assert np.linalg.norm(ham.ham - scaled) <= 1e-8 * (1.0 + np.linalg.norm(scaled))


def test_log_negative_axis_raises(ccr8, rng):
    q = _scaled_measure(rng, ccr8, 1.0)
    exponent = 4j * ccr8.big @ q.weights
    eigs = np.linalg.eigvals(exponent)
    idx = int(np.argmax(np.abs(eigs.imag)))
    factor = np.pi / eigs[idx].imag
    s = CskMatrix(ccr8.grid, expm(factor * exponent), ccr8)
    with pytest.raises(NumericalFailure, match="branch"):
        csk_log(s)


def test_kernel_solver_roundtrip(ccr8, rng):
    solver = KernelSolver(ccr8)
    q = random_measure(rng, ccr8.grid, ccr8.dim, support=5)
    ham = ccr8.big @ q.weights
    recovered, report = solver.solve_measure(ham, support_index=5)
    assert np.allclose(recovered.weights, q.weights, atol=1e-11)
    assert report.relative <= 1e-12
    assert report.truncated_mass <= 1e-12
    assert np.isfinite(report.condition)


def test_kernel_solver_absolute_floor(ccr8):
    solver = KernelSolver(ccr8)
    size = ccr8.big.shape[0]
    tiny = 1e-14 * np.ones((size, size))
    _, report = solver.solve_measure(tiny)
    assert report.residual <= 1e-11


def test_kernel_solver_lstsq_fallback():
    grid = make_grid(1.0, 2)
    ccr = CcrKernel(grid, np.zeros((6, 6)))
    solver = KernelSolver(ccr)
    assert not (np.isfinite(solver.condition) and solver.condition < 1e12)
    measure, _ = solver.solve_measure(np.zeros((6, 6)))
    assert np.linalg.norm(measure.weights) == 0.0


def test_bch_product_matches_group_product(ccr8, rng):
    for _ in range(5):
        q1 = _scaled_measure(rng, ccr8, 0.8)
        q2 = _scaled_measure(rng, ccr8, 0.8)
        combined, report = bch_product(q1, q2, ccr8)
        s1 = chk_exp(lambda_product(ccr8, q1), ccr8)
        s2 = chk_exp(lambda_product(ccr8, q2), ccr8)
        product = s1.mat @ s2.mat
        rebuilt = chk_exp(lambda_product(ccr8, combined), ccr8)
        assert np.linalg.norm(rebuilt.mat - product) <= 1e-8 * (
            1.0 + np.linalg.norm(product)
        )
        assert report.relative <= 1e-6


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**16))
def test_exp_symplectic_property(seed):
    model = random_model(np.random.default_rng(2), n=2, m=2)
    ccr = build_ccr_kernel(model, make_grid(1.0, 4))
    rng = np.random.default_rng(seed)
    q = random_measure(rng, ccr.grid, 2, complex_entries=False)
    norm = np.linalg.norm(4j * ccr.big @ q.weights, 1)
    if norm > 0:
        q = _scale_measure(q, min(1.0, 4.0 / norm))
    s = chk_exp(lambda_product(ccr, q), ccr)
    residual, scale = symplectic_residual(s)
    assert residual <= 1e-10 * scale
