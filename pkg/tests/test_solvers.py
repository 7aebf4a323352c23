import numpy as np
import pytest
from scipy.linalg import expm

from quadexp import (
    KernelMeasure,
    MeasurePath,
    NumericalFailure,
    atom_measure,
    atomic_corner_measure,
    build_ccr_kernel,
    chk_column_function,
    corner_atom_path,
    csk_path_from_midpoints,
    diagonal_lebesgue_path,
    forward_csk_evolution,
    forward_qef_measure,
    forward_t_evolution,
    g_path_magnus,
    inverse_toe_measure,
    is_nonanticipative,
    kernel_weighted_norm,
    laplace_recover_measure,
    make_grid,
    qef_from_csk_path,
    qef_psi_measure,
    roundtrip_f_residual,
    roundtrip_n_residual,
    spde_fast_path,
    spectral_abscissa,
    staggered_inverse_measures,
    t_route_residual,
    zero_measure,
)


def zero_path(grid, dim):
    return MeasurePath(grid, tuple(zero_measure(grid, dim) for _ in grid.nodes))


def test_corner_atom_path_structure(grid16, pi2):
    path = corner_atom_path(grid16, pi2, profile=lambda t: 1.0 + t)
    assert len(path.entries) == grid16.node_count
    for u, t in enumerate(grid16.nodes):
        entry = path.entries[u]
        assert entry.support_index == u
        assert np.allclose(entry.block(u, u), (1.0 + t) * pi2)
    assert path.derivative_entries is None


def test_diagonal_path_carries_exact_derivatives(grid16, pi2):
    path = diagonal_lebesgue_path(grid16, pi2)
    assert path.derivative_entries is not None
    for u in range(grid16.node_count):
        assert np.allclose(path.derivative_entries[u].block(u, u), pi2)
        assert path.entries[u].support_index <= u


def test_measure_path_rejects_anticipation(grid16, pi2):
    entries = [zero_measure(grid16, 2) for _ in range(grid16.node_count)]
    entries[0] = atomic_corner_measure(grid16, 3, pi2)
    with pytest.raises(ValueError, match="anticipates"):
        MeasurePath(grid16, tuple(entries))
    with pytest.raises(ValueError, match="entries"):
        MeasurePath(grid16, tuple(entries[:4]))


def test_zero_driver_is_identity_flow(ccr16):
    path = zero_path(ccr16.grid, ccr16.dim)
    s_path = forward_csk_evolution(path, ccr16)
    eye = np.eye(ccr16.big.shape[0])
    assert all(np.array_equal(s_path.mats[u], eye) for u in range(17))
    qef = forward_qef_measure(path, ccr16)
    for q in qef.measures:
        assert np.linalg.norm(q.weights) == 0.0


def test_first_step_collapses_to_midpoint_mass(model2, pi2):
    # One midpoint step with a real driver: conj(S_1) = S_1^{-1}, so
    # T_1 = S_1^2 = exp(4i h Lambda Fbar) and N_1 = h Fbar exactly.
    grid = make_grid(0.25, 1)
    ccr = build_ccr_kernel(model2, grid)
    path = corner_atom_path(grid, pi2)
    qef = forward_qef_measure(path, ccr)
    target = 0.5 * grid.step * (
        path.entries[0].weights + path.entries[1].weights
    )
    assert np.allclose(qef.measures[1].weights, target, atol=1e-13)
    assert qef.reality_residuals[1] <= 1e-12


def test_forward_flow_is_symplectic_at_n256(model2, pi2):
    grid = make_grid(1.0, 256)
    ccr = build_ccr_kernel(model2, grid)
    s_path = forward_csk_evolution(corner_atom_path(grid, pi2), ccr)
    assert s_path.validate() <= 1e-9


def test_step_norm_gate_reports_refinement(ccr16):
    huge = corner_atom_path(ccr16.grid, 1e4 * np.eye(2))
    with pytest.raises(NumericalFailure, match="refine"):
        forward_csk_evolution(huge, ccr16)


def test_forward_measures_are_real_and_nonanticipative(ccr16, pi2):
    qef = forward_qef_measure(corner_atom_path(ccr16.grid, pi2), ccr16)
    for u, q in zip(qef.node_indices, qef.measures):
        assert is_nonanticipative(q, u)
    assert max(qef.reality_residuals) <= 1e-10
    path = qef.n_path()
    assert len(path.entries) == ccr16.grid.node_count


def test_sparse_extraction_matches_full(ccr16, pi2):
    s_path = forward_csk_evolution(corner_atom_path(ccr16.grid, pi2), ccr16)
    full = qef_from_csk_path(s_path, ccr16)
    last = ccr16.grid.steps
    sparse = qef_from_csk_path(s_path, ccr16, nodes=[last, 8])
    assert sparse.node_indices == (8, last)
    for slot, u in enumerate(sparse.node_indices):
        gap = np.linalg.norm(sparse.measures[slot].weights - full.measures[u].weights)
        assert gap <= 1e-9 * (1.0 + np.linalg.norm(full.measures[u].weights))
    with pytest.raises(ValueError, match="node"):
        qef_from_csk_path(s_path, ccr16, nodes=[99])


def test_imaginary_driver_leaves_t_at_identity(ccr16, pi2):
    grid = ccr16.grid
    entries = tuple(
        atom_measure(grid, u, u, 1j * pi2) for u in range(grid.node_count)
    )
    path = MeasurePath(grid, entries)
    t_mats = forward_t_evolution(path, ccr16)
    eye = np.eye(ccr16.big.shape[0])
    for u in range(grid.node_count):
        assert np.array_equal(t_mats[u], eye)
    s_path = forward_csk_evolution(path, ccr16)
    assert np.linalg.norm(s_path.mats[-1] - eye) > 1e-3


def test_two_route_agreement_refines_at_second_order(model2, pi2):
    residuals = []
    for steps in (8, 16):
        grid = make_grid(1.0, steps)
        ccr = build_ccr_kernel(model2, grid)
        residuals.append(t_route_residual(corner_atom_path(grid, pi2), ccr))
    assert residuals[1] < residuals[0]
    order = np.log2(residuals[0] / residuals[1])
    assert 1.5 <= order <= 3.0


def test_roundtrip_atomic_closes_through_the_flow(model2, pi2):
    grid = make_grid(1.0, 16)
    ccr = build_ccr_kernel(model2, grid)
    report = roundtrip_f_residual(corner_atom_path(grid, pi2), ccr)
    # The regenerated flow reproduces the measure path to rounding; the
    # midpoint driver gap stays at the O(||Pi||^2) phase offset, which
    # identifies the atomic input as a non-canonical representative.
    assert report.invariant_residual <= 1e-9
    assert report.direct_residual > 1e-5


def test_roundtrip_direct_gap_closes_on_canonical_drivers(model2, pi2):
    grid = make_grid(1.0, 16)
    ccr = build_ccr_kernel(model2, grid)
    inverse = inverse_toe_measure(diagonal_lebesgue_path(grid, pi2), ccr)
    report = roundtrip_f_residual(inverse.f_path, ccr)
    assert report.invariant_residual <= 1e-9
    assert report.direct_residual <= 1e-5


def test_roundtrip_n_direction_small(model2, pi2):
    grid = make_grid(1.0, 16)
    ccr = build_ccr_kernel(model2, grid)
    residual = roundtrip_n_residual(diagonal_lebesgue_path(grid, pi2), ccr)
    assert residual <= 1e-6


def test_staggered_inverse_reproduces_flow(model2, pi2):
    grid = make_grid(1.0, 12)
    ccr = build_ccr_kernel(model2, grid)
    qef = forward_qef_measure(corner_atom_path(grid, pi2), ccr)
    recovered = staggered_inverse_measures(qef.measures, ccr)
    assert len(recovered) == grid.steps
    regen = csk_path_from_midpoints([m.weights for m in recovered], ccr)
    check = qef_from_csk_path(regen, ccr)
    for u in range(grid.node_count):
        gap = kernel_weighted_norm(
            ccr, check.measures[u].weights - qef.measures[u].weights
        )
        scale = 1.0 + kernel_weighted_norm(ccr, qef.measures[u].weights)
        assert gap <= 1e-9 * scale


def test_midpoint_count_is_validated(ccr16):
    size = ccr16.big.shape[0]
    with pytest.raises(ValueError, match="midpoint"):
        csk_path_from_midpoints([np.zeros((size, size))] * 3, ccr16)


def test_psi_corner_tends_to_pi(model2, pi2):
    errors = []
    for steps in (16, 32):
        grid = make_grid(1.0, steps)
        ccr = build_ccr_kernel(model2, grid)
        path = diagonal_lebesgue_path(grid, pi2)
        u = steps // 2
        psi = qef_psi_measure(path.entries[u], path.derivative_entries[u], ccr)
        errors.append(np.linalg.norm(psi.corner_block - pi2))
        assert psi.reality_residual <= 1e-9
        assert np.isfinite(psi.interior_mass)
        assert np.isfinite(psi.edge_mass)
        assert psi.corner_mass == pytest.approx(
            np.linalg.norm(psi.corner_block)
        )
    assert errors[1] < errors[0]
    assert errors[1] <= 0.6 * errors[0]


def test_spde_fast_path_matches_general(model2, pi2):
    grid = make_grid(1.0, 32)
    ccr = build_ccr_kernel(model2, grid)
    fast = spde_fast_path(model2, pi2, grid)
    general = forward_csk_evolution(corner_atom_path(grid, pi2), ccr)
    for u in range(grid.node_count):
        gap = np.linalg.norm(fast.mats[u] - general.mats[u])
        assert gap <= 1e-10 * (1.0 + np.linalg.norm(general.mats[u]))
    with pytest.raises(ValueError, match="symmetric"):
        spde_fast_path(model2, np.array([[0.0, 1.0], [0.0, 0.0]]), grid)


def test_g_path_zero_driver(ccr16):
    path = zero_path(ccr16.grid, ccr16.dim)
    g_path, ys, reports = g_path_magnus(path, ccr16)
    assert all(np.linalg.norm(y) == 0.0 for y in ys)
    assert all(np.linalg.norm(q.weights) == 0.0 for q in g_path.entries)


def test_g_path_exponent_matches_flow(model2, pi2):
    gaps = []
    for steps in (16, 32):
        grid = make_grid(1.0, steps)
        ccr = build_ccr_kernel(model2, grid)
        f_path = corner_atom_path(grid, 0.5 * pi2)
        g_path, ys, _ = g_path_magnus(f_path, ccr)
        s_path = forward_csk_evolution(f_path, ccr)
        terminal = expm(4j * ys[-1])
        gaps.append(
            np.linalg.norm(terminal - s_path.mats[-1])
            / (1.0 + np.linalg.norm(s_path.mats[-1]))
        )
    assert gaps[0] <= 1e-4 and gaps[1] <= 1e-4
    assert gaps[1] <= 0.4 * gaps[0]


def test_g_path_is_half_the_measure_on_canonical_drivers(model2, pi2):
    # The factor-of-two relation between exponent and measure holds at
    # scheme order on the canonical driver class; an atomic driver
    # stalls at its phase gap instead, like the direct roundtrip.
    half_gaps = []
    for steps in (16, 32):
        grid = make_grid(1.0, steps)
        ccr = build_ccr_kernel(model2, grid)
        f_path = inverse_toe_measure(diagonal_lebesgue_path(grid, pi2), ccr).f_path
        g_path, _, _ = g_path_magnus(f_path, ccr)
        s_path = forward_csk_evolution(f_path, ccr)
        qef = qef_from_csk_path(s_path, ccr, nodes=[steps])
        diff = g_path.entries[-1].weights - 0.5 * qef.measures[0].weights
        half_gaps.append(
            kernel_weighted_norm(ccr, diff)
            / kernel_weighted_norm(ccr, qef.measures[0].weights)
        )
    assert half_gaps[0] <= 1e-3
    assert half_gaps[1] <= 0.4 * half_gaps[0]


def test_chk_column_function_interpolates_nodes(model2, pi2):
    grid = make_grid(1.0, 6)
    ccr = build_ccr_kernel(model2, grid)
    q = diagonal_lebesgue_path(grid, pi2).entries[-1]
    col = 2
    column = chk_column_function(model2, q, col)
    ham = ccr.big @ q.weights
    n = model2.dim
    for j in (0, 3, 6):
        block = ham[j * n : (j + 1) * n, col * n : (col + 1) * n]
        assert np.allclose(column(grid.nodes[j]), block, atol=1e-12)


def _laplace_demo_model():
    from quadexp import OqhoModel

    return OqhoModel(
        np.array([[0.0, 1.0], [-1.0, 0.0]]),
        np.array([[-0.5, 0.3], [-0.3, -0.5]]),
        np.eye(2),
    )


def test_laplace_recovery_of_atom_masses(pi2):
    model = _laplace_demo_model()
    grid = make_grid(8.0, 2)
    masses = [0.3 * pi2, 0.7 * pi2, 0.2 * pi2]
    w = np.zeros((6, 6))
    for j, m in enumerate(masses):
        w[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = m
    q = KernelMeasure(grid, w)
    column = chk_column_function(model, q, 0)
    width = abs(spectral_abscissa(model))
    samples = [width * (0.2 + 0.6 * k / 5) for k in range(6)]
    recovered, condition = laplace_recover_measure(column, model, grid, samples)
    assert condition < 1e6
    # Column 0 of a diagonal measure holds mass only in its (0, 0) block.
    assert np.allclose(recovered[0], masses[0], atol=1e-6)
    assert np.allclose(recovered[1], 0.0, atol=1e-6)
    assert np.allclose(recovered[2], 0.0, atol=1e-6)


def test_laplace_recovery_needs_enough_samples(pi2):
    model = _laplace_demo_model()
    grid = make_grid(8.0, 2)
    q = KernelMeasure(grid, np.zeros((6, 6)))
    column = chk_column_function(model, q, 0)
    with pytest.raises(ValueError, match="samples"):
        laplace_recover_measure(column, model, grid, [0.3, 0.4])


def test_laplace_recovery_rejects_degenerate_samples(pi2):
    model = _laplace_demo_model()
    grid = make_grid(8.0, 2)
    q = KernelMeasure(grid, np.zeros((6, 6)))
    column = chk_column_function(model, q, 0)
    samples = [0.3, 0.3 + 1e-14, 0.3 + 2e-14]
    with pytest.raises(NumericalFailure, match="condition"):
        laplace_recover_measure(column, model, grid, samples)
