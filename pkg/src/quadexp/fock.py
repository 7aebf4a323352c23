"""Truncated Fock-space oracle for the quadratic-form commutator algebra.

Everything else in the package manipulates kernels; this module builds
actual operators.  Canonical pairs are represented by ladder-matrix
truncations on d levels, general variable sets by real linear maps of
canonical pairs realizing a target commutator table, and the bracket
identity for quadratic forms is checked by dense matrix commutators.

Truncation breaks the CCRs only at the top of the ladder, so every
comparison is projected onto low Fock levels, with a margin of two
levels per quadratic-form application.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, schur

from .errors import NumericalFailure
from .measures import build_ccr_kernel
from .model import symplectic_j

__all__ = [
    "TruncatedMode",
    "VariableSet",
    "BracketReport",
    "MultitimeReport",
    "build_single_time",
    "make_mode",
    "low_level_projector",
    "quadratic_form_matrix",
    "antisymmetric_remainder",
    "oracle_bracket_check",
    "oracle_multitime_check",
]

DIMENSION_BUDGET = 4096

# top-level defect of [q, p] = i I on d ladder levels, see TruncatedMode
CCR_DEFECT_TOL = 1e-12


def _ladder(cutoff):
    a = np.zeros((cutoff, cutoff), dtype=complex)
    a[np.arange(cutoff - 1), np.arange(1, cutoff)] = np.sqrt(
        np.arange(1, cutoff, dtype=float)
    )
    return a


@dataclass(frozen=True)
class TruncatedMode:
    """Canonical pair (q, p) on a d-level ladder truncation.

    The commutator [q, p] equals i times the identity except on the top
    level, where the truncation dumps a defect of size d - 1; projected
    onto the lowest d - 2 levels the CCR is exact to rounding.
    """

    cutoff: int
    position: np.ndarray
    momentum: np.ndarray

    def __post_init__(self):
        if self.cutoff < 4:
            raise ValueError("mode cutoff must be at least 4")
        for mat in (self.position, self.momentum):
            if mat.shape != (self.cutoff, self.cutoff):
                raise ValueError("mode matrices must be cutoff x cutoff")
            if np.linalg.norm(mat - mat.conj().T) > 1e-12 * (
                1.0 + np.linalg.norm(mat)
            ):
                raise ValueError("mode matrices must be Hermitian")
        low = low_level_projector((self.cutoff,), margin=2)
        comm = self.position @ self.momentum - self.momentum @ self.position
        defect = low @ (comm - 1j * np.eye(self.cutoff)) @ low
        if np.linalg.norm(defect) > CCR_DEFECT_TOL:
            raise ValueError("projected [q, p] deviates from i I")


def make_mode(cutoff):
    """Standard ladder truncation with q = (a + a*)/sqrt(2)."""
    a = _ladder(cutoff)
    q = (a + a.conj().T) / np.sqrt(2.0)
    p = 1j * (a.conj().T - a) / np.sqrt(2.0)
    return TruncatedMode(int(cutoff), q, p)


def low_level_projector(cutoffs, margin):
    """Projector onto levels below cutoff - margin in every factor."""
    factors = []
    for d in cutoffs:
        keep = np.zeros(d)
        keep[: max(d - margin, 0)] = 1.0
        factors.append(np.diag(keep))
    out = factors[0]
    for f in factors[1:]:
        out = np.kron(out, f)
    return out


def _embed(op, slot, cutoffs):
    """Lift a single-mode operator to the tensor product at position slot."""
    out = np.eye(1, dtype=complex)
    for i, d in enumerate(cutoffs):
        out = np.kron(out, op if i == slot else np.eye(d, dtype=complex))
    return out


@dataclass(frozen=True)
class VariableSet:
    """Hermitian variables on a mode tensor product with a known table.

    variables[a] acts on the full product space; ccr_target is the real
    antisymmetric matrix with [X_a, X_b] = 2i ccr_target[a, b] I on low
    levels.  ccr_residual() measures the projected deviation.
    """

    modes: tuple
    variables: tuple
    ccr_target: np.ndarray

    @property
    def dimension(self):
        return self.variables[0].shape[0]

    @property
    def cutoffs(self):
        return tuple(mode.cutoff for mode in self.modes)

    def projector(self, margin):
        return low_level_projector(self.cutoffs, margin)

    def ccr_residual(self):
        """Max projected norm of [X_a, X_b] - 2i theta_ab I, margin 2."""
        low = self.projector(2)
        eye = np.eye(self.dimension)
        worst = 0.0
        k = len(self.variables)
        for a in range(k):
            for b in range(a + 1, k):
                comm = (
                    self.variables[a] @ self.variables[b]
                    - self.variables[b] @ self.variables[a]
                )
                gap = low @ (comm - 2j * self.ccr_target[a, b] * eye) @ low
                worst = max(worst, float(np.linalg.norm(gap)))
        return worst


def _positive_schur_blocks(theta):
    """Real Schur congruence theta = Z T Z^T with T in 2x2 blocks [[0, v], [-v, 0]], v > 0."""
    t, z = schur(np.asarray(theta, dtype=float), output="real")
    n = theta.shape[0]
    scales = []
    for k in range(0, n, 2):
        v = t[k, k + 1]
        if abs(v) < 1e-12 * (1.0 + np.linalg.norm(theta)):
            raise NumericalFailure(
                "commutator table is numerically singular; no canonical pair "
                "decomposition exists"
            )
        if v < 0.0:
            # swapping the block's basis vectors transposes the block
            z[:, [k, k + 1]] = z[:, [k + 1, k]]
            v = -v
        scales.append(v)
    return z, np.asarray(scales)


def build_single_time(theta, cutoff):
    """Variables with commutator table [X, X^T] = 2i theta from ladder pairs.

    theta is brought to canonical antisymmetric form theta = Z T Z^T with
    positive block scales v_k; the map L = Z diag(sqrt(2 v_k) I_2) turns
    n/2 canonical pairs into X = L (q_1, p_1, ...) with the target table,
    since each pair contributes [q, p] = i and the congruence gives
    L J_canonical L^T = 2 theta.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.shape[0]
    if theta.shape != (n, n) or n % 2 != 0:
        raise ValueError("commutator table must be square of even size")
    if np.linalg.norm(theta + theta.T) > 1e-12 * (1.0 + np.linalg.norm(theta)):
        raise ValueError("commutator table must be antisymmetric")
    z, scales = _positive_schur_blocks(theta)
    pairs = n // 2
    modes = tuple(make_mode(cutoff) for _ in range(pairs))
    dim = int(np.prod([cutoff] * pairs))
    if dim > DIMENSION_BUDGET:
        raise NumericalFailure(
            f"tensor dimension {dim} exceeds the budget {DIMENSION_BUDGET}"
        )
    cutoffs = tuple(cutoff for _ in range(pairs))
    canon = []
    for k in range(pairs):
        canon.append(_embed(modes[k].position, k, cutoffs))
        canon.append(_embed(modes[k].momentum, k, cutoffs))
    lmap = z @ np.diag(np.repeat(np.sqrt(2.0 * scales), 2))
    variables = tuple(
        sum(lmap[a, b] * canon[b] for b in range(n)) for a in range(n)
    )
    return VariableSet(modes, variables, theta)


def quadratic_form_matrix(vars, q):
    """Operator of the quadratic form X^T q X, q complex symmetric."""
    q = np.asarray(q, dtype=complex)
    k = len(vars.variables)
    if q.shape != (k, k):
        raise ValueError("form matrix size does not match the variable count")
    if np.linalg.norm(q - q.T) > 1e-12 * (1.0 + np.linalg.norm(q)):
        raise ValueError("form matrix must be symmetric")
    out = np.zeros((vars.dimension, vars.dimension), dtype=complex)
    for a in range(k):
        row = sum(q[a, b] * vars.variables[b] for b in range(k))
        out += vars.variables[a] @ row
    return out


def antisymmetric_remainder(vars, q_anti):
    """Projected gap of X^T q X from its scalar value i <theta, q>.

    An antisymmetric kernel contributes only through the commutators, so
    its quadratic form collapses to the scalar i sum theta_ab q_ab times
    the identity; the returned residual measures that on low levels.
    """
    q_anti = np.asarray(q_anti, dtype=complex)
    if np.linalg.norm(q_anti + q_anti.T) > 1e-12 * (1.0 + np.linalg.norm(q_anti)):
        raise ValueError("remainder check expects an antisymmetric matrix")
    k = len(vars.variables)
    out = np.zeros((vars.dimension, vars.dimension), dtype=complex)
    for a in range(k):
        row = sum(q_anti[a, b] * vars.variables[b] for b in range(k))
        out += vars.variables[a] @ row
    scalar = 1j * np.sum(vars.ccr_target * q_anti)
    low = vars.projector(4)
    gap = low @ (out - scalar * np.eye(vars.dimension)) @ low
    return float(np.linalg.norm(gap)), complex(scalar)


@dataclass(frozen=True)
class BracketReport:
    """Projected residual of one bracket identity check."""

    residual: float
    tolerance: float
    passed: bool
    cutoff: int


def oracle_bracket_check(vars, q1, q2, tol=1e-8):
    """Check [X^T Q1 X, X^T Q2 X] = X^T 4i(Q1 theta Q2 - Q2 theta Q1) X.

    Both sides are dense operators; the difference is projected onto
    levels at least four below the cutoff in every mode, since each
    quadratic form reaches two levels up.
    """
    if min(vars.cutoffs) < 8:
        raise ValueError("bracket check needs mode cutoffs of at least 8")
    phi1 = quadratic_form_matrix(vars, q1)
    phi2 = quadratic_form_matrix(vars, q2)
    theta = vars.ccr_target
    q1 = np.asarray(q1, dtype=complex)
    q2 = np.asarray(q2, dtype=complex)
    combo = 4j * (q1 @ theta @ q2 - q2 @ theta @ q1)
    # the combination is symmetric for symmetric inputs; symmetrize so
    # quadratic_form_matrix accepts it at rounding level
    phi_combo = quadratic_form_matrix(vars, 0.5 * (combo + combo.T))
    low = vars.projector(4)
    gap = low @ ((phi1 @ phi2 - phi2 @ phi1) - phi_combo) @ low
    residual = float(np.linalg.norm(gap))
    return BracketReport(residual, float(tol), residual <= tol, min(vars.cutoffs))


@dataclass(frozen=True)
class MultitimeReport:
    """Residuals of the discrete-time two-point commutator table check."""

    table_residual: float
    bracket_residual: float
    equal_time_residual: float
    continuum_gap: float
    tolerance: float
    passed: bool
    dimension: int


def _discrete_table(model, grid):
    """Two-point table of X_{u+1} = E X_u + B dW_u with [dW, dW^T] = 2i h J.

    Theta_{u+1} = E Theta_u E^T + h B J B^T, and across nodes
    Lambda(j, k) = E^{j-k} Theta_k for j >= k, Theta_j (E^T)^{k-j} below.
    """
    n = model.dim
    count = grid.node_count
    e_step = expm(grid.step * model.drift)
    j_mat = symplectic_j(model.noise_dim)
    thetas = [model.theta]
    for _ in range(count - 1):
        thetas.append(
            e_step @ thetas[-1] @ e_step.T
            + grid.step * model.dispersion @ j_mat @ model.dispersion.T
        )
    table = np.zeros((count * n, count * n))
    for j in range(count):
        for k in range(count):
            if j >= k:
                block = np.linalg.matrix_power(e_step, j - k) @ thetas[k]
            else:
                block = thetas[j] @ np.linalg.matrix_power(e_step, k - j).T
            table[j * n : (j + 1) * n, k * n : (k + 1) * n] = block
    return table, thetas, e_step


def oracle_multitime_check(model, grid, cutoff=8, noise_cutoff=8, tol=1e-8):
    """Validate the discrete-time two-point CCR table on operators.

    Builds X_0 from the model's theta, fresh noise modes per step with
    table 2i h J, propagates X_{u+1} = e^{hA} X_u + B dW_u, and compares
    every cross-node commutator against the table the same recursion
    generates.  The table is exact at the discrete level, so the
    residual is pure truncation; the gap to the continuous kernel is
    reported as a diagnostic, not a pass condition.
    """
    n = model.dim
    m = model.noise_dim
    count = grid.node_count
    if count > 3:
        raise ValueError("multitime oracle is restricted to grids with N <= 2")
    steps = count - 1
    pairs = n // 2 + steps * (m // 2)
    dims = [cutoff] * (n // 2) + [noise_cutoff] * (steps * (m // 2))
    dim = int(np.prod(dims))
    if dim > DIMENSION_BUDGET:
        raise NumericalFailure(
            f"tensor dimension {dim} exceeds the budget {DIMENSION_BUDGET}"
        )

    # assemble canonical pairs mode by mode, then map blocks separately:
    # system block realizes theta, each noise block realizes h J
    z_sys, s_sys = _positive_schur_blocks(model.theta)
    j_small = symplectic_j(m)
    z_noise, s_noise = _positive_schur_blocks(grid.step * j_small)
    modes = tuple(make_mode(d) for d in dims)
    cutoffs = tuple(d for d in dims)
    canon = []
    for k in range(pairs):
        canon.append(_embed(modes[k].position, k, cutoffs))
        canon.append(_embed(modes[k].momentum, k, cutoffs))

    def _mapped(zmat, scales, offset, size):
        lmap = zmat @ np.diag(np.repeat(np.sqrt(2.0 * scales), 2))
        return [
            sum(lmap[a, b] * canon[offset + b] for b in range(size))
            for a in range(size)
        ]

    x_nodes = [_mapped(z_sys, s_sys, 0, n)]
    noises = [
        _mapped(z_noise, s_noise, n + u * m, m) for u in range(steps)
    ]
    e_step = expm(grid.step * model.drift)
    for u in range(steps):
        nxt = []
        for a in range(n):
            op = np.zeros((dim, dim), dtype=complex)
            for b in range(n):
                op += e_step[a, b] * x_nodes[u][b]
            for b in range(m):
                op += model.dispersion[a, b] * noises[u][b]
            nxt.append(op)
        x_nodes.append(nxt)

    table, thetas, _ = _discrete_table(model, grid)
    low = low_level_projector(cutoffs, 2)
    eye = np.eye(dim)
    scale = 1.0 + float(np.abs(table).max())
    worst = 0.0
    equal_time = 0.0
    for j in range(count):
        for k in range(count):
            for a in range(n):
                for b in range(n):
                    comm = (
                        x_nodes[j][a] @ x_nodes[k][b]
                        - x_nodes[k][b] @ x_nodes[j][a]
                    )
                    target = 2j * table[j * n + a, k * n + b]
                    gap = float(np.linalg.norm(low @ (comm - target * eye) @ low))
                    worst = max(worst, gap / scale)
                    if j == k:
                        equal_time = max(equal_time, gap / scale)

    # bracket identity on the grid, against the discrete table
    flat = [op for node in x_nodes for op in node]
    flat_set = VariableSet(modes, tuple(flat), table)
    rng = np.random.default_rng(0)
    q1 = rng.standard_normal((count * n, count * n))
    q2 = rng.standard_normal((count * n, count * n))
    q1 = 0.5 * (q1 + q1.T) / (count * n)
    q2 = 0.5 * (q2 + q2.T) / (count * n)
    bracket = oracle_bracket_check(flat_set, q1, q2, tol=tol)

    ccr = build_ccr_kernel(model, grid)
    continuum_gap = float(
        np.abs(table - ccr.big).max() / (1.0 + np.abs(ccr.big).max())
    )
    passed = worst <= tol and bracket.passed
    return MultitimeReport(
        worst,
        bracket.residual,
        equal_time,
        continuum_gap,
        float(tol),
        passed,
        dim,
    )
