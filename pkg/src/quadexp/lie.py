"""Exponential bridge between kernel measures and symplectic kernels.

The map Q -> 4i Lambda Q identifies the commutator algebra of quadratic
forms with a matrix Lie algebra, so time-ordered products of quadratic
exponentials become products of stacked matrices.  This module supplies
the calculus both directions need:

  * the scalar functions Ups(z) = (e^z - 1)/z, its reciprocal Mho, and
    sinhc(z) = sinh(z)/z, which govern derivatives of matrix
    exponentials along paths (Ups(z) = e^{z/2} sinhc(z/2) identically);
  * their superoperator versions applied to the adjoint action ad_x,
    evaluated as integrals of conjugations,

        Ups(ad_x)(y)   = integral_0^1  e^{lam x} y e^{-lam x} dlam,
        sinhc(ad_x)(y) = (1/2) integral_{-1}^{1} e^{lam x} y e^{-lam x} dlam,

    by Gauss-Legendre quadrature, and Mho(ad_x) by its Bernoulli series
    (radius 2 pi, guarded);
  * the exponential of a stacked Hamiltonian kernel, which is a complex
    symplectic kernel preserving the commutator kernel congruence
    S Lambda S^T = Lambda, and the anchored matrix logarithm plus
    least-squares kernel solve inverting it back to a measure.

Everything here is grid-level linear algebra; the time direction lives
in the solver module.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import expm, logm, lu_factor, lu_solve

from .errors import NumericalFailure
from .measures import ChkMatrix, KernelMeasure, project_support

__all__ = [
    "CskMatrix",
    "ChkSolveReport",
    "MagnusCheckReport",
    "ups_scalar",
    "mho_scalar",
    "sinhc_scalar",
    "ups_superop",
    "sinhc_superop",
    "mho_superop",
    "chk_exp",
    "csk_log",
    "symplectic_residual",
    "solve_measure_from_chk",
    "bch_product",
    "magnus_derivative_check",
]

# Safety bound on the 1-norm of an exponent before expm is attempted.
EXP_NORM_BOUND = 50.0

# The anchored logarithm must reproduce its input to this relative accuracy.
LOG_RECONSTRUCTION_TOL = 1e-9

# Kernel solve acceptance: residual over ||ham||.
SOLVE_RELATIVE_TOL = 1e-6
# floor under the relative test: right-hand sides near the rounding level
# of upstream logarithms carry unfittable eps-size junk
SOLVE_ABSOLUTE_TOL = 1e-11

# Symplectic congruence residual, relative to (1 + ||Lambda|| ||S||^2).
SYMPLECTIC_TOL = 1e-10

# Scalar functions switch to their Taylor forms below this modulus.
SERIES_SWITCH = 1e-3

# Bernoulli series guard: the adjoint norm bound must stay inside this
# fraction of the convergence radius 2 pi.
MHO_RADIUS_FRACTION = 0.9

DEFAULT_QUAD_NODES = 16
DEFAULT_BERNOULLI_ORDER = 16

_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# scalar functions

def ups_scalar(z):
    """Ups(z) = (e^z - 1)/z, Taylor below the series switch; Ups(0) = 1."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < SERIES_SWITCH
    zs = np.where(small, z, 0.0)
    series = np.zeros_like(z)
    # 8 Taylor terms: sum_{k=0..7} z^k / (k+1)!
    coeff = 1.0
    power = np.ones_like(z)
    for k in range(8):
        coeff = coeff / (k + 1.0)
        series = series + coeff * power
        power = power * zs
    zb = np.where(small, 1.0, z)
    # expm1 keeps the numerator accurate near the series switch, where
    # exp(z) - 1 would cancel to eps / |z| relative error.
    direct = np.expm1(zb) / zb
    result = np.where(small, series, direct)
    return result if result.ndim else complex(result)


def sinhc_scalar(z):
    """sinhc(z) = sinh(z)/z, Taylor below the series switch; sinhc(0) = 1."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < SERIES_SWITCH
    zs = np.where(small, z, 0.0)
    # 8 Taylor terms: sum_{k=0..7} z^{2k} / (2k+1)!
    z2 = zs * zs
    term = np.ones_like(z)
    series = term.copy()
    for k in range(1, 8):
        term = term * z2 / ((2 * k) * (2 * k + 1.0))
        series = series + term
    zb = np.where(small, 1.0, z)
    direct = np.sinh(zb) / zb
    result = np.where(small, series, direct)
    return result if result.ndim else complex(result)


def _bernoulli_over_factorial(order):
    """Coefficients c_k = B_k / k! of z/(e^z - 1) up to degree order."""
    coeffs = np.zeros(order + 1)
    coeffs[0] = 1.0
    # Recurrence from (e^z - 1)/z * Mho(z) = 1: the degree-k coefficient
    # of the product vanishes for k >= 1.
    factorials = [1.0]
    for k in range(1, order + 2):
        factorials.append(factorials[-1] * k)
    for k in range(1, order + 1):
        acc = 0.0
        for j in range(k):
            acc += coeffs[j] / factorials[k + 1 - j]
        coeffs[k] = -acc
    return coeffs


def mho_scalar(z, order=8):
    """Mho(z) = z/(e^z - 1) = 1/Ups(z), Bernoulli series below the switch.

    Defined away from the poles at 2 pi i k, k nonzero; a point closer
    than 1e-6 to a pole raises.
    """
    z = np.asarray(z, dtype=complex)
    # pole guard: e^z = 1 away from the origin
    offgrid = np.abs(np.exp(z) - 1.0)
    near_pole = (offgrid < 1e-6) & (np.abs(z) > 1.0)
    if np.any(near_pole):
        raise NumericalFailure("mho evaluated too close to a pole 2 pi i k")
    small = np.abs(z) < SERIES_SWITCH
    zs = np.where(small, z, 0.0)
    coeffs = _bernoulli_over_factorial(order)
    series = np.zeros_like(z)
    power = np.ones_like(z)
    for c in coeffs:
        series = series + c * power
        power = power * zs
    zb = np.where(small, 1.0, z)
    direct = zb / np.expm1(zb)
    result = np.where(small, series, direct)
    return result if result.ndim else complex(result)


# ---------------------------------------------------------------------------
# conjugation families and quadrature superoperators

def _adjoint_norm_bound(x):
    """Cheap upper bound on the spectral norm of ad_x = [x, .]."""
    one = np.linalg.norm(x, 1)
    inf = np.linalg.norm(x, np.inf)
    fro = np.linalg.norm(x)
    return 2.0 * min(fro, np.sqrt(one * inf))


class _ConjugationFamily:
    """Evaluates lam -> e^{lam x} y e^{-lam x} for many lam efficiently.

    Prefers a one-time eigendecomposition of x, in whose basis the
    conjugation is the Hadamard product with exp(lam (d_i - d_j)); falls
    back to per-lam expm and linear solves when the eigenbasis is poorly
    conditioned.  Both strategies evaluate the same integrand, so the
    quadrature that consumes them is unchanged.
    """

    def __init__(self, x, y):
        self.x = x
        self.y = y
        self._mode = "expm"
        scale = 1.0 + np.linalg.norm(x)
        try:
            d, v = np.linalg.eig(x)
            cond = np.linalg.cond(v)
            recon = np.linalg.norm((v * d) @ np.linalg.inv(v) - x)
            if np.isfinite(cond) and cond < 1e6 and recon < 1e-10 * scale:
                self._mode = "eig"
                self._d = d
                self._delta = d[:, None] - d[None, :]
                vinv = np.linalg.inv(v)
                self._v = v
                self._vinv = vinv
                self._ytil = vinv @ y @ v
        except np.linalg.LinAlgError:
            pass

    def weighted_sum(self, lams, weights):
        """sum_q weights[q] * e^{lam_q x} y e^{-lam_q x}, fixed order."""
        if self._mode == "eig":
            kernel = np.zeros_like(self._delta)
            for lam, w in zip(lams, weights):
                kernel = kernel + w * np.exp(lam * self._delta)
            return self._v @ (kernel * self._ytil) @ self._vinv
        acc = np.zeros_like(self.y, dtype=complex)
        for lam, w in zip(lams, weights):
            e = expm(lam * self.x)
            conj = np.linalg.solve(e.T, (e @ self.y).T).T
            acc = acc + w * conj
        return acc


def _gauss_interval(nodes, lo, hi):
    base, weights = leggauss(nodes)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    return mid + half * base, half * weights


def ups_superop(x, y, nodes=DEFAULT_QUAD_NODES):
    """Ups(ad_x)(y) by Gauss-Legendre quadrature over [0, 1].

    Returns (value, error_estimate); the estimate is the difference
    against the doubled-node rule, evaluated on the same conjugation
    family so it costs little beyond the extra weights.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    family = _ConjugationFamily(x, y)
    lams, weights = _gauss_interval(nodes, 0.0, 1.0)
    value = family.weighted_sum(lams, weights)
    lams2, weights2 = _gauss_interval(2 * nodes, 0.0, 1.0)
    refined = family.weighted_sum(lams2, weights2)
    return value, float(np.linalg.norm(refined - value))


def sinhc_superop(x, y, nodes=DEFAULT_QUAD_NODES):
    """sinhc(ad_x)(y) = (1/2) integral over [-1, 1] of the conjugation.

    Returns (value, error_estimate) like :func:`ups_superop`.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    family = _ConjugationFamily(x, y)
    lams, weights = _gauss_interval(nodes, -1.0, 1.0)
    value = 0.5 * family.weighted_sum(lams, weights)
    lams2, weights2 = _gauss_interval(2 * nodes, -1.0, 1.0)
    refined = 0.5 * family.weighted_sum(lams2, weights2)
    return value, float(np.linalg.norm(refined - value))


def mho_superop(x, y, order=DEFAULT_BERNOULLI_ORDER):
    """Mho(ad_x)(y) by the truncated Bernoulli series of ad_x.

    Requires the adjoint norm bound 2||x|| to stay below 0.9 * 2 pi so
    the series converges with margin.  Returns (value, tail_estimate).
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    bound = _adjoint_norm_bound(x)
    if bound >= MHO_RADIUS_FRACTION * _TWO_PI:
        raise NumericalFailure(
            f"adjoint norm bound {bound:.3e} outside the Bernoulli series "
            f"guard {MHO_RADIUS_FRACTION * _TWO_PI:.3e}"
        )
    coeffs = _bernoulli_over_factorial(order)
    term = y
    value = coeffs[0] * term
    last = 0.0
    for k in range(1, order + 1):
        term = x @ term - term @ x
        if coeffs[k] != 0.0:
            contribution = coeffs[k] * term
            value = value + contribution
            last = np.linalg.norm(contribution)
    ratio = bound / _TWO_PI
    tail = last * ratio / max(1.0 - ratio, 1e-12)
    return value, float(tail)


# ---------------------------------------------------------------------------
# exponential and logarithm

@dataclass(frozen=True)
class CskMatrix:
    """Stacked complex symplectic kernel S with its commutator kernel.

    Construction verifies the congruence S Lambda S^T = Lambda within
    SYMPLECTIC_TOL * (1 + ||Lambda|| ||S||^2); the exponential of any
    Hamiltonian kernel satisfies it exactly in exact arithmetic.
    """

    grid: object
    mat: np.ndarray
    ccr: object

    def __post_init__(self):
        mat = np.array(self.mat, dtype=complex)
        if mat.shape != self.ccr.big.shape:
            raise ValueError("matrix shape does not match the kernel")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)
        residual, scale = symplectic_residual_raw(mat, self.ccr.big)
        if residual > SYMPLECTIC_TOL * scale:
            raise NumericalFailure(
                f"symplectic residual {residual:.3e} exceeds "
                f"{SYMPLECTIC_TOL:.0e} * {scale:.3e}"
            )


def symplectic_residual_raw(mat, big):
    """(||S Lambda S^T - Lambda||_F, 1 + ||Lambda||_F ||S||_F^2)."""
    residual = np.linalg.norm(mat @ big @ mat.T - big)
    scale = 1.0 + np.linalg.norm(big) * np.linalg.norm(mat) ** 2
    return float(residual), float(scale)


def symplectic_residual(csk):
    """Congruence residual of a symplectic kernel against its own Lambda."""
    return symplectic_residual_raw(csk.mat, csk.ccr.big)


def chk_exp(chk, ccr, scale=4j):
    """Matrix exponential of scale * ham as a symplectic kernel.

    scale = 4i realizes the isomorphism exp(4i Lambda Q); solvers pass
    their own step factors.  The exponent 1-norm is gated at
    EXP_NORM_BOUND before expm runs.
    """
    exponent = scale * chk.ham
    size = np.linalg.norm(exponent, 1)
    if size > EXP_NORM_BOUND:
        raise NumericalFailure(
            f"exponent 1-norm {size:.3e} exceeds the safety bound {EXP_NORM_BOUND}"
        )
    return CskMatrix(chk.grid, expm(exponent), ccr)


def _principal_log(mat):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ham = logm(mat)
    return np.asarray(ham, dtype=complex)


def _log_reconstruction_ok(ham, mat):
    residual = np.linalg.norm(expm(ham) - mat)
    return residual <= LOG_RECONSTRUCTION_TOL * max(np.linalg.norm(mat), 1.0)


def csk_log(csk, anchor=None):
    """Hamiltonian kernel H with exp(H) = S, branch-corrected to an anchor.

    Without an anchor the principal logarithm is returned, and an
    eigenvalue of S within angle 1e-6 of the negative real axis raises,
    since the principal branch is ambiguous there.  With an anchor
    (a ChkMatrix or plain matrix from a neighboring step) the branch is
    chosen to keep H near the anchor: if the principal log already lies
    within pi of it nothing moves, otherwise per-eigenvalue 2 pi i
    shifts are applied in the eigenbasis of S.

    Returns a ChkMatrix with source=None; reconstruction to
    LOG_RECONSTRUCTION_TOL relative accuracy is enforced.
    """
    mat = csk.mat
    anchor_mat = None
    if anchor is not None:
        anchor_mat = anchor.ham if isinstance(anchor, ChkMatrix) else np.asarray(anchor)
        if anchor_mat.shape != mat.shape:
            raise ValueError("anchor shape does not match the kernel")

    ham = _principal_log(mat)
    if not _log_reconstruction_ok(ham, mat):
        raise NumericalFailure("logarithm failed to reconstruct its input")

    if anchor_mat is None:
        eigvals = np.linalg.eigvals(mat)
        angles = np.abs(np.pi - np.abs(np.angle(eigvals)))
        if np.any(angles < 1e-6):
            raise NumericalFailure(
                "eigenvalue on the negative real axis: logarithm branch is "
                "ambiguous without an anchor"
            )
        return ChkMatrix(csk.grid, ham, None)

    if np.linalg.norm(ham - anchor_mat, 2) < np.pi:
        return ChkMatrix(csk.grid, ham, None)

    # Principal branch is far from the anchor: look for 2 pi i shifts of
    # individual eigenvalues that close the gap.  Diagonalize S, match
    # each eigenvector against the anchor through a Rayleigh quotient,
    # and round the imaginary gap to whole turns.
    try:
        d, v = np.linalg.eig(mat)
        vinv = np.linalg.inv(v)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(
            "branch correction failed: eigenbasis unavailable"
        ) from exc
    log_d = np.log(d)
    anchor_diag = np.diag(vinv @ anchor_mat @ v)
    turns = np.round((anchor_diag.imag - log_d.imag) / _TWO_PI)
    corrected = log_d + 2j * np.pi * turns
    ham = v @ (corrected[:, None] * vinv)
    if not _log_reconstruction_ok(ham, mat):
        raise NumericalFailure(
            "branch-corrected logarithm failed to reconstruct its input"
        )
    if np.linalg.norm(ham - anchor_mat, 2) >= np.pi:
        raise NumericalFailure(
            "negative-axis crossing: no branch of the logarithm lies near "
            "the anchor"
        )
    return ChkMatrix(csk.grid, ham, None)


# ---------------------------------------------------------------------------
# kernel solve and group product

@dataclass(frozen=True)
class ChkSolveReport:
    """Diagnostics of a kernel least-squares solve."""

    residual: float
    relative: float
    condition: float
    asymmetry: float
    truncated_mass: float


class KernelSolver:
    """Cached factorization of a stacked commutator kernel.

    The kernel is fixed per grid and model while solvers call for many
    right-hand sides, so the LU factorization and condition number are
    computed once.  A rank-deficient kernel (for example when B J B^T
    is singular) is detected through the condition estimate and falls
    back to least squares, whose residual then reports the failure.
    """

    def __init__(self, ccr):
        self.ccr = ccr
        self.condition = float(np.linalg.cond(ccr.big))
        self._lu = None
        if np.isfinite(self.condition) and self.condition < 1e12:
            self._lu = lu_factor(ccr.big)

    def solve_raw(self, rhs):
        if self._lu is not None:
            return lu_solve(self._lu, rhs)
        solution, *_ = np.linalg.lstsq(self.ccr.big, rhs, rcond=None)
        return solution

    def solve_measure(self, ham, support_index=None):
        """Measure with big @ weights = ham, symmetrized and projected.

        Returns (KernelMeasure, ChkSolveReport); raises when the final
        relative residual exceeds SOLVE_RELATIVE_TOL.
        """
        raw = self.solve_raw(ham)
        asymmetry = float(np.linalg.norm(raw - raw.T))
        measure = KernelMeasure(self.ccr.grid, raw)
        truncated = 0.0
        if support_index is not None:
            measure, truncated = project_support(measure, support_index)
        residual = float(np.linalg.norm(self.ccr.big @ measure.weights - ham))
        ham_norm = float(np.linalg.norm(ham))
        relative = residual / ham_norm if ham_norm > 0.0 else 0.0
        report = ChkSolveReport(
            residual, relative, self.condition, asymmetry, truncated
        )
        if residual > ham_norm * SOLVE_RELATIVE_TOL + SOLVE_ABSOLUTE_TOL:
            raise NumericalFailure(
                f"kernel solve residual {residual:.3e} exceeds "
                f"{SOLVE_RELATIVE_TOL:.0e} relative to {ham_norm:.3e} "
                f"(condition {self.condition:.3e})"
            )
        return measure, report


def solve_measure_from_chk(chk, ccr, support_index=None):
    """Recover the measure whose CHK is the given matrix.

    One-shot form of :meth:`KernelSolver.solve_measure`; factorizes the
    kernel on every call, so path solvers hold a KernelSolver instead.
    """
    return KernelSolver(ccr).solve_measure(chk.ham, support_index)


def bch_product(q1, q2, ccr):
    """Measure Q with exp(4i L Q) = exp(4i L Q1) exp(4i L Q2).

    Computes the group product of the two exponentials and pulls it back
    through the anchored logarithm (anchored at the sum, the leading
    term of the expansion) and the kernel solve.  Returns
    (KernelMeasure, ChkSolveReport).
    """
    from .measures import lambda_product  # local to avoid cycle at import

    s1 = chk_exp(lambda_product(ccr, q1), ccr)
    s2 = chk_exp(lambda_product(ccr, q2), ccr)
    product = CskMatrix(ccr.grid, s1.mat @ s2.mat, ccr)
    anchor = 4j * (ccr.big @ (q1.weights + q2.weights))
    ham = csk_log(product, anchor=anchor)
    support = max(q1.support_index, q2.support_index)
    return KernelSolver(ccr).solve_measure(ham.ham / 4j, support_index=support)


# ---------------------------------------------------------------------------
# derivative identity check

@dataclass(frozen=True)
class MagnusCheckReport:
    """Relative residuals of the exponential derivative identities."""

    left_max: float
    right_max: float
    samples: int


def magnus_derivative_check(phi_path, h, nodes=DEFAULT_QUAD_NODES):
    """Check (e^phi)' = Ups(ad_phi)(phi') e^phi = e^phi Ups(-ad_phi)(phi').

    phi_path is a sequence of square matrices sampled with uniform
    spacing h; derivatives are taken by central differences, so the
    residuals decrease at second order under refinement.  Returns the
    maximal relative residuals of both identities over the interior
    samples.
    """
    path = [np.asarray(p, dtype=complex) for p in phi_path]
    if len(path) < 3:
        raise ValueError("need at least three samples for central differences")
    left_max = 0.0
    right_max = 0.0
    for i in range(1, len(path) - 1):
        phi = path[i]
        dphi = (path[i + 1] - path[i - 1]) / (2.0 * h)
        fd = (expm(path[i + 1]) - expm(path[i - 1])) / (2.0 * h)
        e = expm(phi)
        left, _ = ups_superop(phi, dphi)
        right, _ = ups_superop(-phi, dphi)
        denom = 1.0 + np.linalg.norm(fd)
        left_max = max(left_max, np.linalg.norm(fd - left @ e) / denom)
        right_max = max(right_max, np.linalg.norm(fd - e @ right) / denom)
    return MagnusCheckReport(float(left_max), float(right_max), len(path) - 2)
