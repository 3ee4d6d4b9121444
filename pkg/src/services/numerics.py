from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy import linalg, special

from src.conf import messages
from src.exceptions import NonConvergenceError, NumericsError, SingularLyapunovError

PD_TOLERANCE = 1e-12
LYAPUNOV_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    spectral_radius: float


def _as_square(matrix) -> np.ndarray:
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NumericsError(messages.NOT_SQUARE, str(m.shape))
    if not np.all(np.isfinite(m)):
        raise NumericsError(messages.NOT_FINITE)
    return m


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """
    The mat_exp function computes e^{At} by scaling and squaring with a degree-13 Pade
    approximant (scipy.linalg.expm).

    :param a: Square matrix A
    :param t: float: Time multiplier
    :return: The n x n matrix exponential
    """
    a = _as_square(a)
    if not np.isfinite(t):
        raise NumericsError(messages.NOT_FINITE, f't={t}')
    if a.shape[0] == 0:
        return a.copy()
    return linalg.expm(a * t)


def discretize_pair(a, b, tau: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    The discretize_pair function returns the zero-order-hold pair G = e^{A tau} and
    H = int_0^tau e^{A s} B ds from a single exponential of the block matrix
    [[A, B], [0, 0]] * tau.

    :param a: State matrix A (n x n)
    :param b: Input matrix B (n x m)
    :param tau: float: Sampling period
    :return: The tuple (G, H)
    """
    a = _as_square(a)
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    if b.shape[0] != a.shape[0]:
        raise NumericsError(messages.DIMENSION_MISMATCH, f'A {a.shape}, B {b.shape}')
    if not np.all(np.isfinite(b)):
        raise NumericsError(messages.NOT_FINITE)
    if not tau > 0:
        raise NumericsError(messages.TAU_NOT_POSITIVE, str(tau))
    n, m = b.shape
    block = np.zeros((n + m, n + m))
    block[:n, :n] = a
    block[:n, n:] = b
    exp_block = linalg.expm(block * tau)
    return exp_block[:n, :n], exp_block[:n, n:]


def spectrum(matrix) -> Spectrum:
    """
    The spectrum function returns all eigenvalues of a dense matrix (LAPACK Hessenberg
    reduction plus shifted QR) together with the spectral radius.

    :param matrix: Square matrix
    :return: A Spectrum with eigenvalues and spectral radius
    """
    m = _as_square(matrix)
    if m.shape[0] == 0:
        return Spectrum(np.zeros(0, dtype=complex), 0.0)
    try:
        eigenvalues = linalg.eigvals(m)
    except linalg.LinAlgError as err:
        raise NonConvergenceError(messages.EIG_NOT_CONVERGED, str(err)) from err
    return Spectrum(eigenvalues, float(np.max(np.abs(eigenvalues))))


def is_positive_definite(matrix, tol: float = PD_TOLERANCE) -> bool:
    """
    The is_positive_definite function attempts a Cholesky factorization of the symmetric
    part; a pivot below tol counts as failure.

    :param matrix: Square matrix
    :param tol: float: Smallest accepted squared pivot
    :return: True when the matrix is positive definite
    """
    m = _as_square(matrix)
    sym = 0.5 * (m + m.T)
    try:
        factor = np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        return False
    return bool(np.min(np.diag(factor)) ** 2 > tol)


def solve_discrete_lyapunov(g, q) -> Tuple[np.ndarray, bool]:
    """
    The solve_discrete_lyapunov function solves G^T M G - M = -Q through the n^2 x n^2
    Kronecker system (G^T kron G^T - I) vec(M) = -vec(Q) and reports whether M is
    positive definite.

    :param g: Square transition matrix G
    :param q: Symmetric positive definite weight Q
    :return: The tuple (M, positive_definite)
    """
    g = _as_square(g)
    q = _as_square(q)
    n = g.shape[0]
    if q.shape[0] != n:
        raise NumericsError(messages.DIMENSION_MISMATCH, f'G {g.shape}, Q {q.shape}')
    if not np.allclose(q, q.T) or not is_positive_definite(q):
        raise NumericsError(messages.Q_NOT_PD)
    eig = linalg.eigvals(g)
    products = np.abs(np.outer(eig, eig) - 1.0)
    if n and np.min(products) < LYAPUNOV_SINGULAR_TOL:
        raise SingularLyapunovError(messages.LYAPUNOV_SINGULAR)
    system = np.kron(g.T, g.T) - np.eye(n * n)
    try:
        vec_m = np.linalg.solve(system, -q.reshape(-1, order='F'))
    except np.linalg.LinAlgError as err:
        raise SingularLyapunovError(messages.LYAPUNOV_SINGULAR, str(err)) from err
    m = vec_m.reshape((n, n), order='F')
    m = 0.5 * (m + m.T)
    return m, is_positive_definite(m)


def beta_quantile(p: float, alpha_shape: float, beta_shape: float) -> float:
    """
    The beta_quantile function inverts the regularized incomplete beta function,
    returning x with I_x(alpha, beta) = p.

    :param p: float: Probability in [0, 1]
    :param alpha_shape: float: First shape parameter (> 0)
    :param beta_shape: float: Second shape parameter (> 0)
    :return: The quantile in [0, 1]
    """
    if not 0.0 <= p <= 1.0:
        raise NumericsError(messages.PROBABILITY_OUT_OF_RANGE, str(p))
    if not (alpha_shape > 0 and beta_shape > 0):
        raise NumericsError(messages.SHAPE_NOT_POSITIVE, f'{alpha_shape}, {beta_shape}')
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    return float(special.betaincinv(alpha_shape, beta_shape, p))


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], point) -> np.ndarray:
    """
    The fd_jacobian function approximates the Jacobian of func at point by central
    differences with step 1e-6 * max(1, |x_i|) per coordinate.

    :param func: Callable: Map from R^n to R^k
    :param point: Evaluation point
    :return: The k x n Jacobian
    """
    x0 = np.asarray(point, dtype=float).reshape(-1)
    f0 = np.atleast_1d(np.asarray(func(x0), dtype=float))
    if not np.all(np.isfinite(f0)):
        raise NumericsError(messages.JACOBIAN_NOT_FINITE, 'at the base point')
    jac = np.zeros((f0.size, x0.size))
    for i in range(x0.size):
        step = 1e-6 * max(1.0, abs(x0[i]))
        forward, backward = x0.copy(), x0.copy()
        forward[i] += step
        backward[i] -= step
        f_plus = np.atleast_1d(np.asarray(func(forward), dtype=float))
        f_minus = np.atleast_1d(np.asarray(func(backward), dtype=float))
        if not (np.all(np.isfinite(f_plus)) and np.all(np.isfinite(f_minus))):
            raise NumericsError(messages.JACOBIAN_NOT_FINITE, f'coordinate {i}')
        jac[:, i] = (f_plus - f_minus) / (forward[i] - backward[i])
    return jac
