"""
Discrete optimal transport.

- :func:`emd_exact` exact balanced transport (POT network simplex, or a HiGHS linear program).
- :func:`sinkhorn` entropic transport, POT log-domain iterations.
- :func:`unbalanced_sinkhorn` entropic transport with KL-relaxed marginals.
- :func:`growth_targets` per-source growth rates from an unbalanced plan.
- :func:`mccann_interpolate` displacement interpolation along a plan.

Entropy follows the ``sum(g log g - g)`` convention, so the unbalanced potentials satisfy
``f = alpha / (alpha + reg) * reg * (log a - logsumexp((g - M) / reg))``; ``alpha = inf``
turns that marginal into a hard constraint.
"""
import logging
import math

import numpy as np
import ot
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import cdist
from scipy.special import logsumexp, xlogy

from config.config import settings
from exceptions import ConvergenceError, DimensionError, UserInputError
from models.coupling import Coupling
from schemas.transport import SinkhornConfig, UnbalancedOTConfig

logger = logging.getLogger(f"{settings.app_name}.{__name__}")

EXACT_METHODS = ("network_simplex", "linprog")


def cost_matrix(X: np.ndarray, Y: np.ndarray, p: int = 1) -> np.ndarray:
    """Ground cost ``|x - y|^p`` between every pair of rows."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"point sets have dimensions {X.shape[1]} and {Y.shape[1]}")
    if p == 2:
        return cdist(X, Y, metric="sqeuclidean")
    return cdist(X, Y, metric="euclidean") ** p


def _weights(points: np.ndarray, weights, side: str) -> np.ndarray:
    n = np.atleast_2d(points).shape[0]
    if weights is None:
        return np.full(n, 1.0 / n)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (n,):
        raise DimensionError(f"{side} weights have shape {weights.shape}, expected ({n},)")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise UserInputError(f"{side} weights must be finite and nonnegative")
    total = weights.sum()
    if total <= 0:
        raise UserInputError(f"{side} weights have zero total mass")
    return weights / total


def _solve_linprog(a: np.ndarray, b: np.ndarray, M: np.ndarray) -> np.ndarray:
    n, m = M.shape
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A_eq = sparse.vstack([rows, cols]).tocsr()
    b_eq = np.concatenate([a, b])
    result = linprog(M.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if result.status != 0:
        raise ConvergenceError(f"linear program failed: {result.message}")
    return np.maximum(result.x.reshape(n, m), 0.0)


def emd_exact(
    X: np.ndarray,
    Y: np.ndarray,
    p: int = 1,
    a: np.ndarray | None = None,
    b: np.ndarray | None = None,
    method: str = "network_simplex",
) -> tuple[float, Coupling]:
    """
    Exact p-Kantorovich distance and optimal coupling.

    :param X: source points (n, d).
    :param Y: target points (m, d).
    :param p: ground-cost order, 1 or 2.
    :type p: int
    :param a: source weights, uniform when omitted; normalized to total mass 1.
    :param b: target weights, uniform when omitted.
    :param method: ``network_simplex`` (POT) or ``linprog`` (scipy HiGHS).
    :type method: str
    :return: ``(distance, coupling)`` with distance ``(sum gamma_ij |x_i - y_j|^p)^(1/p)``.
    :rtype: tuple[float, Coupling]
    """
    if p not in (1, 2):
        raise UserInputError(f"EMD order must be 1 or 2, got {p}")
    if method not in EXACT_METHODS:
        raise UserInputError(f"unknown exact method '{method}', choose from {EXACT_METHODS}")
    a = _weights(X, a, "source")
    b = _weights(Y, b, "target")
    M = cost_matrix(X, Y, p)
    if method == "network_simplex":
        plan = ot.emd(a, b, M, numItermax=max(100000, 50 * M.size))
    else:
        plan = _solve_linprog(a, b, M)
    coupling = Coupling(plan, a, b, M)
    distance = max(coupling.cost, 0.0) ** (1.0 / p)
    return distance, coupling


def emd(X: np.ndarray, Y: np.ndarray, p: int = 1) -> float:
    """Distance only, uniform weights."""
    return emd_exact(X, Y, p)[0]


def _plan(f: np.ndarray, g: np.ndarray, M: np.ndarray, reg: float) -> np.ndarray:
    return np.exp((f[:, None] + g[None, :] - M) / reg)


def sinkhorn(
    X: np.ndarray,
    Y: np.ndarray,
    reg: float,
    cfg: SinkhornConfig | None = None,
    a: np.ndarray | None = None,
    b: np.ndarray | None = None,
    p: int = 2,
) -> Coupling:
    """
    Entropic transport ``min <gamma, M> + reg * sum(gamma log gamma - gamma)`` with exact marginals.

    Runs POT's log-domain iterations; the residual is the 2-norm of the column-marginal error,
    which POT checks every tenth iteration.

    :raises ConvergenceError: the marginal residual is still above ``cfg.tol`` after ``cfg.max_iter`` iterations.
    """
    if reg <= 0:
        raise UserInputError(f"entropic weight must be positive, got {reg}")
    cfg = cfg or SinkhornConfig()
    a = _weights(X, a, "source")
    b = _weights(Y, b, "target")
    M = cost_matrix(X, Y, p)
    plan, log = ot.sinkhorn(
        a, b, M, reg, method="sinkhorn_log", numItermax=cfg.max_iter, stopThr=cfg.tol, log=True, warn=False
    )
    residual = float(log["err"][-1]) if log["err"] else math.inf
    if residual >= cfg.tol:
        logger.error(f"sinkhorn did not converge, residual {residual:.3e}")
        raise ConvergenceError("sinkhorn did not converge", residual, cfg.max_iter)
    iterations = int(log.get("niter", cfg.max_iter - 1)) + 1
    logger.debug(f"sinkhorn converged in {iterations} iterations, residual {residual:.3e}")
    return Coupling(np.asarray(plan, dtype=np.float64), a, b, M, iterations)


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(xlogy(p, p) - xlogy(p, q) - p + q))


def unbalanced_objective(plan: np.ndarray, M: np.ndarray, a: np.ndarray, b: np.ndarray, cfg: UnbalancedOTConfig) -> float:
    """
    ``<gamma, M> + reg * sum(gamma log gamma - gamma) + alpha KL(gamma 1 | a) + beta KL(gamma^T 1 | b)``.

    An infinite weight contributes 0 when its marginal is met (within 1e-9) and inf otherwise.
    """
    value = float(np.sum(plan * M)) + cfg.reg * float(np.sum(xlogy(plan, plan) - plan))
    for weight, marginal, target in ((cfg.alpha, plan.sum(axis=1), a), (cfg.beta, plan.sum(axis=0), b)):
        if math.isinf(weight):
            if np.max(np.abs(marginal - target)) > 1e-9:
                return math.inf
        else:
            value += weight * _kl(marginal, target)
    return value


def _marginal_term(weight: float, mass: np.ndarray, potential: np.ndarray) -> float:
    if math.isinf(weight):
        return -float(np.dot(mass, potential))
    return weight * float(np.dot(mass, np.expm1(-potential / weight)))


def _dual_objective(f, g, M, a, b, cfg: UnbalancedOTConfig) -> float:
    """Convex function of the potentials minimized by the iterations; equals minus the primal optimum at convergence."""
    return (
        _marginal_term(cfg.alpha, a, f)
        + _marginal_term(cfg.beta, b, g)
        + cfg.reg * float(np.sum(_plan(f, g, M, cfg.reg)))
    )


def _scale(weight: float, reg: float) -> float:
    return 1.0 if math.isinf(weight) else weight / (weight + reg)


def unbalanced_sinkhorn(
    X: np.ndarray,
    Y: np.ndarray,
    cfg: UnbalancedOTConfig | None = None,
    a: np.ndarray | None = None,
    b: np.ndarray | None = None,
    p: int = 2,
) -> Coupling:
    """
    Unbalanced entropic transport by KL-proximal Sinkhorn iterations.

    Row sums of the returned plan may deviate from ``a``; that deviation is the growth signal.
    ``objective_trace`` holds the dual objective after every iteration, which never increases.

    :raises ConvergenceError: potentials still moving by more than ``cfg.tol`` after ``cfg.max_iter`` iterations.
    """
    cfg = cfg or UnbalancedOTConfig()
    a = _weights(X, a, "source")
    b = _weights(Y, b, "target")
    M = cost_matrix(X, Y, p)
    reg = cfg.reg
    log_a, log_b = np.log(a), np.log(b)
    kappa_f, kappa_g = _scale(cfg.alpha, reg), _scale(cfg.beta, reg)
    f = np.zeros_like(a)
    g = np.zeros_like(b)
    trace = [_dual_objective(f, g, M, a, b, cfg)]
    change = math.inf
    for iteration in range(1, cfg.max_iter + 1):
        f_new = kappa_f * reg * (log_a - logsumexp((g[None, :] - M) / reg, axis=1))
        g_new = kappa_g * reg * (log_b - logsumexp((f_new[:, None] - M) / reg, axis=0))
        change = float(max(np.max(np.abs(f_new - f)), np.max(np.abs(g_new - g))))
        f, g = f_new, g_new
        trace.append(_dual_objective(f, g, M, a, b, cfg))
        if change < cfg.tol:
            plan = _plan(f, g, M, reg)
            logger.debug(f"unbalanced sinkhorn converged in {iteration} iterations, mass {plan.sum():.4f}")
            return Coupling(plan, a, b, M, iteration, tuple(trace))
    logger.error(f"unbalanced sinkhorn did not converge, potential change {change:.3e}")
    raise ConvergenceError("unbalanced sinkhorn did not converge", change, cfg.max_iter)


def growth_targets(coupling: Coupling) -> np.ndarray:
    """
    Growth rate of every source point: its row mass divided by its own weight.

    A point whose mass is transported unchanged gets rate 1.
    """
    mu = coupling.source_weights
    if np.any(mu <= 0):
        raise UserInputError("growth rates need positive source weights")
    return coupling.row_sums / mu


def log_growth_range(rates: np.ndarray, label: str = "") -> None:
    q = np.quantile(rates, [0.0, 0.5, 1.0])
    logger.info(f"growth rates {label}: min {q[0]:.3f}, median {q[1]:.3f}, max {q[2]:.3f}")


def mccann_interpolate(
    coupling: Coupling, X: np.ndarray, Y: np.ndarray, s: float, n_samples: int, seed: int
) -> np.ndarray:
    """
    Samples ``(1 - s) x_i + s y_j`` with pairs drawn with probability ``gamma_ij / sum(gamma)``.

    :param s: interpolation fraction in [0, 1].
    :type s: float
    :param n_samples: number of points to draw.
    :type n_samples: int
    :param seed: seed of the pair sampling.
    :type seed: int
    :rtype: np.ndarray
    """
    if not 0.0 <= s <= 1.0:
        raise UserInputError(f"interpolation fraction must lie in [0, 1], got {s}")
    plan = coupling.plan
    total = plan.sum()
    if plan.size == 0 or total <= 0:
        raise UserInputError("cannot interpolate along an empty plan")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    rng = np.random.default_rng(seed)
    flat = rng.choice(plan.size, size=n_samples, p=plan.ravel() / total)
    i, j = np.divmod(flat, plan.shape[1])
    return (1.0 - s) * X[i] + s * Y[j]
