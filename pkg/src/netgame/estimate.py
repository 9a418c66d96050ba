"""Approximated maximum likelihood on subnetwork equilibria.

The objective averages ``ln sigma^h_{i, Y_i}`` over players, where
``sigma^h_i`` is the center row of the ``h``-hop subgame equilibrium.
Scores come from implicit differentiation of the stacked subgame fixed
point, standard errors from the outer product of per-player scores.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .game import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    ConvergenceError,
    GameState,
    PayoffParams,
    build_stack,
    interaction_matrix,
    probs_from_utilities,
    solve_all_subnetworks,
    solve_stack,
    stack_derivatives,
)

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-300
SE_MAX_COND = 1e12


class EstimationError(RuntimeError):
    pass


class SingularFisherError(EstimationError):
    pass


@dataclass(frozen=True)
class Dataset:
    state: GameState
    Y: np.ndarray

    def __post_init__(self):
        Y = np.asarray(self.Y)
        if Y.ndim != 1 or Y.size != self.state.n:
            raise ValueError(f"Y must have one entry per player ({self.state.n})")
        if not np.all(np.equal(np.mod(Y, 1), 0)) or Y.min() < 0:
            raise ValueError("Y entries must be integer actions 0..K")
        object.__setattr__(self, "Y", Y.astype(np.int64))

    @property
    def n(self) -> int:
        return self.state.n

    def check_actions(self, K: int):
        if self.Y.max() > K:
            raise ValueError(f"Y contains action {self.Y.max()} but K={K}")


def choose_h(n: int, h0: float = 0.1, a: float = 0.5) -> int:
    """Subgame radius ``floor(h0 * n**a)``."""
    if n < 1:
        raise ValueError("n must be positive")
    # guard against floor(2.9999999) for exact products such as 0.1 * 1000**0.5 * 10
    return int(math.floor(h0 * n**a + 1e-12))


class ApproxLikelihood:
    """Approximated log-likelihood of one dataset at a fixed radius ``h``.

    Holds the stacked subgame decomposition (it does not depend on theta)
    and the last equilibrium solution, reused as the next starting point.
    """

    def __init__(self, data: Dataset, h: int, K: int, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, warm_start: bool = True):
        data.check_actions(K)
        self.data = data
        self.h = h
        self.K = K
        self.d = data.state.X.shape[1]
        self.tol = tol
        self.max_iter = max_iter
        self.warm_start = warm_start
        self.stack = build_stack(data.state.network, h)
        self._P = None
        self.clamped = False

    def params(self, theta) -> PayoffParams:
        return PayoffParams.from_vector(theta, self.K, self.d)

    def _solve(self, params):
        P0 = self._P if (self.warm_start and self._P is not None) else None
        P, rep = solve_stack(self.stack, self.data.state.X, params, self.tol, self.max_iter, P0)
        if not rep.converged:
            bad = self.stack.block_of[np.argmax(np.abs(P - (P0 if P0 is not None else P)).sum(1))]
            raise ConvergenceError(
                f"subgame solve failed near player {int(self.stack.centers[bad])} "
                f"(step {rep.final_residual:.3e})",
                rep,
            )
        self._P = P
        return P

    def center_probs(self, theta) -> np.ndarray:
        params = self.params(theta)
        P = self._solve(params)
        Pc = P[self.stack.center_pos]
        return np.concatenate([1.0 - Pc.sum(axis=1, keepdims=True), Pc], axis=1)

    def loglik_terms(self, theta) -> np.ndarray:
        sig = self.center_probs(theta)
        p = sig[np.arange(self.data.n), self.data.Y]
        self.clamped = bool(np.any(p < PROB_FLOOR))
        return np.log(np.maximum(p, PROB_FLOOR))

    def value(self, theta) -> float:
        return float(self.loglik_terms(theta).mean())

    def scores(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """Per-player log-likelihood terms and their gradients (n x P)."""
        params = self.params(theta)
        P = self._solve(params)
        n = self.data.n
        Pc = P[self.stack.center_pos]
        sig = np.concatenate([1.0 - Pc.sum(axis=1, keepdims=True), Pc], axis=1)
        Y = self.data.Y
        p = sig[np.arange(n), Y]
        self.clamped = bool(np.any(p < PROB_FLOOR))
        dPc = stack_derivatives(self.stack, self.data.state.X, params, P)
        dsig = np.concatenate([-dPc.sum(axis=1, keepdims=True), dPc], axis=1)
        dp = dsig[np.arange(n), Y]
        return np.log(np.maximum(p, PROB_FLOOR)), dp / np.maximum(p, PROB_FLOOR)[:, None]


def loglik_approx(data: Dataset, params: PayoffParams, h: int, tol: float = DEFAULT_TOL) -> float:
    return ApproxLikelihood(data, h, params.K, tol).value(params.to_vector())


def score_approx(data: Dataset, params: PayoffParams, h: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Gradient of :func:`loglik_approx` with respect to ``params.to_vector()``."""
    _, s = ApproxLikelihood(data, h, params.K, tol).scores(params.to_vector())
    return s.mean(axis=0)


def fisher_info(data: Dataset, theta_hat: PayoffParams, h: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Average outer product of per-player scores at ``theta_hat``."""
    _, s = ApproxLikelihood(data, h, theta_hat.K, tol).scores(theta_hat.to_vector())
    return s.T @ s / s.shape[0]


def std_errors(fisher: np.ndarray, n: int) -> np.ndarray:
    """``sqrt(diag(fisher^-1) / n)``; raises if ``fisher`` is singular."""
    fisher = 0.5 * (np.asarray(fisher, dtype=float) + np.asarray(fisher, dtype=float).T)
    try:
        factor = linalg.cho_factor(fisher, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularFisherError("Fisher information is not positive definite") from exc
    cond = np.linalg.cond(fisher)
    if not np.isfinite(cond) or cond > SE_MAX_COND:
        raise SingularFisherError(f"Fisher information is ill-conditioned (cond={cond:.3g})")
    inv = linalg.cho_solve(factor, np.eye(fisher.shape[0]))
    return np.sqrt(np.diag(inv) / n)


@dataclass
class OptimizerSettings:
    """Stopping rules for :func:`amle`.

    ``gtol`` bounds the sup-norm of the projected gradient of the total
    log-likelihood ``n * Q``.
    """

    gtol: float = 1e-6
    max_iter: int = 500
    polish_steps: int = 5
    solve_tol: float = 1e-12
    solve_max_iter: int = DEFAULT_MAX_ITER


@dataclass
class EstimateResult:
    theta_hat: PayoffParams
    std_errors: np.ndarray
    loglik: float
    h_used: int
    fisher: np.ndarray
    converged: bool
    free: np.ndarray
    n: int
    iterations: int = 0
    n_evals: int = 0
    grad_norm: float = float("nan")
    message: str = ""
    fisher_cond: float = float("nan")
    trace: list[float] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "evaluations": self.n_evals,
            "projected_grad_sup": self.grad_norm,
            "message": self.message,
            "fisher_condition": self.fisher_cond,
        }


def default_alpha_bound(K: int) -> float:
    """Half-width of the alpha box that keeps the contraction modulus below 1."""
    if K == 1:
        return 1.99
    return 0.995 * (K + 1) / (2 * K)


def _projected_grad(x, g, lo, hi):
    pg = g.copy()
    at_lo = (x <= lo + 1e-12) & (g > 0)  # g is the gradient of the minimized function
    at_hi = (x >= hi - 1e-12) & (g < 0)
    pg[at_lo | at_hi] = 0.0
    return pg


def _newton_polish(grad, x, lo, hi, gtol, max_steps):
    """Projected Newton steps with a central-difference Hessian of ``grad``."""
    g = grad(x)
    gnorm = float(np.abs(_projected_grad(x, g, lo, hi)).max()) if x.size else 0.0
    steps = 0
    while gnorm > gtol and steps < max_steps:
        pg = _projected_grad(x, g, lo, hi)
        act = (pg == 0) & (g != 0)
        idx = np.flatnonzero(~act)
        H = np.empty((idx.size, idx.size))
        for c, j in enumerate(idx):
            e = 1e-5 * max(1.0, abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += e
            xm[j] -= e
            H[:, c] = (grad(xp) - grad(xm))[idx] / (2 * e)
        H = 0.5 * (H + H.T)
        try:
            dx = -linalg.solve(H, g[idx], assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            break
        xn = x.copy()
        xn[idx] += dx
        xn = np.clip(xn, lo, hi)
        gn = grad(xn)
        nn = float(np.abs(_projected_grad(xn, gn, lo, hi)).max())
        steps += 1
        if not nn < gnorm:
            break
        x, g, gnorm = xn, gn, nn
    return x, gnorm, steps


def amle(
    data: Dataset,
    h: int,
    init: PayoffParams | None = None,
    box: float | tuple[float, float] | None = None,
    settings: OptimizerSettings | None = None,
    K: int | None = None,
) -> EstimateResult:
    """Maximize the approximated likelihood over theta.

    ``beta`` is unconstrained and every ``alpha`` entry is kept in ``box``.
    Without ``init`` the start is the ``h = 0`` (plain logit) fit for
    ``beta`` with ``alpha = 0``. At ``h = 0`` the interaction terms are
    absent from the likelihood, so ``alpha`` stays at its start value and
    gets no standard error.
    """
    settings = settings or OptimizerSettings()
    if K is None:
        K = init.K if init is not None else int(data.Y.max())
    K = max(K, 1)
    d = data.state.X.shape[1]
    if init is None:
        init = PayoffParams(np.zeros((K, d)), np.zeros((K, K)))
        if h > 0:
            init = amle(data, 0, init, box, settings, K).theta_hat
    if box is None:
        box = default_alpha_bound(K)
    lo_a, hi_a = (-box, box) if np.isscalar(box) else box

    lik = ApproxLikelihood(data, h, K, settings.solve_tol, settings.solve_max_iter)
    theta0 = init.to_vector()
    amask = init.alpha_mask()
    free = np.ones_like(amask) if h > 0 else ~amask
    lo = np.where(amask, lo_a, -np.inf)[free]
    hi = np.where(amask, hi_a, np.inf)[free]
    x0 = np.clip(theta0[free], lo, hi)
    n = data.n
    trace: list[float] = []
    count = [0]

    def full(x):
        th = theta0.copy()
        th[free] = x
        return th

    def fun(x):
        count[0] += 1
        terms, s = lik.scores(full(x))
        if lik.clamped:
            # a floored probability: make the line search reject this trial
            return np.inf, np.zeros_like(x)
        return -terms.sum(), -s.sum(axis=0)[free]

    def callback(xk):
        trace.append(lik.value(full(xk)))

    bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))
    x = x0
    nit = 0
    res = optimize.minimize(
        fun, x, jac=True, method="L-BFGS-B", bounds=bounds, callback=callback,
        options={"gtol": settings.gtol, "ftol": 1e-15, "maxiter": settings.max_iter, "maxcor": 20},
    )
    nit = res.nit
    x = np.clip(res.x, lo, hi)

    def grad(x):
        return -lik.scores(full(x))[1].sum(axis=0)[free]

    # L-BFGS-B tends to stop on relative reduction of f just short of the
    # gradient test; a few Newton steps on the free coordinates finish it
    x, gnorm, polish = _newton_polish(grad, x, lo, hi, settings.gtol, settings.polish_steps)
    nit += polish
    converged = gnorm <= settings.gtol
    theta = full(x)
    terms, s = lik.scores(theta)
    if not converged:
        log.warning("AMLE(h=%d) stopped with projected gradient %.3e: %s", h, gnorm, res.message)

    fisher = s.T @ s / n
    ses = np.full(theta.size, np.nan)
    cond = float("nan")
    sub = fisher[np.ix_(free, free)]
    try:
        cond = float(np.linalg.cond(sub))
        ses[free] = std_errors(sub, n)
    except SingularFisherError as exc:
        log.warning("standard errors suppressed: %s", exc)

    return EstimateResult(
        theta_hat=PayoffParams.from_vector(theta, K, d),
        std_errors=ses,
        loglik=float(terms.mean()),
        h_used=h,
        fisher=fisher,
        converged=converged,
        free=free,
        n=n,
        iterations=nit,
        n_evals=count[0],
        grad_norm=gnorm,
        message=str(res.message),
        fisher_cond=cond,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# identification diagnostics


@dataclass
class IdentDiagnostics:
    min_eigenvalue: float
    determinant: float
    moment: np.ndarray
    delta_mean: np.ndarray
    delta_sd: np.ndarray
    phi_mean: np.ndarray
    phi_sd: np.ndarray
    singular: bool


def _regressors(state: GameState, sigma: np.ndarray):
    """``W_i = (X_i', phi_i1/Q_i, ..., phi_iK/Q_i)'`` and the log-odds ``delta``."""
    A = interaction_matrix(state.network)
    phi_avg = A @ sigma[:, 1:]
    W = np.concatenate([state.X, phi_avg], axis=1)
    delta = np.log(sigma[:, 1:]) - np.log(sigma[:, :1])
    return W, delta, phi_avg * state.network.out_degree[:, None]


def ident_diagnostics(data: Dataset | GameState, h: int | None = None, tol: float = DEFAULT_TOL,
                      params: PayoffParams | None = None, sigma=None,
                      singular_tol: float = 1e-10) -> IdentDiagnostics:
    """Finite-sample rank check of the sample moment matrix of ``W``.

    Probabilities come from ``sigma`` when given, otherwise from the
    ``h``-hop subgame solves at ``params``.
    """
    state = data.state if isinstance(data, Dataset) else data
    if sigma is None:
        if params is None or h is None:
            raise ValueError("need either sigma or (params, h)")
        sigma = solve_all_subnetworks(state, h, params, tol)
    sigma = np.asarray(sigma, dtype=float)
    W, delta, phi = _regressors(state, sigma)
    Mom = W.T @ W / state.n
    Mom = 0.5 * (Mom + Mom.T)
    eig = np.linalg.eigvalsh(Mom)
    scale = max(1.0, float(np.abs(eig).max()))
    return IdentDiagnostics(
        min_eigenvalue=float(eig[0]),
        determinant=float(np.linalg.det(Mom)),
        moment=Mom,
        delta_mean=delta.mean(axis=0),
        delta_sd=delta.std(axis=0),
        phi_mean=phi.mean(axis=0),
        phi_sd=phi.std(axis=0),
        singular=bool(eig[0] <= singular_tol * scale),
    )


def invert_log_odds(state: GameState, sigma) -> PayoffParams:
    """Closed-form recovery of (beta, alpha) from exact choice probabilities.

    Each action's log-odds against action 0 is linear in ``W_i``; the
    coefficients are the population least-squares solution
    ``E[W W']^{-1} E[W delta_k]`` evaluated with sample means.
    """
    sigma = np.asarray(sigma, dtype=float)
    W, delta, _ = _regressors(state, sigma)
    Mom = W.T @ W / state.n
    rhs = W.T @ delta / state.n
    theta = np.linalg.solve(Mom, rhs).T  # K x (d + K)
    d = state.X.shape[1]
    return PayoffParams(theta[:, :d], theta[:, d:])


def logit_probs(X, beta) -> np.ndarray:
    return probs_from_utilities(np.asarray(X) @ np.atleast_2d(beta).T)
