"""Logit network game: payoff parameters, best responses, and the
contraction solvers for the full game and the h-hop subnetwork games.

Choice probabilities are carried internally as the ``K`` non-baseline
columns ``P``; action 0 gets ``1 - P.sum(axis=1)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .network import DirectedNetwork, NetworkError

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000


class ConvergenceError(RuntimeError):
    """Fixed-point iteration hit ``max_iter`` before meeting ``tol``."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UniquenessWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PayoffParams:
    """Payoff coefficients for actions ``1..K``.

    ``beta[k-1]`` is the covariate coefficient of action ``k`` and
    ``alpha[k-1, l-1]`` the effect on action ``k`` of the share of friends
    choosing ``l``. Action 0 is the baseline with all coefficients zero.
    """

    beta: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        if alpha.shape != (beta.shape[0], beta.shape[0]):
            raise ValueError(f"alpha must be K x K with K={beta.shape[0]}, got {alpha.shape}")
        if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(alpha))):
            raise ValueError("payoff parameters must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def d(self) -> int:
        return self.beta.shape[1]

    @property
    def size(self) -> int:
        return self.K * (self.d + self.K)

    def to_vector(self) -> np.ndarray:
        """Stack as ``(theta_1', ..., theta_K')'`` with ``theta_k = (beta_k', alpha_k')'``."""
        return np.concatenate([self.beta, self.alpha], axis=1).ravel()

    @classmethod
    def from_vector(cls, theta, K: int, d: int) -> "PayoffParams":
        theta = np.asarray(theta, dtype=float).reshape(K, d + K)
        return cls(theta[:, :d].copy(), theta[:, d:].copy())

    def names(self, covariate_names=None) -> list[str]:
        cov = list(covariate_names) if covariate_names is not None else [f"x{c + 1}" for c in range(self.d)]
        out = []
        for k in range(1, self.K + 1):
            prefix = "" if self.K == 1 else f"[{k}] "
            out += [prefix + c for c in cov]
            out += [f"alpha[{k},{l}]" for l in range(1, self.K + 1)]
        return out

    def alpha_mask(self) -> np.ndarray:
        mask = np.zeros((self.K, self.d + self.K), dtype=bool)
        mask[:, self.d:] = True
        return mask.ravel()


@dataclass(frozen=True)
class GameState:
    network: DirectedNetwork
    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != self.network.n:
            raise ValueError(f"X has {X.shape[0]} rows but the network has {self.network.n} players")
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.network.n

    def relabel(self, perm) -> "GameState":
        perm = np.asarray(perm)
        X = np.empty_like(self.X)
        X[perm] = self.X
        return GameState(self.network.relabel(perm), X)


@dataclass(frozen=True)
class ChoiceProfile:
    sigma: np.ndarray

    def validate(self, atol: float = 1e-12) -> "ChoiceProfile":
        s = self.sigma
        if s.ndim != 2 or s.shape[1] < 2:
            raise ValueError("choice profile must be an n x (K+1) matrix")
        if np.any(s < 0) or np.any(s > 1) or np.any(np.abs(s.sum(axis=1) - 1) > atol):
            raise ValueError("choice profile rows must lie on the probability simplex")
        return self


@dataclass
class SolveReport:
    iterations: int
    final_residual: float
    lam: float
    converged: bool = True
    steps: list[float] = field(default_factory=list, repr=False)


def contraction_modulus(params: PayoffParams) -> float:
    """``K/(K+1) * max_{k,m,l} |alpha_kl - alpha_ml|`` with the baseline row at zero."""
    K = params.K
    a = np.vstack([np.zeros((1, K)), params.alpha])
    gap = (a.max(axis=0) - a.min(axis=0)).max()
    return K / (K + 1) * float(gap)


def ndd_bound(lam: float, h: int) -> float:
    """Decay bound ``2 * lam**(h + 1)`` on the subnetwork approximation error."""
    if not (0 <= lam < 1):
        raise ValueError(f"decay bound needs 0 <= lambda < 1, got {lam}")
    if h < 0:
        raise ValueError("radius must be nonnegative")
    return 2.0 * lam ** (h + 1)


def probs_from_utilities(V: np.ndarray) -> np.ndarray:
    """Baseline-normalized softmax: ``V`` is (..., K), result is (..., K+1)."""
    V = np.asarray(V, dtype=float)
    shift = np.maximum(V.max(axis=-1, keepdims=True), 0.0)
    e = np.exp(V - shift)
    e0 = np.exp(-shift)
    denom = e0 + e.sum(axis=-1, keepdims=True)
    return np.concatenate([e0, e], axis=-1) / denom


def _check_simplex(rows, K):
    rows = np.asarray(rows, dtype=float).reshape(-1, K + 1)
    if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1) > 1e-9):
        raise ValueError("friend probability rows must lie on the probability simplex")
    return rows


def best_response(x_i, q_i: int, friend_probs, params: PayoffParams) -> np.ndarray:
    """Logit best response of one player to friends' choice probabilities.

    ``friend_probs`` holds the rows of the friends that are present; the
    strategic term divides by ``q_i``, so in a subgame the friends outside
    it simply contribute nothing. With ``q_i == 0`` the result is the plain
    logit of ``x_i' beta``.
    """
    K = params.K
    x_i = np.asarray(x_i, dtype=float).ravel()
    rows = _check_simplex(friend_probs, K) if len(friend_probs) else np.zeros((0, K + 1))
    if rows.shape[0] > q_i:
        raise ValueError("more friend rows than friends")
    v = params.beta @ x_i
    if q_i > 0:
        v = v + params.alpha @ (rows[:, 1:].sum(axis=0) / q_i)
    return probs_from_utilities(v)


# ---------------------------------------------------------------------------
# vectorized solver on a (possibly block-diagonal) interaction operator


def interaction_matrix(net: DirectedNetwork) -> sp.csr_matrix:
    """Row-normalized adjacency: ``A[i, j] = 1/Q_i`` for ``j`` in ``F_i``."""
    q = net.out_degree
    data = np.repeat(1.0 / np.maximum(q, 1), q)
    return sp.csr_matrix((data, net.indices, net.indptr), shape=(net.n, net.n))


def row_l1(dP: np.ndarray) -> np.ndarray:
    """L1 norm of full (K+1) rows given only the non-baseline differences."""
    return np.abs(dP).sum(axis=1) + np.abs(dP.sum(axis=1))


def jacobi(A, XB, alpha, P0, tol, max_iter, lam=float("nan"), keep_steps=False):
    """Synchronous best-response iteration ``P <- g(XB + (A P) alpha')``.

    Stops when the sup-over-players L1 step is at most ``tol``. Returns the
    final ``P`` and a :class:`SolveReport`; never raises.
    """
    P = P0
    steps = []
    resid = np.inf
    it = 0
    while it < max_iter:
        it += 1
        V = XB + (A @ P) @ alpha.T
        Pn = probs_from_utilities(V)[:, 1:]
        resid = float(row_l1(Pn - P).max()) if P.size else 0.0
        P = Pn
        if keep_steps:
            steps.append(resid)
        if resid <= tol:
            return P, SolveReport(it, resid, lam, True, steps)
    return P, SolveReport(it, resid, lam, False, steps)


def _warn_lambda(lam):
    if lam >= 1:
        warnings.warn(
            f"contraction modulus {lam:.4g} >= 1: equilibrium uniqueness is not guaranteed",
            UniquenessWarning,
            stacklevel=3,
        )


def solve_equilibrium(
    state: GameState,
    params: PayoffParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    init=None,
    keep_steps: bool = False,
) -> tuple[ChoiceProfile, SolveReport]:
    """Equilibrium choice probabilities of the full network game.

    Starts from uniform rows unless ``init`` (an n x (K+1) profile) is
    given. Raises :class:`ConvergenceError` if ``max_iter`` is exhausted.
    """
    if state.X.shape[1] != params.d:
        raise ValueError(f"X has {state.X.shape[1]} columns, params expect d={params.d}")
    lam = contraction_modulus(params)
    _warn_lambda(lam)
    K = params.K
    if init is None:
        P0 = np.full((state.n, K), 1.0 / (K + 1))
    else:
        P0 = ChoiceProfile(np.asarray(init, dtype=float)).validate(1e-9).sigma[:, 1:].copy()
    A = interaction_matrix(state.network)
    P, rep = jacobi(A, state.X @ params.beta.T, params.alpha, P0, tol, max_iter, lam, keep_steps)
    if not rep.converged:
        raise ConvergenceError(
            f"equilibrium solve did not reach tol={tol:g} in {max_iter} iterations "
            f"(final step {rep.final_residual:.3e})",
            rep,
        )
    return ChoiceProfile(_full(P)), rep


def _full(P):
    return np.concatenate([1.0 - P.sum(axis=1, keepdims=True), P], axis=1)


# ---------------------------------------------------------------------------
# stacked subnetwork games


@dataclass
class SubgameStack:
    """All h-hop subgames of a network laid out as one block-diagonal game.

    Stacked node ``u`` is a copy of parent player ``node_player[u]`` inside
    the subgame of center ``centers[block_of[u]]``. ``A`` restricts each
    copy's friends to its own block but keeps the parent ``1/Q`` weights.
    """

    h: int
    centers: np.ndarray
    node_player: np.ndarray
    block_of: np.ndarray
    center_pos: np.ndarray
    A: sp.csr_matrix

    @property
    def size(self) -> int:
        return self.node_player.size


def reach_matrix(net: DirectedNetwork, h: int) -> sp.csr_matrix:
    """Boolean matrix whose row ``i`` marks the members of ``N_(i,h)``."""
    adj = sp.csr_matrix(
        (np.ones(net.indices.size, dtype=np.int8), net.indices, net.indptr), shape=(net.n, net.n)
    )
    R = sp.identity(net.n, dtype=np.int8, format="csr")
    for _ in range(h):
        Rn = R + R @ adj
        Rn.data[:] = 1
        if Rn.nnz == R.nnz:
            R = Rn
            break
        R = Rn
    R.sort_indices()
    return R


def build_stack(net: DirectedNetwork, h: int, centers=None) -> SubgameStack:
    if h < 0:
        raise NetworkError("radius must be nonnegative")
    R = reach_matrix(net, h)
    if centers is None:
        centers = np.arange(net.n)
    else:
        centers = np.asarray(centers, dtype=np.int64).ravel()
        if centers.size and (centers.min() < 0 or centers.max() >= net.n):
            raise NetworkError("center index out of range")
        R = R[centers]
        R.sort_indices()
    sizes = np.diff(R.indptr)
    block_of = np.repeat(np.arange(centers.size), sizes)
    node_player = R.indices.astype(np.int64)
    keys = block_of * net.n + node_player  # sorted: blocks in order, members ascending

    q = net.out_degree
    deg = q[node_player]
    src = np.repeat(np.arange(node_player.size), deg)
    starts = net.indptr[node_player]
    offs = np.arange(deg.sum()) - np.repeat(np.cumsum(deg) - deg, deg)
    fr = net.indices[np.repeat(starts, deg) + offs]
    qk = block_of[src] * net.n + fr
    pos = np.searchsorted(keys, qk)
    pos = np.minimum(pos, keys.size - 1)
    hit = keys[pos] == qk
    rows, cols = src[hit], pos[hit]
    data = 1.0 / q[node_player[rows]]
    M = node_player.size
    A = sp.csr_matrix((data, (rows, cols)), shape=(M, M))
    center_pos = np.searchsorted(keys, np.arange(centers.size) * net.n + centers)
    return SubgameStack(h, centers, node_player, block_of, center_pos, A)


def solve_stack(stack: SubgameStack, X, params, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, P0=None):
    """Solve every subgame in ``stack``; returns stacked ``P`` and report."""
    K = params.K
    if P0 is None:
        P0 = np.full((stack.size, K), 1.0 / (K + 1))
    XB = X[stack.node_player] @ params.beta.T
    return jacobi(stack.A, XB, params.alpha, P0, tol, max_iter, contraction_modulus(params))


def solve_subnetwork(
    state: GameState,
    i: int,
    h: int,
    params: PayoffParams,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> np.ndarray:
    """Center row of the equilibrium of the ``h``-hop subgame around ``i``."""
    state.network._check(i)
    lam = contraction_modulus(params)
    _warn_lambda(lam)
    stack = build_stack(state.network, h, [i])
    P, rep = solve_stack(stack, state.X, params, tol, max_iter)
    if not rep.converged:
        raise ConvergenceError(f"subgame of player {i} did not converge (step {rep.final_residual:.3e})", rep)
    return _full(P[stack.center_pos])[0]


def solve_all_subnetworks(state, h, params, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> np.ndarray:
    """``sigma^h_i`` for every player, as an n x (K+1) array."""
    lam = contraction_modulus(params)
    _warn_lambda(lam)
    stack = build_stack(state.network, h)
    P, rep = solve_stack(stack, state.X, params, tol, max_iter)
    if not rep.converged:
        raise ConvergenceError(f"subgames did not converge (step {rep.final_residual:.3e})", rep)
    return _full(P[stack.center_pos])


def stack_derivatives(stack: SubgameStack, X, params: PayoffParams, P: np.ndarray) -> np.ndarray:
    """Derivatives of the center probabilities with respect to theta.

    Differentiates the stacked fixed point ``P = g(XB + (A P) alpha')``
    implicitly: ``(I - G kron(A, alpha)) dP = G dV/dtheta`` where ``G`` is
    the block-diagonal softmax Jacobian. Returns an array of shape
    (n_centers, K, size) for the non-baseline actions.
    """
    K, d = params.K, params.d
    M = stack.size
    Xs = X[stack.node_player]
    S = stack.A @ P
    # softmax Jacobian blocks G_u = diag(p_u) - p_u p_u'
    G = -P[:, :, None] * P[:, None, :]
    idx = np.arange(K)
    G[:, idx, idx] += P
    rr = (np.arange(M)[:, None, None] * K + idx[None, :, None]).repeat(K, axis=2)
    cc = (np.arange(M)[:, None, None] * K + idx[None, None, :]).repeat(K, axis=1)
    Gm = sp.csr_matrix((G.ravel(), (rr.ravel(), cc.ravel())), shape=(M * K, M * K))
    L = sp.identity(M * K, format="csc") - (Gm @ sp.kron(stack.A, params.alpha, format="csr")).tocsc()

    dV = np.zeros((M, K, K, d + K))
    for k in range(K):
        dV[:, k, k, :d] = Xs
        dV[:, k, k, d:] = S
    dV = dV.reshape(M * K, K * (d + K))
    rhs = Gm @ dV
    lu = spla.splu(L)
    dP = lu.solve(rhs).reshape(M, K, K * (d + K))
    return dP[stack.center_pos]
