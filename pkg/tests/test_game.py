import warnings

import numpy as np
import pytest
from scipy import optimize

from netgame import (
    ConvergenceError,
    GameState,
    PayoffParams,
    UniquenessWarning,
    best_response,
    contraction_modulus,
    ndd_bound,
    solve_all_subnetworks,
    solve_equilibrium,
    solve_subnetwork,
)
from netgame.estimate import logit_probs
from netgame.game import build_stack, interaction_matrix, probs_from_utilities
from netgame.network import DirectedNetwork, generate_circle, generate_random, make_rng


def K1(beta, alpha):
    return PayoffParams([beta], [[alpha]])


def lower_bound(X, params):
    """Smallest choice probability any best response can produce.

    The strategic term of action k ranges over
    [min(0, min_l alpha_kl), max(0, max_l alpha_kl)].
    """
    xb = X @ params.beta.T
    lo = xb + np.minimum(params.alpha.min(axis=1), 0)
    hi = xb + np.maximum(params.alpha.max(axis=1), 0)
    denom = 1 + np.exp(hi).sum(axis=1)
    return np.minimum(1 / denom, np.exp(lo).min(axis=1) / denom)


# contraction modulus and decay bound


@pytest.mark.parametrize("alpha, lam", [(0.8, 0.4), (0.0, 0.0), (1.6, 0.8), (-1.0, 0.5)])
def test_contraction_modulus_k1(alpha, lam):
    assert contraction_modulus(K1([0.0], alpha)) == pytest.approx(lam, abs=1e-15)


def test_contraction_modulus_k2():
    p = PayoffParams(np.zeros((2, 1)), [[0.5, -0.2], [-0.3, 0.4]])
    # rows with baseline: (0,0), (0.5,-0.2), (-0.3,0.4); column ranges 0.8 and 0.6
    assert contraction_modulus(p) == pytest.approx(2 / 3 * 0.8)


def test_ndd_bound():
    assert ndd_bound(0.0, 4) == 0.0
    assert ndd_bound(0.4, 3) == pytest.approx(0.0512)
    vals = [ndd_bound(0.7, h) for h in range(8)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        ndd_bound(1.0, 2)


# best response


def test_best_response_examples():
    p = K1([0.0], 0.0)
    assert best_response([1.0], 0, [], p) == pytest.approx([0.5, 0.5])
    p = K1([0.0], 0.8)
    r = best_response([1.0], 1, [[0.0, 1.0]], p)
    assert r == pytest.approx([1 / (1 + np.exp(0.8)), np.exp(0.8) / (1 + np.exp(0.8))])
    assert r == pytest.approx([0.3100, 0.6900], abs=5e-5)


def test_best_response_without_friends_is_logit():
    p = PayoffParams([[0.5, -1.0], [0.2, 0.3]], [[0.4, 0.1], [-0.2, 0.3]])
    x = np.array([1.0, 2.0])
    assert best_response(x, 0, [], p) == pytest.approx(logit_probs(x[None], p.beta)[0])


def test_best_response_rejects_non_simplex():
    with pytest.raises(ValueError):
        best_response([1.0], 1, [[0.7, 0.7]], K1([0.0], 0.5))


def test_softmax_is_stable_and_stochastic():
    V = np.array([[800.0, -800.0], [0.0, 0.0], [-1e3, -2e3]])
    P = probs_from_utilities(V)
    assert np.all(np.isfinite(P))
    assert np.allclose(P.sum(axis=1), 1, atol=1e-15)
    assert P[1] == pytest.approx([1 / 3] * 3)


# full equilibrium


def test_zero_interaction_is_closed_form_logit():
    rng = make_rng(2)
    net = generate_random(200, rng)
    X = rng.normal(size=(200, 2))
    p = PayoffParams([[0.5, -1.0], [1.0, 0.2]], np.zeros((2, 2)))
    prof, rep = solve_equilibrium(GameState(net, X), p)
    assert np.allclose(prof.sigma, logit_probs(X, p.beta), atol=1e-15)
    assert rep.iterations == 2  # one step to the logit, one to confirm a zero step


def test_circle3_matches_scalar_oracle():
    a = 0.8
    root = optimize.bisect(lambda q: q - np.exp(a * q) / (1 + np.exp(a * q)), 0, 1, xtol=1e-15)
    state = GameState(generate_circle(3), np.ones((3, 1)))
    prof, _ = solve_equilibrium(state, K1([0.0], a))
    assert np.abs(prof.sigma[:, 1] - root).max() < 1e-10


def test_equilibrium_is_a_fixed_point():
    rng = make_rng(4)
    net = generate_random(150, rng)
    X = rng.normal(size=(150, 2))
    p = PayoffParams([[0.3, 0.7], [-0.5, 0.4]], [[0.6, -0.3], [0.2, 0.5]])
    sig = solve_equilibrium(GameState(net, X), p, tol=1e-13)[0].sigma
    for i in range(0, 150, 7):
        f = net.friends(i)
        br = best_response(X[i], f.size, sig[f], p)
        assert np.abs(br - sig[i]).sum() < 1e-12


def test_relabeling_permutes_profile():
    rng = make_rng(5)
    state = GameState(generate_random(120, rng), rng.normal(size=(120, 2)))
    p = PayoffParams([[1.0, -1.0]], [[1.2]])
    perm = rng.permutation(120)
    s1 = solve_equilibrium(state, p, tol=1e-13)[0].sigma
    s2 = solve_equilibrium(state.relabel(perm), p, tol=1e-13)[0].sigma
    assert np.abs(s2[perm] - s1).max() < 1e-12


def test_profile_rows_are_bounded_below():
    rng = make_rng(6)
    for _ in range(5):
        K = int(rng.integers(1, 4))
        state = GameState(generate_random(80, rng), rng.uniform(-1, 1, size=(80, 2)))
        bound = (K + 1) / (2 * K)
        p = PayoffParams(rng.normal(size=(K, 2)), rng.uniform(-bound, bound, size=(K, K)))
        sig = solve_equilibrium(state, p)[0].sigma
        assert np.all(sig.min(axis=1) >= lower_bound(state.X, p) * (1 - 1e-12))


def test_large_alpha_warns_and_max_iter_raises():
    state = GameState(generate_circle(10), np.ones((10, 1)))
    with pytest.warns(UniquenessWarning):
        solve_equilibrium(state, K1([0.0], 2.5))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UniquenessWarning)
        with pytest.raises(ConvergenceError) as exc:
            solve_equilibrium(state, K1([0.1], 1.9), tol=1e-14, max_iter=3)
    assert exc.value.report.iterations == 3
    assert exc.value.report.final_residual > 1e-14


def test_state_validation():
    with pytest.raises(ValueError):
        GameState(generate_circle(5), np.ones((4, 1)))
    with pytest.raises(ValueError):
        solve_equilibrium(GameState(generate_circle(5), np.ones((5, 2))), K1([0.0], 0.1))
    with pytest.raises(ValueError):
        PayoffParams([[1.0, 1.0]], [[0.1, 0.2]])


def test_friendless_players_play_logit():
    net = DirectedNetwork.from_friend_lists([[1], [0], [], [0, 1]])
    X = np.array([[1.0], [0.5], [2.0], [-1.0]])
    p = K1([0.7], 1.5)
    sig = solve_equilibrium(GameState(net, X), p)[0].sigma
    assert sig[2] == pytest.approx(logit_probs(X[2:3], p.beta)[0], abs=1e-15)
    A = interaction_matrix(net).toarray()
    assert A[3].tolist() == [0.5, 0.5, 0.0, 0.0]
    assert A[2].sum() == 0


# subnetwork games


def test_subnetwork_radius_zero_is_logit():
    rng = make_rng(7)
    state = GameState(generate_random(60, rng), rng.normal(size=(60, 2)))
    p = PayoffParams([[0.4, -0.6]], [[1.1]])
    assert solve_subnetwork(state, 5, 0, p) == pytest.approx(logit_probs(state.X[5:6], p.beta)[0], abs=1e-15)
    assert np.allclose(solve_all_subnetworks(state, 0, p), logit_probs(state.X, p.beta), atol=1e-15)


def test_subnetwork_covering_the_graph_equals_full_game():
    rng = make_rng(8)
    state = GameState(generate_circle(11), rng.normal(size=(11, 1)))
    p = K1([0.9], 1.4)
    full = solve_equilibrium(state, p, tol=1e-13)[0].sigma
    for i in (0, 4, 10):
        assert np.abs(solve_subnetwork(state, i, 6, p, tol=1e-13) - full[i]).sum() < 1e-11


def test_subgame_keeps_parent_friend_count():
    # 0 -> 1 -> 2: in the radius-1 subgame of 0, player 1 loses friend 2 but
    # still divides by Q_1 = 1, so its strategic term is 0
    net = DirectedNetwork.from_friend_lists([[1], [2], []])
    X = np.array([[0.0], [0.0], [5.0]])
    p = K1([1.0], 1.0)
    stack = build_stack(net, 1, [0])
    assert stack.A.toarray().tolist() == [[0.0, 1.0], [0.0, 0.0]]
    s1 = 0.5  # player 1 in the subgame: x'beta = 0 and no friends left
    expect = np.exp(s1) / (1 + np.exp(s1))
    assert solve_subnetwork(GameState(net, X), 0, 1, p)[1] == pytest.approx(expect, abs=1e-12)


def test_subnetwork_error_within_decay_bound_small_graph():
    rng = make_rng(9)
    state = GameState(generate_random(30, rng), rng.normal(size=(30, 2)))
    p = PayoffParams([[0.5, -0.5]], [[1.2]])
    lam = contraction_modulus(p)
    full = solve_equilibrium(state, p, tol=1e-14)[0].sigma
    for h in range(6):
        err = np.abs(solve_all_subnetworks(state, h, p, tol=1e-14) - full).sum(axis=1)
        assert err.max() <= ndd_bound(lam, h) * (1 + 1e-9)
