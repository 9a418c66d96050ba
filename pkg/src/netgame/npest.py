"""Window-matching estimator of a player's choice probability on a circle
network with discrete covariates.

For a target player the estimator collects every player whose covariate
window (its own row plus ``h`` neighbors on each side, read left to right)
equals the target's window, and returns the share of them that chose the
action. Mirror-image windows do not count as matches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimate import Dataset
from .network import circle_walk


class NoMatchError(ValueError):
    pass


@dataclass(frozen=True)
class NpConfig:
    h: int
    target: int

    def __post_init__(self):
        if self.h < 0:
            raise ValueError("h must be nonnegative")


@dataclass(frozen=True)
class NpEstimate:
    estimate: float
    matches: int
    h: int


def default_h(n: int, h0: float = 0.5 / math.log(2)) -> int:
    """``floor(h0 * ln n)``; the default ``h0`` gives ``floor(0.5 * log2 n)``."""
    return int(math.floor(h0 * math.log(n) + 1e-12))


def _windows(data: Dataset, h: int) -> tuple[np.ndarray, np.ndarray]:
    """Window id per player (equal ids <=> matching windows) and the circle order."""
    X = data.state.X
    if not np.all(np.mod(X, 1) == 0):
        raise ValueError("window matching needs discrete (integer-coded) covariates")
    order = circle_walk(data.state.network)
    n = order.size
    _, codes = np.unique(X, axis=0, return_inverse=True)
    codes = codes.ravel()
    pos_codes = codes[order]
    offsets = np.arange(-h, h + 1)
    win = pos_codes[(np.arange(n)[:, None] + offsets[None, :]) % n]
    _, wid_pos = np.unique(win, axis=0, return_inverse=True)
    wid = np.empty(n, dtype=np.int64)
    wid[order] = wid_pos.ravel()
    return wid, order


def np_estimate_all(data: Dataset, h: int, action: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Estimates and match counts for every player as target."""
    wid, _ = _windows(data, h)
    counts = np.bincount(wid)
    hits = np.bincount(wid, weights=(data.Y == action).astype(float), minlength=counts.size)
    return hits[wid] / counts[wid], counts[wid]


def np_estimate_detail(data: Dataset, cfg: NpConfig, action: int = 1) -> NpEstimate:
    n = data.n
    if not 0 <= cfg.target < n:
        raise IndexError(f"target {cfg.target} out of range [0, {n})")
    wid, _ = _windows(data, cfg.h)
    match = wid == wid[cfg.target]
    m = int(match.sum())
    if m == 0:  # the target always matches itself; kept as a hard guard
        raise NoMatchError("no matching window")
    est = float((data.Y[match] == action).sum() / m)
    return NpEstimate(est, m, cfg.h)


def np_estimate(data: Dataset, cfg: NpConfig, action: int = 1) -> float:
    """Estimated probability that ``cfg.target`` chooses ``action``."""
    return np_estimate_detail(data, cfg, action).estimate
