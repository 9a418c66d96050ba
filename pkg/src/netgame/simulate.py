"""Equilibrium play simulation and the Monte Carlo replication harness.

Random streams: every replication ``r`` of a design seeded with
``base_seed`` uses ``numpy.random.SeedSequence([base_seed, r])``, spawned
into three PCG64 streams (network, covariates, actions). Any subset of
replications can therefore be rerun on its own and reproduces bit for bit.
"""
from __future__ import annotations

import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimate import Dataset, OptimizerSettings, amle, choose_h
from .game import ChoiceProfile, GameState, PayoffParams, contraction_modulus, solve_equilibrium
from .network import generate_circle, generate_random, make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimDraw:
    Y: np.ndarray
    seed: object


def draw_actions(profile: ChoiceProfile | np.ndarray, seed) -> SimDraw:
    """One independent categorical draw per player from its profile row."""
    sigma = profile.sigma if isinstance(profile, ChoiceProfile) else np.asarray(profile, dtype=float)
    ChoiceProfile(sigma).validate(1e-9)
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    u = rng.random(sigma.shape[0])
    cdf = np.cumsum(sigma, axis=1)[:, :-1]
    Y = (u[:, None] >= cdf).sum(axis=1)
    return SimDraw(Y.astype(np.int64), seed)


# ---------------------------------------------------------------------------
# covariate distributions

_SPEC_RE = re.compile(r"^\s*(\w+)\s*\(([^)]*)\)\s*$")


def parse_column_spec(spec) -> dict:
    """Normalize ``"uniform(-0.5, 0.5)"`` style strings or dicts.

    Supported: ``uniform(a, b)``, ``normal(mean, var)``, ``bernoulli(p)``,
    ``constant(c)``.
    """
    if isinstance(spec, str):
        m = _SPEC_RE.match(spec)
        if not m:
            raise ValueError(f"cannot parse covariate spec {spec!r}")
        args = [float(a) for a in m.group(2).split(",") if a.strip()]
        kind = m.group(1).lower()
        keys = {"uniform": ("a", "b"), "normal": ("mean", "var"), "bernoulli": ("p",), "constant": ("value",)}
        if kind not in keys or len(args) != len(keys[kind]):
            raise ValueError(f"bad covariate spec {spec!r}")
        spec = {"dist": kind, **dict(zip(keys[kind], args))}
    spec = dict(spec)
    kind = spec.get("dist")
    if kind == "uniform":
        if not spec["a"] < spec["b"]:
            raise ValueError("uniform needs a < b")
    elif kind == "normal":
        if spec["var"] < 0:
            raise ValueError("normal variance must be nonnegative")
    elif kind == "bernoulli":
        if not 0 <= spec["p"] <= 1:
            raise ValueError("bernoulli p must be in [0, 1]")
    elif kind != "constant":
        raise ValueError(f"unknown covariate distribution {kind!r}")
    return spec


def draw_covariates(specs, n: int, rng: np.random.Generator) -> np.ndarray:
    cols = []
    for spec in map(parse_column_spec, specs):
        kind = spec["dist"]
        if kind == "uniform":
            cols.append(rng.uniform(spec["a"], spec["b"], n))
        elif kind == "normal":
            cols.append(rng.normal(spec["mean"], np.sqrt(spec["var"]), n))
        elif kind == "bernoulli":
            cols.append((rng.random(n) < spec["p"]).astype(float))
        else:
            cols.append(np.full(n, float(spec["value"])))
    return np.column_stack(cols)


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class MCDesign:
    network: str
    n: int
    beta: list
    alpha: list
    R: int = 500
    h: int | None = None
    base_seed: int = 0
    x: list = field(default_factory=lambda: ["uniform(-0.5, 0.5)", "normal(0, 1)"])
    box: float | None = None
    gtol: float = 1e-6

    def __post_init__(self):
        if self.network not in ("circle", "random"):
            raise ValueError(f"network must be 'circle' or 'random', got {self.network!r}")
        self.params  # validates shapes
        if len(self.x) != self.params.d:
            raise ValueError(f"{len(self.x)} covariate specs for d={self.params.d}")
        for s in self.x:
            parse_column_spec(s)
        if self.R < 1:
            raise ValueError("R must be positive")

    @property
    def params(self) -> PayoffParams:
        return PayoffParams(self.beta, self.alpha)

    @property
    def radius(self) -> int:
        return choose_h(self.n) if self.h is None else int(self.h)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["h"] = self.radius
        return d


@dataclass
class Replication:
    index: int
    theta: np.ndarray
    se: np.ndarray
    converged: bool
    loglik: float
    error: str = ""


@dataclass
class MCResult:
    design: MCDesign
    names: list[str]
    estimates: np.ndarray  # R x P, NaN rows for failed replications
    std_errors: np.ndarray
    converged: np.ndarray
    errors: list[str]

    @property
    def replications(self) -> int:
        return self.estimates.shape[0]

    @property
    def ok(self) -> np.ndarray:
        return self.converged & np.all(np.isfinite(self.estimates), axis=1)

    @property
    def failures(self) -> int:
        return int((~self.ok).sum())

    @property
    def mean(self) -> np.ndarray:
        return self.estimates[self.ok].mean(axis=0)

    @property
    def sd(self) -> np.ndarray:
        return self.estimates[self.ok].std(axis=0, ddof=1)

    @property
    def mean_se(self) -> np.ndarray:
        return np.nanmean(self.std_errors[self.ok], axis=0)

    def summary(self) -> dict:
        return {
            "names": self.names,
            "true": self.design.params.to_vector().tolist(),
            "mean": self.mean.tolist(),
            "sd": self.sd.tolist(),
            "mean_se": self.mean_se.tolist(),
            "replications": self.replications,
            "failures": self.failures,
        }


def replication_data(design: MCDesign, r: int) -> Dataset:
    """Network, covariates and equilibrium actions of replication ``r``."""
    ss_net, ss_x, ss_y = np.random.SeedSequence([design.base_seed, r]).spawn(3)
    if design.network == "circle":
        net = generate_circle(design.n)
    else:
        net = generate_random(design.n, ss_net)
    X = draw_covariates(design.x, design.n, make_rng(ss_x))
    state = GameState(net, X)
    profile, _ = solve_equilibrium(state, design.params)
    Y = draw_actions(profile, make_rng(ss_y)).Y
    return Dataset(state, Y)


def run_replication(design: MCDesign, r: int) -> Replication:
    P = design.params.size
    try:
        data = replication_data(design, r)
        res = amle(
            data,
            design.radius,
            box=design.box,
            settings=OptimizerSettings(gtol=design.gtol),
            K=design.params.K,
        )
        return Replication(r, res.theta_hat.to_vector(), res.std_errors, res.converged, res.loglik)
    except Exception as exc:  # a failed replication is counted, not fatal
        log.warning("replication %d failed: %s", r, exc)
        return Replication(r, np.full(P, np.nan), np.full(P, np.nan), False, float("nan"), repr(exc))


def _run_chunk(args):
    design, idx = args
    return [run_replication(design, r) for r in idx]


def run_montecarlo(design: MCDesign, n_jobs: int = 1, replications=None) -> MCResult:
    """Simulate and re-estimate ``design.R`` datasets.

    ``replications`` selects a subset of indices to (re)run; results are
    stored by replication index, so worker scheduling never changes them.
    """
    lam = contraction_modulus(design.params)
    if lam >= 1:
        raise ValueError(f"true parameters give contraction modulus {lam:.3f} >= 1")
    idx = list(range(design.R)) if replications is None else [int(r) for r in replications]
    if n_jobs > 1 and len(idx) > 1:
        chunks = [idx[j::n_jobs] for j in range(n_jobs)]
        with ProcessPoolExecutor(n_jobs) as ex:
            reps = [rep for out in ex.map(_run_chunk, [(design, c) for c in chunks]) for rep in out]
    else:
        reps = _run_chunk((design, idx))
    reps.sort(key=lambda rep: rep.index)
    P = design.params.size
    est = np.full((len(idx), P), np.nan)
    se = np.full((len(idx), P), np.nan)
    conv = np.zeros(len(idx), dtype=bool)
    errors = [""] * len(idx)
    for j, rep in enumerate(reps):
        est[j], se[j], conv[j], errors[j] = rep.theta, rep.se, rep.converged, rep.error
    names = design.params.names()
    return MCResult(design, names, est, se, conv, errors)

