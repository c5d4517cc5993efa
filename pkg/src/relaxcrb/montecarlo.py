"""Monte Carlo validation of the bounds with unconstrained NLSE fits.

Random streams: every (tissue point index, trial index) pair owns an
independent PCG64 stream seeded by ``SeedSequence(seed, spawn_key=(point,
trial))``.  A trial's noise therefore does not depend on batching, chunking
or thread count.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AllTrialsFailed, FitDiverged
from .nelder_mead import nelder_mead_batch
from .sequences import Sequence
from .tissue import TissueParams

DEFAULT_INIT_T1 = 2000.0
DEFAULT_INIT_T2 = 200.0
XATOL = 1e-7
FATOL = 1e-15


def trial_rng(seed: int, point: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(point), int(trial)))
    return np.random.Generator(np.random.PCG64(ss))


def simulate_acquisition(
    protocol: Sequence, tissue: TissueParams, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """y = m0 * h + n with n ~ N(0, sigma^2) iid."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    s = tissue.m0 * protocol.weights(tissue.t1, tissue.t2)
    return s + sigma * rng.standard_normal(s.shape)


def _initial_guess(Y, protocol, init_t1, init_t2):
    h0 = protocol.weights(init_t1, init_t2)
    m0 = np.max(np.abs(Y), axis=-1) / np.max(np.abs(h0))
    m0 = np.where(m0 > 0, m0, 1.0)
    cols = [m0, np.full(len(Y), init_t1)]
    if protocol.joint:
        cols.append(np.full(len(Y), init_t2))
    return np.stack(cols, axis=-1)


def fit_batch(
    Y: np.ndarray,
    protocol: Sequence,
    init_t1: float = DEFAULT_INIT_T1,
    init_t2: float = DEFAULT_INIT_T2,
    max_evals: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares fits of rows of ``Y``.

    Returns estimates (B, p) ordered [m0, t1(, t2)] and a success mask.
    The search runs in coordinates scaled by the starting point.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    theta0 = _initial_guess(Y, protocol, init_t1, init_t2)
    p = theta0.shape[1]
    if max_evals is None:
        max_evals = 2000 * p
    norm = np.sum(Y**2, axis=-1)
    norm = np.where(norm > 0, norm, 1.0)
    joint = protocol.joint

    def objective(x, rows):
        theta = x * theta0[rows]
        t2 = theta[:, 2] if joint else init_t2
        with np.errstate(all="ignore"):
            s = theta[:, :1] * protocol.weights(theta[:, 1], t2)
            return np.sum((Y[rows] - s) ** 2, axis=-1) / norm[rows]

    res = nelder_mead_batch(
        objective, np.ones_like(theta0), maxfev=max_evals, xatol=XATOL, fatol=FATOL
    )
    theta = res.x * theta0
    ok = res.converged & np.all(np.isfinite(theta), axis=-1)
    return theta, ok


def nlse_fit(
    y,
    protocol: Sequence,
    init_t1: float = DEFAULT_INIT_T1,
    init_t2: float = DEFAULT_INIT_T2,
    max_evals: int | None = None,
) -> TissueParams:
    """Unconstrained Nelder-Mead least-squares estimate of the tissue parameters.

    For T1-only sequences the returned t2 is the (unused) starting value.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (protocol.n_acq,):
        raise ValueError(f"expected {protocol.n_acq} samples, got shape {y.shape}")
    theta, ok = fit_batch(y[None], protocol, init_t1, init_t2, max_evals)
    if not ok[0]:
        raise FitDiverged(f"fit did not converge (estimate {theta[0]})")
    m0, t1 = theta[0, 0], theta[0, 1]
    t2 = theta[0, 2] if protocol.joint else init_t2
    if m0 <= 0 or t1 <= 0 or t2 <= 0:
        raise FitDiverged(f"non-physical estimate {theta[0]}")
    return TissueParams(float(m0), float(t1), float(t2))


@dataclass(frozen=True)
class TrialConfig:
    protocol: Sequence
    points: tuple[TissueParams, ...]
    snr: float | None = None
    sigma: float | None = None
    n_trials: int = 5000
    seed: int = 0
    init_t1: float = DEFAULT_INIT_T1
    init_t2: float = DEFAULT_INIT_T2
    max_evals: int | None = None
    threads: int = 1
    chunk_size: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if (self.snr is None) == (self.sigma is None):
            raise ValueError("give exactly one of snr or sigma")
        if self.snr is not None and self.snr <= 0:
            raise ValueError("snr must be > 0")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be > 0")

    def sigma_for(self, tissue: TissueParams) -> float:
        return self.sigma if self.sigma is not None else tissue.m0 / self.snr


@dataclass(frozen=True)
class ParamStats:
    true: float
    mean: float
    std: float
    mee: float  # percent
    rbias: float  # percent


@dataclass(frozen=True)
class PointStats:
    tissue: TissueParams
    n_trials: int
    n_failed: int
    t1: ParamStats | None
    t2: ParamStats | None = None
    error: str | None = None


@dataclass
class TrialReport:
    protocol: Sequence
    seed: int
    points: list[PointStats]
    wall_time: float = field(default=0.0, compare=False)

    def mean_mee(self, which: str = "t1") -> float:
        vals = [getattr(p, which).mee for p in self.points if getattr(p, which) is not None]
        return float(np.mean(vals))

    def mean_rbias(self, which: str = "t1") -> float:
        vals = [getattr(p, which).rbias for p in self.points if getattr(p, which) is not None]
        return float(np.mean(vals))


def _param_stats(est: np.ndarray, true: float) -> ParamStats:
    mean = float(np.mean(est))
    std = float(np.std(est, ddof=1)) if est.size > 1 else 0.0
    return ParamStats(
        true=true, mean=mean, std=std, mee=100.0 * std / true, rbias=100.0 * (mean - true) / true
    )


def noise_matrix(config: TrialConfig, point_index: int, trials: range, n_acq: int) -> np.ndarray:
    return np.stack(
        [trial_rng(config.seed, point_index, t).standard_normal(n_acq) for t in trials]
    )


def run_point(config: TrialConfig, point_index: int) -> PointStats:
    protocol = config.protocol
    tissue = config.points[point_index]
    s = tissue.m0 * protocol.weights(tissue.t1, tissue.t2)
    sigma = config.sigma_for(tissue)
    chunk = config.chunk_size or config.n_trials
    estimates, oks = [], []
    for start in range(0, config.n_trials, chunk):
        trials = range(start, min(start + chunk, config.n_trials))
        Y = s + sigma * noise_matrix(config, point_index, trials, protocol.n_acq)
        theta, ok = fit_batch(Y, protocol, config.init_t1, config.init_t2, config.max_evals)
        estimates.append(theta)
        oks.append(ok)
    theta = np.concatenate(estimates)
    ok = np.concatenate(oks)
    n_failed = int(np.count_nonzero(~ok))
    if n_failed == config.n_trials:
        err = AllTrialsFailed(f"all {config.n_trials} fits failed at {tissue}")
        return PointStats(tissue, config.n_trials, n_failed, None, None, error=str(err))
    good = theta[ok]
    t1 = _param_stats(good[:, 1], tissue.t1)
    t2 = _param_stats(good[:, 2], tissue.t2) if protocol.joint else None
    return PointStats(tissue, config.n_trials, n_failed, t1, t2)


def run_trials(config: TrialConfig) -> TrialReport:
    """MEE and Rbias per tissue point from ``n_trials`` noisy fits each."""
    start = time.perf_counter()
    idx = range(len(config.points))
    if config.threads > 1 and len(config.points) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            points = list(pool.map(lambda i: run_point(config, i), idx))
    else:
        points = [run_point(config, i) for i in idx]
    return TrialReport(
        protocol=config.protocol,
        seed=config.seed,
        points=points,
        wall_time=time.perf_counter() - start,
    )

