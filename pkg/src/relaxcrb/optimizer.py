"""Max-min protocol design.

For a candidate protocol the worst-case weighted efficiency
``min over the tissue grid of rho*Gamma1 + (1-rho)*Gamma2`` is computed by
exhaustive grid evaluation.  The outer maximization runs Nelder-Mead from
several random starts in a unit-cube encoding of each family's box
constraints; points outside the box are projected back onto it.

Readout times are encoded linearly (start, step) and the acquisition count
is searched over an explicit integer set.  For FIR2 and LL the repetition
time enters as ``tr_gap`` (TR minus the last readout time), so the ordering
constraint max(t) < TR holds for every point of the box.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import NoFeasiblePoint, ProtocolError
from .estimation import range_map
from .nelder_mead import nelder_mead_minimize
from .sequences import DESPOT, FIR2, LL, SEIR, SEQUENCE_TYPES, SR, Sequence, linear_times
from .tissue import TissueRange

log = logging.getLogger(__name__)

T_MAX = 20000.0
REDUNDANT_ANGLE_DEG = 0.5

# Acquisition counts used when a design does not give one.
DEFAULT_N_ACQ = {"CIR": 5, "SR": 12, "FIR1": 7, "FIR2": 9, "LL": 15}


@dataclass(frozen=True)
class WorstCase:
    value: float
    degenerate: bool
    t1: float
    t2: float


def worst_case_efficiency(
    protocol: Sequence, tissue_range: TissueRange, rho: float = 1.0, snr: float = 100.0
) -> WorstCase:
    """Minimum of rho*Gamma1 + (1-rho)*Gamma2 over the range grid.

    A grid point where the bound does not exist contributes zero and sets
    ``degenerate``.
    """
    if not protocol.joint:
        rho = 1.0
    m = range_map(protocol, tissue_range, snr)
    lam = rho * m.gamma_t1
    if m.joint:
        lam = lam + (1.0 - rho) * m.gamma_t2
    lam = np.where(np.isfinite(lam), lam, 0.0)
    i = int(np.argmin(lam))
    return WorstCase(float(lam[i]), bool(m.degenerate.any()), float(m.t1[i]), float(m.t2[i]))


@dataclass(frozen=True)
class DesignSpec:
    """What to optimize.

    ``bounds`` overrides per-variable boxes (lo == hi pins a variable);
    ``fixed`` carries structural settings that are not searched (e.g.
    ``n_echo``, ``n_spgr``, ``tr_spgr``).
    """

    family: str
    n_acq: tuple[int, ...] = ()
    bounds: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    fixed: Mapping[str, float] = field(default_factory=dict)
    rho: float | None = None
    multistart: int = 20
    rng_seed: int = 0
    max_evals: int = 2000

    def __post_init__(self):
        family = self.family.upper()
        if family not in SEQUENCE_TYPES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "family", family)
        n = self.n_acq
        object.__setattr__(self, "n_acq", (int(n),) if np.isscalar(n) else tuple(int(v) for v in n))
        if self.rho is not None and not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")

    @property
    def joint(self) -> bool:
        return SEQUENCE_TYPES[self.family].joint

    @property
    def effective_rho(self) -> float:
        if not self.joint:
            return 1.0
        return 0.5 if self.rho is None else float(self.rho)


@dataclass
class OptimizationResult:
    protocol: Sequence
    lambda_min: float
    gamma_avg_t1: float
    gamma_avg_t2: float | None
    trace: list[float]
    converged: bool
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class _Space:
    names: tuple[str, ...]
    lo: np.ndarray
    hi: np.ndarray
    build: Callable[[dict], Sequence]


def _space(spec: DesignSpec, n: int, tissue_range: TissueRange) -> _Space:
    fam = spec.family
    fixed = dict(spec.fixed)
    timing = (0.0, T_MAX)
    # Default step keeps the whole train inside T_MAX when it starts at zero.
    step = (1.0, T_MAX / max(n - 1, 1))
    positive = (1.0, T_MAX)

    if fam in ("CIR", "SR", "FIR1", "FIR2"):
        box = {"ti_start": timing, "ti_step": step}
        if fam == "CIR":
            box["w"] = (5.0 * tissue_range.t1_max, T_MAX)
        elif fam == "FIR1":
            box["w"] = positive
        elif fam == "FIR2":
            box["tr_gap"] = positive

        def build(v):
            ti = linear_times(v["ti_start"], v["ti_step"], n)
            if fam == "SR":
                return SR(ti=ti)
            if fam == "FIR2":
                return FIR2(ti=ti, tr=ti[-1] + v["tr_gap"])
            return SEQUENCE_TYPES[fam](ti=ti, w=v["w"])

    elif fam == "LL":
        box = {"alpha": (1.0, 90.0), "t_start": positive, "t_step": step, "tr_gap": positive}

        def build(v):
            t = linear_times(v["t_start"], v["t_step"], n)
            return LL(alpha=v["alpha"], t=t, tr=t[-1] + v["tr_gap"])

    elif fam == "SEIR":
        box = {"tr_ir": positive, "ti": timing, "tr_se": positive, "te": (1.0, 100.0)}
        n_echo = int(fixed.get("n_echo", 4))
        convention = fixed.get("tseq_convention", "with_ti")

        def build(v):
            return SEIR(n_echo=n_echo, tseq_convention=convention, **v)

    elif fam == "DESPOT":
        n_spgr = int(fixed.get("n_spgr", 1))
        n_ssfp = int(fixed.get("n_ssfp", 2))
        tr_spgr = float(fixed.get("tr_spgr", 6.8))
        tr_ssfp = float(fixed.get("tr_ssfp", 3.4))
        box = {f"alpha_spgr_{i}": (1.0, 90.0) for i in range(n_spgr)}
        box.update({f"alpha_ssfp_{i}": (1.0, 179.0) for i in range(n_ssfp)})

        def build(v):
            return DESPOT(
                alpha_spgr=[v[f"alpha_spgr_{i}"] for i in range(n_spgr)],
                tr_spgr=tr_spgr,
                alpha_ssfp=[v[f"alpha_ssfp_{i}"] for i in range(n_ssfp)],
                tr_ssfp=tr_ssfp,
            )

    else:  # pragma: no cover - guarded by DesignSpec
        raise ValueError(fam)

    unknown = set(spec.bounds) - set(box)
    if unknown:
        raise ValueError(f"unknown {fam} design variables: {sorted(unknown)}")
    box.update({k: tuple(map(float, v)) for k, v in spec.bounds.items()})
    names = tuple(box)
    lo = np.array([box[k][0] for k in names])
    hi = np.array([box[k][1] for k in names])
    return _Space(names, lo, hi, build)


def _unit_simplex(u0: np.ndarray, step: float = 0.1) -> np.ndarray:
    k = u0.size
    sim = np.repeat(u0[None], k + 1, axis=0)
    for j in range(k):
        sim[j + 1, j] += step if u0[j] + step <= 1.0 else -step
    return sim


def _search_counts(spec: DesignSpec) -> tuple[int, ...]:
    if spec.family == "DESPOT":
        return (int(spec.fixed.get("n_spgr", 1)) + int(spec.fixed.get("n_ssfp", 2)),)
    if spec.family == "SEIR":
        return (2 * int(spec.fixed.get("n_echo", 4)),)
    return spec.n_acq or (DEFAULT_N_ACQ[spec.family],)


def optimize_protocol(
    spec: DesignSpec, tissue_range: TissueRange, snr: float = 100.0
) -> OptimizationResult:
    """Maximize the worst-case weighted efficiency over the tissue range."""
    rho = spec.effective_rho
    best = None  # (value, protocol)
    trace: list[float] = []
    any_converged = False

    for n in _search_counts(spec):
        space = _space(spec, n, tissue_range)
        if np.any(space.lo > space.hi):
            continue
        free = space.hi > space.lo
        span = space.hi - space.lo

        def protocol_at(u, space=space, free=free, span=span):
            x = space.lo.copy()
            x[free] += np.clip(u, 0.0, 1.0) * span[free]
            return space.build({k: float(v) for k, v in zip(space.names, x)})

        def objective(u, protocol_at=protocol_at):
            try:
                p = protocol_at(u)
            except ProtocolError:
                return 0.0
            wc = worst_case_efficiency(p, tissue_range, rho, snr)
            return 0.0 if wc.degenerate else -wc.value

        for r in range(spec.multistart):
            rng = np.random.default_rng(np.random.SeedSequence(spec.rng_seed, spawn_key=(n, r)))
            u0 = rng.uniform(size=int(free.sum()))
            if u0.size == 0:
                value = -objective(u0)
                converged = True
                u_best = u0
            else:
                res = nelder_mead_minimize(
                    objective,
                    u0,
                    maxfev=spec.max_evals,
                    xatol=1e-7,
                    fatol=1e-9,
                    simplex=_unit_simplex(u0),
                )
                value, converged, u_best = -res.fun, res.converged, res.x
            any_converged |= converged
            if value > 0 and (best is None or value > best[0]):
                best = (value, protocol_at(u_best))
            trace.append(best[0] if best else 0.0)
            log.debug("%s n=%d restart %d: %.6g", spec.family, n, r, value)

    if best is None:
        raise NoFeasiblePoint(f"no feasible {spec.family} protocol found")
    protocol = best[1]
    wc = worst_case_efficiency(protocol, tissue_range, rho, snr)
    avg = range_map(protocol, tissue_range, snr).averages()
    notes = []
    if isinstance(protocol, DESPOT) and len(protocol.alpha_spgr) > 1:
        spread = max(protocol.alpha_spgr) - min(protocol.alpha_spgr)
        if spread < REDUNDANT_ANGLE_DEG:
            notes.append(
                f"SPGR flip angles coalesced (spread {spread:.3f} deg): the SPGR acquisitions "
                "are redundant; one SPGR acquisition with proportionally longer TR is equivalent"
            )
    return OptimizationResult(
        protocol=protocol,
        lambda_min=wc.value,
        gamma_avg_t1=avg["gamma_t1"],
        gamma_avg_t2=avg.get("gamma_t2"),
        trace=trace,
        converged=any_converged,
        warnings=notes,
    )
