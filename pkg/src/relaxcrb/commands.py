"""Subcommand implementations: evaluate, optimize, simulate, compare.

Each command returns a ``CommandResult``: the report tables plus counts of
protocols (or designs) that succeeded and failed, from which the CLI derives
its exit code.  Failures are recorded inline in the summary table's
``error`` column and never abort the remaining work.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import ConfigError, NoFeasiblePoint, RelaxCrbError
from .estimation import EfficiencyMap, equivalent_snr, pcrb, range_map
from .montecarlo import TrialConfig, run_trials
from .optimizer import optimize_protocol, worst_case_efficiency
from .report import ReportTable
from .sequences import Sequence

log = logging.getLogger(__name__)

GAMMA_UNIT = "1/sqrt(s)"

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILED = 0, 2, 3, 4


@dataclass
class CommandResult:
    tables: list[ReportTable]
    n_ok: int
    n_failed: int

    @property
    def exit_code(self) -> int:
        if self.n_failed == 0:
            return EXIT_OK
        return EXIT_PARTIAL if self.n_ok else EXIT_FAILED


def _finite(v):
    """None for missing or non-finite numbers (degenerate grid points)."""
    if v is None:
        return None
    v = float(v)
    return v if np.isfinite(v) else None


def _summary_table(name: str = "summary") -> ReportTable:
    cols = [
        ("label", ""), ("family", ""), ("protocol", ""), ("n_acq", ""), ("t_seq", "ms"),
        ("snr", ""), ("gamma_t1", GAMMA_UNIT), ("sens_t1", "1/ms"), ("orth_t1", ""),
        ("pcrb_t1", "%"), ("gamma_t2", GAMMA_UNIT), ("sens_t2", "1/ms"), ("orth_t2", ""),
        ("pcrb_t2", "%"), ("error", ""),
    ]
    return ReportTable(name, [c for c, _ in cols], [u for _, u in cols])


def _curve_table(name: str = "curves") -> ReportTable:
    cols = [
        ("label", ""), ("t1", "ms"), ("t2", "ms"), ("sens_t1", "1/ms"), ("orth_t1", ""),
        ("crb_t1", "ms^2"), ("pcrb_t1", "%"), ("gamma_t1", GAMMA_UNIT), ("sens_t2", "1/ms"),
        ("orth_t2", ""), ("crb_t2", "ms^2"), ("pcrb_t2", "%"), ("gamma_t2", GAMMA_UNIT),
    ]
    return ReportTable(name, [c for c, _ in cols], [u for _, u in cols])


def _map_for(protocol: Sequence, config: RunConfig) -> EfficiencyMap:
    m = range_map(protocol, config.tissue_range, config.snr)
    n_bad = int(np.count_nonzero(m.degenerate))
    if n_bad:
        raise RelaxCrbError(f"bound undefined at {n_bad} of {m.t1.size} grid points")
    return m


def _add_curves(table: ReportTable, label: str, m: EfficiencyMap) -> None:
    keys = ["sens_t1", "orth_t1", "crb_t1", "pcrb_t1", "gamma_t1"]
    if m.joint:
        keys += ["sens_t2", "orth_t2", "crb_t2", "pcrb_t2", "gamma_t2"]
    for i in range(m.t1.size):
        table.add(
            label=label,
            t1=m.t1[i],
            t2=m.t2[i] if m.joint else None,
            **{k: _finite(getattr(m, k)[i]) for k in keys},
        )


def _add_summary(table: ReportTable, label: str, protocol: Sequence, snr, m=None, error=None):
    row = dict(
        label=label,
        family=protocol.family,
        protocol=protocol.summary(),
        n_acq=protocol.n_acq,
        t_seq=protocol.t_seq,
        snr=snr,
        error=error,
    )
    if m is not None:
        row.update({k: _finite(v) for k, v in m.averages().items()})
    table.add(**row)


def _evaluate_protocols(protocols: dict[str, Sequence], config: RunConfig):
    summary, curves = _summary_table(), _curve_table()
    maps, errors = {}, {}
    for label, protocol in protocols.items():
        try:
            m = _map_for(protocol, config)
        except RelaxCrbError as exc:
            log.warning("%s: %s", label, exc)
            errors[label] = str(exc)
            _add_summary(summary, label, protocol, config.snr, error=str(exc))
            continue
        maps[label] = m
        _add_summary(summary, label, protocol, config.snr, m)
        _add_curves(curves, label, m)
    return summary, curves, maps, errors


def cmd_evaluate(config: RunConfig) -> CommandResult:
    """Per-grid-point Sens, Orth, CRB, PCRB and efficiency plus range averages."""
    if not config.protocols:
        raise ConfigError("evaluate needs at least one [protocol ...] section")
    summary, curves, maps, errors = _evaluate_protocols(config.protocols, config)
    return CommandResult([summary, curves], len(maps), len(errors))


def cmd_optimize(config: RunConfig) -> CommandResult:
    """Max-min design for each [design ...] section, then evaluate the winners."""
    if not config.designs:
        raise ConfigError("optimize needs at least one [design ...] section")
    cols = [
        ("label", ""), ("family", ""), ("rho", ""), ("lambda_min", GAMMA_UNIT),
        ("gamma_avg_t1", GAMMA_UNIT), ("gamma_avg_t2", GAMMA_UNIT), ("converged", ""),
        ("restarts", ""), ("protocol", ""), ("warning", ""), ("error", ""),
    ]
    designs = ReportTable("designs", [c for c, _ in cols], [u for _, u in cols])
    trace = ReportTable("trace", ["label", "restart", "best_lambda_min"], ["", "", GAMMA_UNIT])
    winners: dict[str, Sequence] = {}
    n_failed = 0
    for label, spec in config.designs.items():
        try:
            res = optimize_protocol(spec, config.tissue_range, config.snr)
        except (NoFeasiblePoint, ValueError) as exc:
            log.warning("%s: %s", label, exc)
            n_failed += 1
            designs.add(label=label, family=spec.family, rho=spec.effective_rho, error=str(exc))
            continue
        for w in res.warnings:
            log.warning("%s: %s", label, w)
        winners[label] = res.protocol
        designs.add(
            label=label,
            family=spec.family,
            rho=spec.effective_rho,
            lambda_min=res.lambda_min,
            gamma_avg_t1=res.gamma_avg_t1,
            gamma_avg_t2=res.gamma_avg_t2,
            converged=res.converged,
            restarts=len(res.trace),
            protocol=res.protocol.summary(),
            warning="; ".join(res.warnings) or None,
        )
        for r, v in enumerate(res.trace):
            trace.add(label=label, restart=r, best_lambda_min=v)
    summary, curves, _, errors = _evaluate_protocols(winners, config)
    return CommandResult([designs, trace, summary, curves], len(winners) - len(errors), n_failed + len(errors))


def cmd_simulate(config: RunConfig) -> CommandResult:
    """Monte Carlo MEE/Rbias at the equivalent SNR of each protocol."""
    if not config.protocols:
        raise ConfigError("simulate needs at least one [protocol ...] section")
    cols = [
        ("label", ""), ("family", ""), ("t_seq", "ms"), ("snr_eq", ""), ("n_trials", ""),
        ("n_points", ""), ("n_failed", ""), ("pcrb_t1", "%"), ("mee_t1", "%"),
        ("rbias_t1", "%"), ("pcrb_t2", "%"), ("mee_t2", "%"), ("rbias_t2", "%"), ("error", ""),
    ]
    summary = ReportTable("summary", [c for c, _ in cols], [u for _, u in cols])
    ccols = [
        ("label", ""), ("t1", "ms"), ("t2", "ms"), ("n_failed", ""), ("pcrb_t1", "%"),
        ("mee_t1", "%"), ("rbias_t1", "%"), ("pcrb_t2", "%"), ("mee_t2", "%"),
        ("rbias_t2", "%"), ("error", ""),
    ]
    curves = ReportTable("curves", [c for c, _ in ccols], [u for _, u in ccols])
    n_ok = n_failed = 0
    for label, protocol in config.protocols.items():
        snr_eq = equivalent_snr(config.snr, config.t_scan, protocol.t_seq)
        points = config.tissue_range.points(protocol.joint)
        try:
            m = _map_for(protocol, config)
        except RelaxCrbError as exc:
            n_failed += 1
            summary.add(label=label, family=protocol.family, t_seq=protocol.t_seq,
                        snr_eq=snr_eq, error=str(exc))
            continue
        # Bounds at the equivalent SNR scale as 1/snr.
        scale = config.snr / snr_eq
        bound1 = pcrb(m.crb_t1, m.t1) * scale
        bound2 = pcrb(m.crb_t2, m.t2) * scale if m.joint else None
        tc = TrialConfig(
            protocol=protocol,
            points=points,
            snr=snr_eq,
            n_trials=config.n_trials,
            seed=config.seed,
            threads=config.threads or 1,
        )
        report = run_trials(tc)
        good = [p for p in report.points if p.t1 is not None]
        point_failures = sum(p.n_failed for p in report.points)
        for i, p in enumerate(report.points):
            curves.add(
                label=label,
                t1=p.tissue.t1,
                t2=p.tissue.t2 if protocol.joint else None,
                n_failed=p.n_failed,
                pcrb_t1=bound1[i],
                mee_t1=p.t1.mee if p.t1 else None,
                rbias_t1=p.t1.rbias if p.t1 else None,
                pcrb_t2=bound2[i] if bound2 is not None else None,
                mee_t2=p.t2.mee if p.t2 else None,
                rbias_t2=p.t2.rbias if p.t2 else None,
                error=p.error,
            )
        if point_failures:
            log.warning("%s: %d of %d fits failed", label, point_failures,
                        config.n_trials * len(points))
        row = dict(
            label=label,
            family=protocol.family,
            t_seq=protocol.t_seq,
            snr_eq=snr_eq,
            n_trials=config.n_trials,
            n_points=len(points),
            n_failed=point_failures,
            pcrb_t1=float(np.mean(bound1)),
            pcrb_t2=float(np.mean(bound2)) if bound2 is not None else None,
        )
        if not good:
            n_failed += 1
            row["error"] = "all fits failed at every tissue point"
        else:
            n_ok += 1
            row.update(mee_t1=report.mean_mee("t1"), rbias_t1=report.mean_rbias("t1"))
            if protocol.joint:
                row.update(mee_t2=report.mean_mee("t2"), rbias_t2=report.mean_rbias("t2"))
            if len(good) < len(points):
                row["error"] = f"all fits failed at {len(points) - len(good)} tissue points"
        summary.add(**row)
    return CommandResult([summary, curves], n_ok, n_failed)


def cmd_compare(config: RunConfig) -> CommandResult:
    """Rank protocols by average T1 efficiency (stable for ties)."""
    if len(config.protocols) < 2:
        raise ConfigError("compare needs at least two [protocol ...] sections")
    summary, _, maps, errors = _evaluate_protocols(config.protocols, config)
    cols = [
        ("rank", ""), ("label", ""), ("family", ""), ("t_seq", "ms"),
        ("gamma_t1", GAMMA_UNIT), ("sens_t1", "1/ms"), ("orth_t1", ""),
        ("gamma_t2", GAMMA_UNIT), ("sens_t2", "1/ms"), ("orth_t2", ""),
        ("lambda_min_t1", GAMMA_UNIT), ("error", ""),
    ]
    ranking = ReportTable("ranking", [c for c, _ in cols], [u for _, u in cols])
    labels = list(config.protocols)
    order = sorted(maps, key=lambda k: -maps[k].averages()["gamma_t1"])
    for rank, label in enumerate(order, start=1):
        avg = maps[label].averages()
        protocol = config.protocols[label]
        ranking.add(
            rank=rank,
            label=label,
            family=protocol.family,
            t_seq=protocol.t_seq,
            lambda_min_t1=worst_case_efficiency(protocol, config.tissue_range, 1.0, config.snr).value,
            **{k: avg.get(k) for k in ("gamma_t1", "sens_t1", "orth_t1", "gamma_t2", "sens_t2", "orth_t2")},
        )
    for label in labels:
        if label in errors:
            p = config.protocols[label]
            ranking.add(label=label, family=p.family, t_seq=p.t_seq, error=errors[label])
    return CommandResult([ranking, summary], len(maps), len(errors))


COMMANDS = {
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
}
