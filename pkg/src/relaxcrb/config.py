"""Run configuration: INI-style text with explicit units.

Example::

    [run]
    snr = 100
    t_scan = 10 s
    n_trials = 5000
    seed = 1

    [range]
    t1_min = 1000 ms
    t1_max = 2000 ms

    [protocol cir]
    family = CIR
    ti = [0:450:1800] ms
    w = 10000 ms

    [design cir-opt]
    family = CIR
    n_acq = 5
    bound.w = [10000, 10000] ms

Timing values need a unit (``ms`` or ``s``); flip angles need ``deg``.
``[start:step:end]`` lists include ``end``.  Unknown keys are rejected.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, MissingField, ProtocolError, UnitError
from .optimizer import DesignSpec
from .sequences import SEQUENCE_TYPES, Sequence, protocol_from_dict
from .tissue import TissueRange

COMMANDS = ("evaluate", "optimize", "simulate", "compare")
FORMATS = ("csv", "json")

TIMING_FIELDS = {
    "ti", "w", "tr", "t", "tr_ir", "tr_se", "te", "tr_spgr", "tr_ssfp",
}
ANGLE_FIELDS = {"alpha", "alpha_spgr", "alpha_ssfp"}
INT_FIELDS = {"n_echo"}
TEXT_FIELDS = {"recovery", "tseq_convention"}
SCALAR_FIELDS = {"w", "tr", "tr_ir", "tr_se", "te", "tr_spgr", "tr_ssfp", "alpha"}
# SEIR's ti is a single inversion time; everywhere else ti is a list.
SCALAR_BY_FAMILY = {"SEIR": {"ti"}}

RUN_KEYS = {"snr", "t_scan", "n_trials", "seed", "threads", "format", "out"}
RANGE_KEYS = {"t1_min", "t1_max", "t2_min", "t2_max", "m0", "grid_t1", "grid_t2"}
DESIGN_KEYS = {"family", "n_acq", "rho", "multistart", "seed", "max_evals"}
DESIGN_FIXED = {"n_echo", "n_spgr", "n_ssfp", "tr_spgr", "tr_ssfp", "tseq_convention"}

_UNIT_SCALE = {"ms": 1.0, "s": 1000.0}
_VALUE_RE = re.compile(r"^(?P<num>.*?)\s*(?P<unit>[a-zA-Z]+)?$")


@dataclass(frozen=True)
class RunConfig:
    protocols: dict[str, Sequence] = field(default_factory=dict)
    designs: dict[str, DesignSpec] = field(default_factory=dict)
    tissue_range: TissueRange = field(default_factory=TissueRange)
    snr: float = 100.0
    t_scan: float = 10000.0  # ms
    n_trials: int = 5000
    seed: int = 0
    threads: int | None = None
    out: Path | None = None
    format: str = "csv"
    command: str | None = None

    def __post_init__(self):
        if self.snr <= 0:
            raise ConfigError("snr must be > 0", field="snr")
        if self.t_scan <= 0:
            raise ConfigError("t_scan must be > 0", field="t_scan")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1", field="n_trials")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}", field="format")
        if self.command is not None and self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}", field="command")


class _Locator:
    """Map (section, key) back to a 1-based line number of the source text."""

    def __init__(self, text: str):
        self.lines: dict[tuple[str, str], int] = {}
        self.sections: dict[str, int] = {}
        section = None
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            m = re.match(r"^\[(.+)\]$", line)
            if m:
                section = m.group(1).strip()
                self.sections[section] = n
            elif section is not None and "=" in line and not line.startswith(("#", ";")):
                key = line.split("=", 1)[0].strip().lower()
                self.lines.setdefault((section, key), n)

    def __call__(self, section: str, key: str | None = None) -> int | None:
        if key is None:
            return self.sections.get(section)
        return self.lines.get((section, key), self.sections.get(section))


def _split_unit(raw: str) -> tuple[str, str | None]:
    m = _VALUE_RE.match(raw.strip())
    num, unit = m.group("num"), m.group("unit")
    if unit is None or num.endswith(("e", "E")):
        return raw.strip(), None
    return num.strip(), unit.lower()


def _numbers(text: str) -> list[float]:
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        text = text[1:-1]
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0:
            raise ValueError("range shorthand must be [start:step:end] with step > 0")
        start, step, end = parts
        n = int(np.floor((end - start) / step + 1e-9)) + 1
        if n < 1:
            raise ValueError("empty range")
        return [start + i * step for i in range(n)]
    return [float(v) for v in re.split(r"[,\s]+", text) if v]


class _Reader:
    def __init__(self, parser, locate):
        self.parser = parser
        self.locate = locate

    def error(self, cls, msg, section, key=None):
        return cls(msg, line=self.locate(section, key), field=key)

    def raw(self, section, key):
        return self.parser.get(section, key)

    def check_keys(self, section, allowed):
        for key in self.parser.options(section):
            if key not in allowed:
                raise self.error(ConfigError, f"unknown key in [{section}]", section, key)

    def number(self, section, key, kind=float):
        raw = self.raw(section, key)
        num, unit = _split_unit(raw)
        if unit is not None:
            raise self.error(ConfigError, f"unexpected unit {unit!r}", section, key)
        try:
            return kind(num)
        except ValueError:
            raise self.error(ConfigError, f"not a valid {kind.__name__}: {raw!r}", section, key) from None

    def quantity(self, section, key, units, scalar=True):
        """Parse ``value unit``; returns floats converted to the base unit."""
        raw = self.raw(section, key)
        num, unit = _split_unit(raw)
        if unit is None:
            raise self.error(UnitError, f"missing unit (one of {sorted(units)})", section, key)
        if unit not in units:
            raise self.error(UnitError, f"unknown unit {unit!r}", section, key)
        try:
            values = [v * units[unit] for v in _numbers(num)]
        except ValueError as exc:
            raise self.error(ConfigError, str(exc), section, key) from None
        if scalar:
            if len(values) != 1:
                raise self.error(ConfigError, "expected a single value", section, key)
            return values[0]
        return tuple(values)


def _units_for(key):
    if key in TIMING_FIELDS:
        return _UNIT_SCALE
    if key in ANGLE_FIELDS:
        return {"deg": 1.0}
    return None


def _read_run(rd: _Reader, kw: dict):
    s = "run"
    rd.check_keys(s, RUN_KEYS)
    opts = rd.parser.options(s)
    if "snr" in opts:
        kw["snr"] = rd.number(s, "snr")
    if "t_scan" in opts:
        kw["t_scan"] = rd.quantity(s, "t_scan", _UNIT_SCALE)
    if "n_trials" in opts:
        kw["n_trials"] = rd.number(s, "n_trials", int)
    if "seed" in opts:
        kw["seed"] = rd.number(s, "seed", int)
    if "threads" in opts:
        kw["threads"] = rd.number(s, "threads", int)
    if "format" in opts:
        kw["format"] = rd.raw(s, "format").strip().lower()
    if "out" in opts:
        kw["out"] = Path(rd.raw(s, "out").strip())


def _read_range(rd: _Reader) -> TissueRange:
    s = "range"
    rd.check_keys(s, RANGE_KEYS)
    kw = {}
    for key in rd.parser.options(s):
        if key.startswith(("t1_", "t2_")):
            kw[key] = rd.quantity(s, key, _UNIT_SCALE)
        elif key == "m0":
            kw["m0_fixed"] = rd.number(s, key)
        else:
            kw[key] = rd.number(s, key, int)
    try:
        return TissueRange(**kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid [range]: {exc}", line=rd.locate(s)) from None


def _read_protocol(rd: _Reader, section: str) -> Sequence:
    opts = rd.parser.options(section)
    if "family" not in opts:
        raise rd.error(MissingField, "protocol needs a family", section, "family")
    family = rd.raw(section, "family").strip().upper()
    if family not in SEQUENCE_TYPES:
        raise rd.error(ConfigError, f"unknown family {family!r}", section, "family")
    data = {"family": family}
    scalar = SCALAR_FIELDS | SCALAR_BY_FAMILY.get(family, set())
    for key in opts:
        if key == "family":
            continue
        units = _units_for(key)
        if units is not None:
            data[key] = rd.quantity(section, key, units, scalar=key in scalar)
        elif key in INT_FIELDS:
            data[key] = rd.number(section, key, int)
        elif key in TEXT_FIELDS:
            data[key] = rd.raw(section, key).strip()
        else:
            raise rd.error(ConfigError, f"unknown key for {family}", section, key)
    try:
        return protocol_from_dict(data)
    except ProtocolError as exc:
        raise ConfigError(f"invalid protocol [{section}]: {exc}", line=rd.locate(section)) from None


def _read_design(rd: _Reader, section: str) -> DesignSpec:
    opts = rd.parser.options(section)
    if "family" not in opts:
        raise rd.error(MissingField, "design needs a family", section, "family")
    kw: dict = {"family": rd.raw(section, "family").strip().upper()}
    bounds, fixed = {}, {}
    for key in opts:
        if key == "family":
            continue
        if key.startswith("bound."):
            name = key[len("bound."):]
            base = re.sub(r"_\d+$", "", name)
            base = {"ti_start": "ti", "ti_step": "ti", "t_start": "t", "t_step": "t", "tr_gap": "tr"}.get(base, base)
            units = _units_for(base)
            if units is None:
                raise rd.error(ConfigError, "unknown design variable", section, key)
            lo_hi = rd.quantity(section, key, units, scalar=False)
            if len(lo_hi) != 2:
                raise rd.error(ConfigError, "bounds need [lo, hi]", section, key)
            bounds[name] = lo_hi
        elif key in DESIGN_FIXED:
            units = _units_for(key)
            if units is not None:
                fixed[key] = rd.quantity(section, key, units)
            elif key == "tseq_convention":
                fixed[key] = rd.raw(section, key).strip()
            else:
                fixed[key] = rd.number(section, key, int)
        elif key == "n_acq":
            try:
                kw["n_acq"] = tuple(int(v) for v in _numbers(rd.raw(section, key)))
            except ValueError:
                raise rd.error(ConfigError, "n_acq must be integers", section, key) from None
        elif key == "rho":
            kw["rho"] = rd.number(section, key)
        elif key == "seed":
            kw["rng_seed"] = rd.number(section, key, int)
        elif key in DESIGN_KEYS:
            kw[key] = rd.number(section, key, int)
        else:
            raise rd.error(ConfigError, "unknown design key", section, key)
    try:
        return DesignSpec(bounds=bounds, fixed=fixed, **kw)
    except ValueError as exc:
        raise ConfigError(f"invalid design [{section}]: {exc}", line=rd.locate(section)) from None


def parse_config(text: str, command: str | None = None) -> RunConfig:
    """Parse and validate a run configuration."""
    if not text or not text.strip():
        raise ConfigError("configuration is empty")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), line=getattr(exc, "lineno", None)) from None
    rd = _Reader(parser, _Locator(text))

    kw: dict = {"command": command}
    protocols: dict[str, Sequence] = {}
    designs: dict[str, DesignSpec] = {}
    for section in parser.sections():
        kind, _, label = section.partition(" ")
        label = label.strip()
        if section == "run":
            _read_run(rd, kw)
        elif section == "range":
            kw["tissue_range"] = _read_range(rd)
        elif kind == "protocol" and label:
            protocols[label] = _read_protocol(rd, section)
        elif kind == "design" and label:
            designs[label] = _read_design(rd, section)
        else:
            raise ConfigError(f"unknown section [{section}]", line=rd.locate(section))
    if not protocols and not designs:
        raise MissingField("no [protocol ...] or [design ...] section")
    return RunConfig(protocols=protocols, designs=designs, **kw)


def load_config(path, command: str | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, command)
