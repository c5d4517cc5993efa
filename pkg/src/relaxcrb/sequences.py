"""Relaxometry sequence families and their signal weighting vectors.

Every protocol maps tissue relaxation times onto a dimensionless weighting
vector ``h`` (signal = m0 * h) together with the analytic sensitivities
``dh/dT1`` and, for joint T1/T2 families, ``dh/dT2``.  All timings are in
milliseconds and flip angles in degrees.  The signal model is signed: no
magnitude operation is applied.

The model methods broadcast: ``t1`` and ``t2`` may be arrays of a common
shape ``S`` and the returned vectors have shape ``S + (N,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import ClassVar

import numpy as np

from .errors import DegenerateStep, NonFiniteModel, ProtocolError
from .tissue import TissueParams

FAMILIES = ("DESPOT", "SEIR", "LL", "FIR1", "FIR2", "CIR", "SR")


def _as_tuple(values) -> tuple[float, ...]:
    if np.isscalar(values):
        values = [values]
    return tuple(float(v) for v in values)


def _check_increasing(name: str, values: tuple[float, ...], allow_zero: bool) -> None:
    if not values:
        raise ProtocolError(f"{name} must not be empty")
    if not all(math.isfinite(v) for v in values):
        raise ProtocolError(f"{name} must be finite")
    lo = values[0]
    if lo < 0 or (lo == 0 and not allow_zero):
        raise ProtocolError(f"{name} must be {'>= 0' if allow_zero else '> 0'}")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ProtocolError(f"{name} must be strictly increasing")


def _check_positive(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v) or v <= 0:
            raise ProtocolError(f"{name} must be finite and > 0, got {v!r}")


def _check_angle(name: str, deg: float, upper: float, closed: bool) -> None:
    ok = 0 < deg <= upper if closed else 0 < deg < upper
    if not ok:
        bracket = "]" if closed else ")"
        raise ProtocolError(f"{name}={deg} outside (0, {upper:g}{bracket} degrees")


def _decay(tau, t1):
    """exp(-tau/T) and its derivative with respect to T."""
    e = np.exp(-tau / t1)
    return e, e * tau / t1**2


def _prep(t1, t2):
    t1 = np.asarray(t1, dtype=float)[..., None]
    t2 = np.asarray(t2, dtype=float)[..., None]
    return np.broadcast_arrays(t1, t2)


@dataclass(frozen=True)
class WeightingVector:
    """Weighting vector ``h`` and its sensitivity vectors (last axis = acquisitions)."""

    h: np.ndarray
    dh_dt1: np.ndarray
    dh_dt2: np.ndarray | None = None


class Sequence:
    """Base class of the sequence-family dataclasses."""

    family: ClassVar[str]
    joint: ClassVar[bool] = False

    @property
    def n_params(self) -> int:
        return 3 if self.joint else 2

    @property
    def n_acq(self) -> int:
        raise NotImplementedError

    @property
    def t_seq(self) -> float:
        raise NotImplementedError

    def model(self, t1, t2):
        """Return ``(h, dh_dt1, dh_dt2)``; ``dh_dt2`` is zeros for T1-only families."""
        raise NotImplementedError

    def weights(self, t1, t2) -> np.ndarray:
        return self.model(t1, t2)[0]

    def _check_count(self) -> None:
        if self.n_acq < self.n_params:
            raise ProtocolError(
                f"{self.family} needs at least {self.n_params} acquisitions, got {self.n_acq}"
            )

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def summary(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = "[" + " ".join(f"{x:g}" for x in v) + "]"
            elif isinstance(v, float):
                v = f"{v:g}"
            parts.append(f"{f.name}={v}")
        return f"{self.family}(" + ", ".join(parts) + ")"


def _ir_family_count(seq) -> None:
    _check_increasing("ti", seq.ti, allow_zero=True)
    seq._check_count()


@dataclass(frozen=True)
class CIR(Sequence):
    """Conventional inversion recovery: h = 1 - 2 exp(-TI/T1), full recovery during W."""

    ti: tuple[float, ...]
    w: float
    family: ClassVar[str] = "CIR"

    def __post_init__(self):
        object.__setattr__(self, "ti", _as_tuple(self.ti))
        _check_positive(w=self.w)
        _ir_family_count(self)

    @property
    def n_acq(self):
        return len(self.ti)

    @property
    def t_seq(self):
        return sum(self.ti) + self.n_acq * self.w

    def model(self, t1, t2):
        t1, _ = _prep(t1, t2)
        ti = np.asarray(self.ti)
        e, de = _decay(ti, t1)
        h = 1.0 - 2.0 * e
        return h, -2.0 * de, np.zeros_like(h)


@dataclass(frozen=True)
class SR(Sequence):
    """Saturation recovery: h = 1 - exp(-TI/T1)."""

    ti: tuple[float, ...]
    family: ClassVar[str] = "SR"

    def __post_init__(self):
        object.__setattr__(self, "ti", _as_tuple(self.ti))
        _ir_family_count(self)

    @property
    def n_acq(self):
        return len(self.ti)

    @property
    def t_seq(self):
        return sum(self.ti)

    def model(self, t1, t2):
        t1, _ = _prep(t1, t2)
        e, de = _decay(np.asarray(self.ti), t1)
        h = 1.0 - e
        return h, -de, np.zeros_like(h)


def _ir_signal(ti, wait, t1):
    """1 - (2 - exp(-W/T1)) exp(-TI/T1) and its T1 derivative."""
    e_ti, de_ti = _decay(ti, t1)
    e_tot, de_tot = _decay(ti + wait, t1)
    return 1.0 - 2.0 * e_ti + e_tot, -2.0 * de_ti + de_tot


@dataclass(frozen=True)
class FIR1(Sequence):
    """Fast inversion recovery with a fixed wait time W after each readout."""

    ti: tuple[float, ...]
    w: float
    family: ClassVar[str] = "FIR1"

    def __post_init__(self):
        object.__setattr__(self, "ti", _as_tuple(self.ti))
        _check_positive(w=self.w)
        _ir_family_count(self)

    @property
    def n_acq(self):
        return len(self.ti)

    @property
    def t_seq(self):
        return sum(self.ti) + self.n_acq * self.w

    def model(self, t1, t2):
        t1, _ = _prep(t1, t2)
        h, d1 = _ir_signal(np.asarray(self.ti), self.w, t1)
        return h, d1, np.zeros_like(h)


@dataclass(frozen=True)
class FIR2(Sequence):
    """Fast inversion recovery with a fixed repetition time (W = TR - TI)."""

    ti: tuple[float, ...]
    tr: float
    family: ClassVar[str] = "FIR2"

    def __post_init__(self):
        object.__setattr__(self, "ti", _as_tuple(self.ti))
        _check_positive(tr=self.tr)
        _ir_family_count(self)
        if max(self.ti) >= self.tr:
            raise ProtocolError("FIR2 requires max(ti) < tr")

    @property
    def n_acq(self):
        return len(self.ti)

    @property
    def t_seq(self):
        return self.n_acq * self.tr

    def model(self, t1, t2):
        t1, _ = _prep(t1, t2)
        ti = np.asarray(self.ti)
        h, d1 = _ir_signal(ti, self.tr - ti, t1)
        return h, d1, np.zeros_like(h)


@dataclass(frozen=True)
class LL(Sequence):
    """Look-Locker: one inversion followed by small-angle readouts at times ``t``.

    The longitudinal magnetization relaxes freely between readouts and is
    scaled by cos(alpha) at each one.  ``recovery="steady_state"`` solves for
    the pre-inversion magnetization left over from the previous repetition
    (the time between the last readout and the next inversion is TR - t[-1]);
    ``recovery="full"`` assumes complete recovery (M = M0 before inversion).
    """

    alpha: float
    t: tuple[float, ...]
    tr: float
    recovery: str = "steady_state"
    family: ClassVar[str] = "LL"

    def __post_init__(self):
        object.__setattr__(self, "t", _as_tuple(self.t))
        _check_angle("alpha", self.alpha, 90.0, closed=True)
        _check_positive(tr=self.tr)
        _check_increasing("t", self.t, allow_zero=False)
        if self.t[-1] >= self.tr:
            raise ProtocolError("LL requires max(t) < tr")
        if self.recovery not in ("steady_state", "full"):
            raise ProtocolError(f"unknown LL recovery model {self.recovery!r}")
        self._check_count()

    @property
    def n_acq(self):
        return len(self.t)

    @property
    def t_seq(self):
        return self.tr

    def model(self, t1, t2):
        t1, _ = _prep(t1, t2)
        a = math.radians(self.alpha)
        c, s = math.cos(a), math.sin(a)
        t = np.asarray(self.t)
        gaps = np.diff(t, prepend=0.0)
        # M_n = u_n + v_n * P with P the pre-inversion magnetization.
        us, vs, dus, dvs = [], [], [], []
        for n, gap in enumerate(gaps):
            e, de = _decay(gap, t1[..., 0])
            if n == 0:
                u, v, du, dv = 1.0 - e, -e, -de, -de
            else:
                up, vp, dup, dvp = us[-1], vs[-1], dus[-1], dvs[-1]
                u = 1.0 - e + c * e * up
                v = c * e * vp
                du = -de + c * (de * up + e * dup)
                dv = c * (de * vp + e * dvp)
            us.append(u)
            vs.append(v)
            dus.append(du)
            dvs.append(dv)
        u, v = np.stack(us, -1), np.stack(vs, -1)
        du, dv = np.stack(dus, -1), np.stack(dvs, -1)
        if self.recovery == "full":
            p, dp = np.ones_like(t1), np.zeros_like(t1)
        else:
            r, dr = _decay(self.tr - t[-1], t1)
            uN, vN, duN, dvN = u[..., -1:], v[..., -1:], du[..., -1:], dv[..., -1:]
            num = 1.0 - r + c * r * uN
            dnum = -dr + c * (dr * uN + r * duN)
            den = 1.0 - c * r * vN
            dden = -c * (dr * vN + r * dvN)
            p = num / den
            dp = (dnum * den - num * dden) / den**2
        m = u + v * p
        dm = du + dv * p + v * dp
        h = s * m
        return h, s * dm, np.zeros_like(h)


@dataclass(frozen=True)
class SEIR(Sequence):
    """Interleaved multi-echo inversion recovery and multi-echo spin echo.

    Each block acquires ``n_echo`` echoes spaced ``te``.  IR block amplitude
    follows the inversion-recovery form with wait time ``tr_ir``; the SE block
    amplitude is the saturation recovery over ``tr_se``.  Echo k carries the
    factor exp(-k*te/T2).

    ``tseq_convention``: ``"with_ti"`` counts TR_IR + TI + TR_SE,
    ``"blocks"`` counts TR_IR + TR_SE.
    """

    tr_ir: float
    ti: float
    tr_se: float
    te: float
    n_echo: int = 4
    tseq_convention: str = "with_ti"
    family: ClassVar[str] = "SEIR"
    joint: ClassVar[bool] = True

    def __post_init__(self):
        _check_positive(tr_ir=self.tr_ir, tr_se=self.tr_se, te=self.te)
        if not math.isfinite(self.ti) or self.ti < 0:
            raise ProtocolError("ti must be finite and >= 0")
        if int(self.n_echo) != self.n_echo or self.n_echo < 1:
            raise ProtocolError("n_echo must be a positive integer")
        object.__setattr__(self, "n_echo", int(self.n_echo))
        if self.n_echo * self.te >= min(self.tr_ir, self.tr_se):
            raise ProtocolError("echo train longer than a block repetition time")
        if self.tseq_convention not in ("with_ti", "blocks"):
            raise ProtocolError(f"unknown tseq_convention {self.tseq_convention!r}")
        self._check_count()

    @property
    def n_acq(self):
        return 2 * self.n_echo

    @property
    def t_seq(self):
        base = self.tr_ir + self.tr_se
        return base + self.ti if self.tseq_convention == "with_ti" else base

    def model(self, t1, t2):
        t1, t2 = _prep(t1, t2)
        k = np.arange(1, self.n_echo + 1, dtype=float)
        ir, dir_ = _ir_signal(self.ti, self.tr_ir, t1)
        e_se, de_se = _decay(self.tr_se, t1)
        se, dse = 1.0 - e_se, -de_se
        echo, decho = _decay(k * self.te, t2)
        h = np.concatenate([ir * echo, se * echo], axis=-1)
        d1 = np.concatenate([dir_ * echo, dse * echo], axis=-1)
        d2 = np.concatenate([ir * decho, se * decho], axis=-1)
        return h, d1, d2


@dataclass(frozen=True)
class DESPOT(Sequence):
    """Spoiled gradient echo (SPGR) plus balanced SSFP steady-state acquisitions."""

    alpha_spgr: tuple[float, ...]
    tr_spgr: float
    alpha_ssfp: tuple[float, ...]
    tr_ssfp: float
    family: ClassVar[str] = "DESPOT"
    joint: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "alpha_spgr", _as_tuple(self.alpha_spgr))
        object.__setattr__(self, "alpha_ssfp", _as_tuple(self.alpha_ssfp))
        _check_positive(tr_spgr=self.tr_spgr, tr_ssfp=self.tr_ssfp)
        for a in self.alpha_spgr:
            _check_angle("alpha_spgr", a, 90.0, closed=True)
        for a in self.alpha_ssfp:
            _check_angle("alpha_ssfp", a, 180.0, closed=False)
        self._check_count()

    @property
    def n_acq(self):
        return len(self.alpha_spgr) + len(self.alpha_ssfp)

    @property
    def t_seq(self):
        return self.tr_spgr * len(self.alpha_spgr) + self.tr_ssfp * len(self.alpha_ssfp)

    def model(self, t1, t2):
        t1, t2 = _prep(t1, t2)
        a = np.radians(self.alpha_spgr)
        c, s = np.cos(a), np.sin(a)
        e1, de1 = _decay(self.tr_spgr, t1)
        den = 1.0 - e1 * c
        h_spgr = s * (1.0 - e1) / den
        d1_spgr = s * (c - 1.0) / den**2 * de1

        b = np.radians(self.alpha_ssfp)
        c, s = np.cos(b), np.sin(b)
        e1, de1 = _decay(self.tr_ssfp, t1)
        e2, de2 = _decay(self.tr_ssfp, t2)
        den = 1.0 - e1 * e2 - (e1 - e2) * c
        h_ssfp = s * (1.0 - e1) / den
        dh_de1 = s * (-den + (1.0 - e1) * (e2 + c)) / den**2
        dh_de2 = s * (1.0 - e1) * (e1 - c) / den**2

        h = np.concatenate([h_spgr, h_ssfp], axis=-1)
        d1 = np.concatenate([d1_spgr, dh_de1 * de1], axis=-1)
        d2 = np.concatenate([np.zeros_like(h_spgr), dh_de2 * de2], axis=-1)
        return h, d1, d2


SEQUENCE_TYPES: dict[str, type[Sequence]] = {
    cls.family: cls for cls in (CIR, SR, FIR1, FIR2, LL, SEIR, DESPOT)
}


def protocol_from_dict(data: dict) -> Sequence:
    data = dict(data)
    family = str(data.pop("family")).upper()
    try:
        cls = SEQUENCE_TYPES[family]
    except KeyError:
        raise ProtocolError(f"unknown sequence family {family!r}") from None
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ProtocolError(f"unknown {family} fields: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ProtocolError(str(exc)) from None


def weighting_vector(protocol: Sequence, tissue: TissueParams) -> WeightingVector:
    """Weighting vector and analytic sensitivities at one tissue point."""
    with np.errstate(all="ignore"):
        h, d1, d2 = protocol.model(tissue.t1, tissue.t2)
    for arr in (h, d1, d2):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteModel(
                f"{protocol.family} model is not finite at t1={tissue.t1}, t2={tissue.t2}"
            )
    return WeightingVector(h=h, dh_dt1=d1, dh_dt2=d2 if protocol.joint else None)


def sensitivity_numeric(
    protocol: Sequence, tissue: TissueParams, which: str = "T1", step: float = 1e-5
) -> np.ndarray:
    """Central finite-difference sensitivity dh/dT (1/ms)."""
    if not 1e-7 <= step <= 1e-2:
        raise DegenerateStep(f"relative step {step} outside [1e-7, 1e-2]")
    which = which.upper()
    if which not in ("T1", "T2"):
        raise ValueError("which must be 'T1' or 'T2'")
    t = tissue.t1 if which == "T1" else tissue.t2
    dt = step * t
    if dt < 1e-9:
        raise DegenerateStep(f"absolute step {dt} ms below model resolution")
    if which == "T1":
        hp = protocol.weights(t + dt, tissue.t2)
        hm = protocol.weights(t - dt, tissue.t2)
    else:
        hp = protocol.weights(tissue.t1, t + dt)
        hm = protocol.weights(tissue.t1, t - dt)
    return (hp - hm) / (2.0 * dt)


def sequence_time(protocol: Sequence) -> float:
    """Scan time consumed by one repetition of the protocol (ms)."""
    return float(protocol.t_seq)


def linear_times(start: float, step: float, n: int) -> tuple[float, ...]:
    """``[start : step : start + (n-1)*step]`` as a tuple."""
    return tuple(float(start + i * step) for i in range(int(n)))
