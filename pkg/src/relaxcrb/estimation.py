"""Fisher information, Cramér-Rao bounds and TNR efficiency.

Two independent routes to the T1/T2 bound are provided: the matrix route
(inverse of J^T J / sigma^2) and the geometric route, which factors the bound
into input SNR, sensitivity ``||dh/dT||`` and an orthogonality factor built
from the angles between ``h``, ``dh/dT1`` and ``dh/dT2``.

Efficiencies are reported per square-root second; every other timing is in
milliseconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CollinearVectors, SingularInformation
from .sequences import Sequence, WeightingVector, weighting_vector
from .tissue import TissueParams, TissueRange

COND_LIMIT = 1e12
COLLINEAR_SIN = 1e-12
MS_PER_S = 1000.0


@dataclass(frozen=True)
class NoiseModel:
    sigma: float
    snr: float

    @classmethod
    def from_snr(cls, m0: float, snr: float) -> "NoiseModel":
        if snr <= 0:
            raise ValueError("snr must be > 0")
        return cls(sigma=m0 / snr, snr=snr)

    @classmethod
    def from_sigma(cls, m0: float, sigma: float) -> "NoiseModel":
        if sigma <= 0:
            raise ValueError("sigma must be > 0")
        return cls(sigma=sigma, snr=m0 / sigma)


@dataclass(frozen=True)
class FisherInfo:
    """Symmetric information matrix, parameter order [M0, T1(, T2)]."""

    matrix: np.ndarray

    @property
    def n_params(self) -> int:
        return self.matrix.shape[-1]


@dataclass(frozen=True)
class CrbReport:
    crb_t1: float
    sens_t1: float
    orth_t1: float
    phi1: float
    crb_m0: float | None = None
    crb_t2: float | None = None
    sens_t2: float | None = None
    orth_t2: float | None = None
    phi2: float | None = None
    phi3: float | None = None
    gamma_t1: float | None = None
    gamma_t2: float | None = None
    t_seq: float | None = None


def jacobian(protocol: Sequence, tissue: TissueParams) -> np.ndarray:
    """N x p Jacobian of s = m0*h with respect to [M0, T1(, T2)]."""
    w = weighting_vector(protocol, tissue)
    cols = [w.h, tissue.m0 * w.dh_dt1]
    if w.dh_dt2 is not None:
        cols.append(tissue.m0 * w.dh_dt2)
    return np.stack(cols, axis=-1)


def fisher_information(J: np.ndarray, sigma: float) -> FisherInfo:
    """I = J^T J / sigma^2 for white Gaussian noise."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    J = np.asarray(J, dtype=float)
    return FisherInfo(np.swapaxes(J, -1, -2) @ J / sigma**2)


def crb_matrix(info: FisherInfo) -> tuple[float, ...]:
    """Diagonal of the inverse information matrix, in [M0, T1(, T2)] order."""
    m = np.asarray(info.matrix, dtype=float)
    if not np.all(np.isfinite(m)):
        raise SingularInformation("information matrix is not finite")
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularInformation(f"information matrix condition number {cond:.3g}")
    return tuple(float(v) for v in np.diag(np.linalg.inv(m)))


def _cos_angle(x, y):
    c = np.sum(x * y, axis=-1) / (np.linalg.norm(x, axis=-1) * np.linalg.norm(y, axis=-1))
    return np.clip(c, -1.0, 1.0)


def geometric_factors(h, d1, d2=None):
    """Sensitivities, orthogonality factors and angles (arrays, no error checks).

    Returns a dict with ``sens_t1``, ``orth_t1``, ``phi1`` and, for joint
    families, ``sens_t2``, ``orth_t2``, ``phi2``, ``phi3``.  Degenerate
    geometry yields ``orth = 0``.
    """
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = _cos_angle(h, d1)
        out = {
            "sens_t1": np.linalg.norm(d1, axis=-1),
            "phi1": np.arccos(c1),
        }
        if d2 is None:
            out["orth_t1"] = np.sqrt(1.0 - c1**2)
            return out
        c2 = _cos_angle(h, d2)
        c3 = _cos_angle(d1, d2)
        gram = np.clip(1.0 + 2.0 * c1 * c2 * c3 - (c1**2 + c2**2 + c3**2), 0.0, None)
        s1 = np.sqrt(1.0 - c1**2)
        s2 = np.sqrt(1.0 - c2**2)
        out.update(
            sens_t2=np.linalg.norm(d2, axis=-1),
            phi2=np.arccos(c2),
            phi3=np.arccos(c3),
            orth_t1=np.where(s2 > COLLINEAR_SIN, np.sqrt(gram) / s2, 0.0),
            orth_t2=np.where(s1 > COLLINEAR_SIN, np.sqrt(gram) / s1, 0.0),
        )
        return out


def crb_geometric(w: WeightingVector, snr: float) -> CrbReport:
    """CRB(T) = (snr * Sens * Orth)^-2 for T1 (and T2)."""
    h = np.asarray(w.h, dtype=float)
    if np.linalg.norm(h) == 0:
        raise CollinearVectors("weighting vector is zero")
    if np.linalg.norm(w.dh_dt1) == 0 or (
        w.dh_dt2 is not None and np.linalg.norm(w.dh_dt2) == 0
    ):
        raise CollinearVectors("sensitivity vector is zero")
    g = geometric_factors(h, w.dh_dt1, w.dh_dt2)
    sines = [np.sin(g["phi1"])]
    if w.dh_dt2 is not None:
        sines += [np.sin(g["phi2"]), np.sin(g["phi3"])]
    if min(sines) < COLLINEAR_SIN:
        raise CollinearVectors("weighting and sensitivity vectors are collinear")
    if w.dh_dt2 is not None and (g["orth_t1"] <= 0 or g["orth_t2"] <= 0):
        raise CollinearVectors("h, dh/dT1 and dh/dT2 are linearly dependent")

    def bound(sens, orth):
        return float((snr * sens * orth) ** -2)

    kw = dict(
        crb_t1=bound(g["sens_t1"], g["orth_t1"]),
        sens_t1=float(g["sens_t1"]),
        orth_t1=float(g["orth_t1"]),
        phi1=float(g["phi1"]),
    )
    if w.dh_dt2 is not None:
        kw.update(
            crb_t2=bound(g["sens_t2"], g["orth_t2"]),
            sens_t2=float(g["sens_t2"]),
            orth_t2=float(g["orth_t2"]),
            phi2=float(g["phi2"]),
            phi3=float(g["phi3"]),
        )
    return CrbReport(**kw)


def equivalent_snr(snr: float, t_scan: float, t_seq: float) -> float:
    """Input SNR after averaging t_scan/t_seq repetitions."""
    if t_seq <= 0 or t_scan <= 0:
        raise ValueError("need t_scan > 0 and t_seq > 0")
    return float(snr * np.sqrt(t_scan / t_seq))


def tnr_efficiency(t, crb_t, t_seq):
    """TNR per square-root second: t / (sqrt(crb) * sqrt(t_seq))."""
    crb_t = np.asarray(crb_t, dtype=float)
    if np.any(crb_t <= 0):
        raise ValueError("crb must be > 0")
    return t / (np.sqrt(crb_t) * np.sqrt(t_seq / MS_PER_S))


def pcrb(crb_t, t):
    """Square-root bound as a percentage of the true value."""
    return 100.0 * np.sqrt(crb_t) / t


def evaluate_point(protocol: Sequence, tissue: TissueParams, snr: float) -> CrbReport:
    """Full bound report at one tissue point (geometric route plus crb_m0)."""
    w = weighting_vector(protocol, tissue)
    rep = crb_geometric(w, snr)
    noise = NoiseModel.from_snr(tissue.m0, snr)
    crb_m0 = crb_matrix(fisher_information(jacobian(protocol, tissue), noise.sigma))[0]
    t_seq = protocol.t_seq
    extra = dict(
        crb_m0=crb_m0,
        t_seq=t_seq,
        gamma_t1=float(tnr_efficiency(tissue.t1, rep.crb_t1, t_seq)),
    )
    if rep.crb_t2 is not None:
        extra["gamma_t2"] = float(tnr_efficiency(tissue.t2, rep.crb_t2, t_seq))
    return CrbReport(**{**rep.__dict__, **extra})


@dataclass(frozen=True)
class EfficiencyMap:
    """Per-grid-point bound quantities for one protocol (flattened grid arrays)."""

    t1: np.ndarray
    t2: np.ndarray
    snr: float
    t_seq: float
    sens_t1: np.ndarray
    orth_t1: np.ndarray
    crb_t1: np.ndarray
    gamma_t1: np.ndarray
    pcrb_t1: np.ndarray
    sens_t2: np.ndarray | None = None
    orth_t2: np.ndarray | None = None
    crb_t2: np.ndarray | None = None
    gamma_t2: np.ndarray | None = None
    pcrb_t2: np.ndarray | None = None

    @property
    def joint(self) -> bool:
        return self.crb_t2 is not None

    @property
    def degenerate(self) -> np.ndarray:
        bad = ~np.isfinite(self.crb_t1)
        if self.joint:
            bad |= ~np.isfinite(self.crb_t2)
        return bad

    def averages(self) -> dict[str, float]:
        keys = ["sens_t1", "orth_t1", "gamma_t1", "pcrb_t1"]
        if self.joint:
            keys += ["sens_t2", "orth_t2", "gamma_t2", "pcrb_t2"]
        return {k: float(np.mean(getattr(self, k))) for k in keys}


def efficiency_map(
    protocol: Sequence,
    t1,
    t2,
    snr: float,
) -> EfficiencyMap:
    """Vectorized geometric-route bounds over arrays of tissue points.

    Points where the bound does not exist get ``crb = inf`` and ``gamma = 0``.
    """
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    with np.errstate(all="ignore"):
        h, d1, d2 = protocol.model(t1, t2)
        finite = np.all(np.isfinite(h) & np.isfinite(d1) & np.isfinite(d2), axis=-1)
        g = geometric_factors(h, d1, d2 if protocol.joint else None)
        t_seq = protocol.t_seq

        def bound(sens, orth):
            b = (snr * sens * orth) ** -2.0
            return np.where(finite & (sens * orth > 0) & np.isfinite(b), b, np.inf)

        crb1 = bound(g["sens_t1"], g["orth_t1"])
        out = dict(
            t1=t1,
            t2=t2,
            snr=snr,
            t_seq=t_seq,
            sens_t1=g["sens_t1"],
            orth_t1=g["orth_t1"],
            crb_t1=crb1,
            gamma_t1=t1 / (np.sqrt(crb1) * np.sqrt(t_seq / MS_PER_S)),
            pcrb_t1=pcrb(crb1, t1),
        )
        if protocol.joint:
            crb2 = bound(g["sens_t2"], g["orth_t2"])
            out.update(
                sens_t2=g["sens_t2"],
                orth_t2=g["orth_t2"],
                crb_t2=crb2,
                gamma_t2=t2 / (np.sqrt(crb2) * np.sqrt(t_seq / MS_PER_S)),
                pcrb_t2=pcrb(crb2, t2),
            )
    return EfficiencyMap(**out)


def range_map(protocol: Sequence, tissue_range: TissueRange, snr: float) -> EfficiencyMap:
    t1, t2 = tissue_range.grid(protocol.joint)
    return efficiency_map(protocol, t1, t2, snr)
