"""Max-min optimized protocols for adult brain WM/GM.

Target range T1 in [1000, 2000] ms, T2 in [60, 110] ms, input SNR 100.
"""

from __future__ import annotations

from .sequences import CIR, DESPOT, FIR1, FIR2, LL, SEIR, SR, Sequence, linear_times

BRAIN_PROTOCOLS: dict[str, Sequence] = {
    "DESPOT": DESPOT(alpha_spgr=(8.6,), tr_spgr=6.8, alpha_ssfp=(13.9, 57.8), tr_ssfp=3.4),
    "SEIR": SEIR(tr_ir=2994.0, ti=1270.0, tr_se=2942.0, te=17.0, n_echo=4),
    "LL": LL(alpha=30.0, t=linear_times(206.0, 206.0, 15), tr=8900.0),
    "FIR1": FIR1(ti=linear_times(0.0, 378.0, 7), w=5647.0),
    "FIR2": FIR2(ti=linear_times(0.0, 303.0, 9), tr=6722.0),
    "CIR": CIR(ti=linear_times(0.0, 450.0, 5), w=10000.0),
    "SR": SR(ti=linear_times(0.0, 620.0, 12)),
}
