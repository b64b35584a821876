"""Diagonal scaling matrices and the bound schedule that controls them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BoundSchedule:
    """``gamma_k = sqrt(1 + b / (k+1)**p)``; every diagonal entry of D_k is
    kept in ``[1/gamma_k, gamma_k]``."""

    b: float = 1e10
    p: float = 2.1

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.p > 2:
            raise ValueError("p must exceed 2 for the perturbations to decay fast enough")

    def zeta(self, k):
        return self.b / (k + 1.0) ** self.p

    def gamma(self, k):
        return math.sqrt(1.0 + self.zeta(k))

    @property
    def eta(self):
        """Global lower bound on every diagonal entry, 1 / sup_k gamma_k."""
        return 1.0 / self.gamma(0)

    def perturbation(self, k):
        """``eta_k = gamma_{k+1} gamma_k - 1``."""
        return self.gamma(k + 1) * self.gamma(k) - 1.0

    def first_stable_index(self, rtol=1e-9):
        """Smallest k with ``tau_k / tau_{k-1} - 1 = zeta_k < rtol``; the
        increments stay below rtol from there on since zeta decreases."""
        k = max(math.ceil((self.b / rtol) ** (1.0 / self.p)) - 1, 0)
        while self.zeta(k) >= rtol:
            k += 1
        while k > 0 and self.zeta(k - 1) < rtol:
            k -= 1
        return k


@dataclass(frozen=True)
class DiagonalMetric:
    """Positive diagonal D with certified bounds ``1/gamma_k <= d_i <= gamma_k``."""

    d: np.ndarray
    gamma_k: float = 1.0
    eta: float = 1.0
    k: int = 0

    def norm_sq(self, v):
        return float(np.sum(self.d * v * v))


def identity_metric(n, k=0):
    return DiagonalMetric(np.ones(n), 1.0, 1.0, k)


def build_metric(V, w, schedule, k):
    """Split-gradient scaling ``d = 1 / clamp(w / V, 1/gamma_k, gamma_k)``.

    ``w_i / V_i`` is taken as +inf when only V_i vanishes and as 1 when both
    do.
    """
    V = np.asarray(V, dtype=float)
    w = np.asarray(w, dtype=float)
    if V.shape != w.shape:
        raise ValueError("w and V must have the same shape")
    if np.any(V < 0) or np.any(w < 0):
        raise ValueError("w and V must be nonnegative")
    g = schedule.gamma(k)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = w / V
    ratio = np.where(V > 0, ratio, np.where(w > 0, np.inf, 1.0))
    ratio = np.clip(ratio, 1.0 / g, g)
    return DiagonalMetric(1.0 / ratio, g, schedule.eta, k)


@dataclass
class SequenceReport:
    ok: bool
    first_violation: dict | None
    records: list = field(default_factory=list)
    stable_from: int | None = None
    stable_from_schedule: int | None = None

    def to_jsonl_records(self):
        return list(self.records)


def verify_sequence_conditions(metrics, schedule, tau_rtol=1e-9):
    """Check ``d_{k+1} <= (1+eta_k) d_k`` and ``d_k <= (1+eta_k) d_{k+1}``
    entrywise with ``eta_k = gamma_{k+1} gamma_k - 1`` for consecutive metrics,
    plus ``1/gamma_k <= d <= gamma_k``; all gammas come from ``schedule`` at
    each metric's index ``k``.

    ``tau_k = prod_{j<=k} gamma_j**2`` is tracked in log form (it overflows
    double precision within a few dozen steps for large b); its relative
    increment is exactly ``gamma_k**2 - 1``.  ``stable_from`` is the first
    listed index after which that increment stays below ``tau_rtol`` (None if
    it never does within the list), and ``stable_from_schedule`` is the same
    index computed from the schedule without an iteration cap.
    """
    records = []
    first = None
    log_tau = 0.0
    incs = []
    for j, cur in enumerate(metrics):
        g = schedule.gamma(cur.k)
        inc = g * g - 1.0
        log_tau += math.log1p(inc)
        incs.append(inc)
        rec = {"k": int(cur.k), "gamma_k": g, "log_tau_k": log_tau,
               "tau_rel_change": inc}
        if np.any(cur.d < 1.0 / g * (1 - 1e-15)) or np.any(cur.d > g * (1 + 1e-15)):
            rec["ok"] = False
            if first is None:
                first = {"k": int(cur.k), "reason": "entry outside [1/gamma_k, gamma_k]"}
        if j + 1 < len(metrics):
            nxt = metrics[j + 1]
            bound = g * schedule.gamma(nxt.k)
            up = float(np.max(nxt.d / cur.d))
            down = float(np.max(cur.d / nxt.d))
            ratio = max(up, down)
            rec["max_ratio"] = ratio
            rec["bound"] = bound
            good = ratio <= bound * (1 + 1e-12)
            rec["ok"] = rec.get("ok", True) and good
            if not good and first is None:
                first = {"k": int(cur.k), "reason": "consecutive ratio exceeds 1 + eta_k",
                         "max_ratio": ratio, "bound": bound}
        else:
            rec.setdefault("ok", True)
        records.append(rec)
    stable = None
    for j in range(len(incs) - 1, -1, -1):
        if incs[j] >= tau_rtol:
            stable = int(metrics[j + 1].k) if j + 1 < len(incs) else None
            break
    else:
        stable = int(metrics[0].k) if incs else None
    return SequenceReport(first is None, first, records, stable,
                          schedule.first_stable_index(tau_rtol))
