"""Iteration engines for ``min f(x) + g(x)``.

* ``sfbem``: scaled inertial forward-backward method with backtracking.
* ``fista``: the same iteration with the identity metric, written out on its own.
* ``sgp`` / ``gp``: scaled / plain gradient projection with Barzilai-Borwein
  steplengths and an Armijo line search along the projected direction.
* ``bb_fb``: nonmonotone Barzilai-Borwein forward-backward (a SPIRAL-like
  baseline).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .metric import BoundSchedule, DiagonalMetric, build_metric, identity_metric
from .prox import NonsmoothTerm, WholeSpace

ALGORITHMS = ("sfbem", "fista", "gp", "sgp", "bb_fb")


class NumericalFailure(RuntimeError):
    """Backtracking or line search did not terminate, or F became non-finite."""


@dataclass(frozen=True)
class InertiaSchedule:
    """``theta_0 = 1, theta_k = a/(k+a)``; ``beta_0 = 0, beta_k = (k-1)/(k+a)``."""

    a: float = 2.1

    def __post_init__(self):
        if not self.a >= 2:
            raise ValueError("inertia exponent a must be >= 2")

    def theta(self, k):
        return 1.0 if k == 0 else self.a / (k + self.a)

    def beta(self, k):
        return 0.0 if k == 0 else (k - 1.0) / (k + self.a)


@dataclass
class CompositeProblem:
    """``F = f + g`` with f smooth on the closed convex set Y ⊇ dom g."""

    f: object
    g: NonsmoothTerm
    Y: object = field(default_factory=WholeSpace)
    lipschitz: float | None = None

    def objective(self, x):
        return self.f.value(x) + self.g.value(x)


class SplitGradientScaling:
    """Metric policy ``D_k = diag(clamp(w / V(w), 1/gamma_k, gamma_k))^{-1}``.

    Negative entries of w (possible when Y is the whole space) are replaced
    by zero before the ratio is formed.
    """

    def __init__(self, f, schedule):
        self.f = f
        self.schedule = schedule

    def __call__(self, w, k):
        w = np.maximum(w, 0.0)
        _, V = self.f.split(w)
        return build_metric(V, w, self.schedule, k)


class IdentityScaling:
    def __call__(self, w, k):
        return identity_metric(np.size(w), k)


@dataclass(frozen=True)
class StopRule:
    """``kind`` is one of ``iter_budget``, ``iterate_rel_change``, ``objective_gap``."""

    kind: str = "iter_budget"
    tol: float = 0.0
    f_star: float | None = None

    def __post_init__(self):
        if self.kind not in ("iter_budget", "iterate_rel_change", "objective_gap"):
            raise ValueError(f"unknown stop rule {self.kind!r}")
        if self.kind == "objective_gap" and self.f_star is None:
            raise ValueError("objective_gap needs f_star")


@dataclass(frozen=True)
class SolverConfig:
    algorithm: str = "sfbem"
    alpha0: float = 1.0
    backtrack_delta: float = 0.5
    a: float = 2.1
    schedule: BoundSchedule | None = None
    max_iter: int = 1000
    stop_rule: StopRule = StopRule()
    keep_iterates: bool = False
    keep_metrics: bool = False
    # relative round-off allowance in the Step-4 test
    bt_rtol: float = 1e-13
    max_backtracks: int = 100
    # line-search / BB constants for the baselines
    armijo: float = 1e-4
    max_linesearch: int = 50
    bb_threshold: float = 0.5
    alpha_min: float = 1e-10
    alpha_max: float = 1e10
    nonmonotone_memory: int = 10
    use_bb: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not 0 < self.backtrack_delta < 1:
            raise ValueError("backtrack_delta must lie in (0, 1)")
        if self.max_iter < 0:
            raise ValueError("max_iter must be >= 0")

    @property
    def inertia(self):
        return InertiaSchedule(self.a)


@dataclass
class IterationRecord:
    k: int
    F: float
    alpha: float
    backtracks: int
    gamma: float
    rel_change: float
    time_s: float
    # Step-4 quantities (sfbem/fista): f(x+), the quadratic model, round-off allowance
    f_plus: float = math.nan
    model: float = math.nan
    bt_tol: float = 0.0


@dataclass
class SolverRun:
    x: np.ndarray
    history: list
    config: SolverConfig
    F0: float = math.nan
    iterates: list | None = None
    metrics: list | None = None
    status: str = "max_iter"

    @property
    def objective(self):
        return np.array([r.F for r in self.history])

    @property
    def alphas(self):
        return np.array([r.alpha for r in self.history])


@dataclass
class State:
    x: np.ndarray
    x_prev: np.ndarray
    alpha: float
    k: int = 0
    # cached quantities at x (gradient-projection and BB methods)
    fx: float = math.nan
    gx: np.ndarray | None = None
    gval: float = 0.0
    metric: DiagonalMetric | None = None
    window: list = field(default_factory=list)


def _rel_change(new, old):
    den = float(np.linalg.norm(old))
    num = float(np.linalg.norm(new - old))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def _backtrack(problem, y, fy, gy, d, alpha_prev, cfg):
    """Step 3-4 loop: first ``alpha = delta**i * alpha_prev`` passing the test."""
    g = problem.g
    for i in range(cfg.max_backtracks + 1):
        alpha = alpha_prev * cfg.backtrack_delta ** i
        xp = g.prox(y - alpha * gy / d, alpha, d)
        fp = problem.f.value(xp)
        step = xp - y
        model = fy + float(gy @ step) + float(step @ (d * step)) / (2.0 * alpha)
        tol = cfg.bt_rtol * (abs(fy) + abs(fp))
        if fp <= model + tol:
            return xp, fp, alpha, i, model, tol
    raise NumericalFailure(
        f"backtracking exceeded {cfg.max_backtracks} reductions (alpha={alpha:.3e})")


def sfbem_step(state, problem, policy, cfg):
    """One extrapolation + scaled forward-backward step; returns (state, record)."""
    k = state.k
    beta = cfg.inertia.beta(k)
    y = problem.Y.project(state.x + beta * (state.x - state.x_prev))
    D = policy(y, k)
    fy, gy = problem.f.value_and_gradient(y)
    xp, fp, alpha, i, model, tol = _backtrack(problem, y, fy, gy, D.d, state.alpha, cfg)
    F = fp + problem.g.value(xp)
    rec = IterationRecord(k + 1, F, alpha, i, D.gamma_k, _rel_change(xp, state.x), 0.0,
                          fp, model, tol)
    return State(xp, state.x, alpha, k + 1, metric=D), rec


def fista_step(state, problem, cfg):
    """FISTA with monotone backtracking and a projection of the extrapolated point."""
    k = state.k
    beta = cfg.inertia.beta(k)
    y = problem.Y.project(state.x + beta * (state.x - state.x_prev))
    fy, gy = problem.f.value_and_gradient(y)
    g = problem.g
    one = np.ones_like(y)
    for i in range(cfg.max_backtracks + 1):
        alpha = state.alpha * cfg.backtrack_delta ** i
        xp = g.prox(y - alpha * gy, alpha, one)
        fp = problem.f.value(xp)
        step = xp - y
        model = fy + float(gy @ step) + float(step @ step) / (2.0 * alpha)
        tol = cfg.bt_rtol * (abs(fy) + abs(fp))
        if fp <= model + tol:
            break
    else:
        raise NumericalFailure(f"backtracking exceeded {cfg.max_backtracks} reductions")
    F = fp + g.value(xp)
    rec = IterationRecord(k + 1, F, alpha, i, 1.0, _rel_change(xp, state.x), 0.0,
                          fp, model, tol)
    return State(xp, state.x, alpha, k + 1), rec


def _bb_steps(s, t, d):
    """D-scaled Barzilai-Borwein steplengths (BB1, BB2); inf when undefined."""
    sDt = float(np.sum(s * d * t))
    tDinv_t = float(np.sum(s * t / d))
    bb1 = float(np.sum((d * s) ** 2)) / sDt if sDt > 0 else math.inf
    bb2 = tDinv_t / float(np.sum((t / d) ** 2)) if tDinv_t > 0 else math.inf
    return bb1, bb2


def _select_bb(bb1, bb2, cfg):
    if math.isfinite(bb1) and math.isfinite(bb2) and bb2 / bb1 < cfg.bb_threshold:
        alpha = bb2
    else:
        alpha = bb1
    return min(max(alpha, cfg.alpha_min), cfg.alpha_max)


def sgp_step(state, problem, policy, cfg):
    """Scaled gradient projection step with Armijo line search on F."""
    f, g = problem.f, problem.g
    x, D = state.x, state.metric
    z = g.prox(x - state.alpha * state.gx / D.d, state.alpha, D.d)
    direction = z - x
    decrease = float(state.gx @ direction) + g.value(z) - state.gval
    F_old = state.fx + state.gval
    # same round-off allowance as the Step-4 test, so stalls at the
    # floating-point floor do not count as line-search failures
    slack = cfg.bt_rtol * abs(F_old)
    lam = 1.0
    for n_ls in range(cfg.max_linesearch + 1):
        xt = x + lam * direction
        ft = f.value(xt)
        gt_val = g.value(xt)
        if ft + gt_val <= F_old + cfg.armijo * lam * decrease + slack:
            break
        lam *= 0.5
    else:
        raise NumericalFailure(f"line search exceeded {cfg.max_linesearch} halvings")
    grad_t = f.gradient(xt)
    D_next = policy(xt, state.k + 1)
    s, t = xt - x, grad_t - state.gx
    if cfg.use_bb and np.any(s != 0):
        alpha_next = _select_bb(*_bb_steps(s, t, D_next.d), cfg)
    else:
        alpha_next = state.alpha
    rec = IterationRecord(state.k + 1, ft + gt_val, state.alpha, n_ls, D.gamma_k,
                          _rel_change(xt, x), 0.0)
    new = State(xt, x, alpha_next, state.k + 1, ft, grad_t, gt_val, D_next)
    return new, rec


def bb_fb_step(state, problem, cfg):
    """Forward-backward step with BB steplength and nonmonotone acceptance
    against the maximum of the last ``nonmonotone_memory`` objective values."""
    f, g = problem.f, problem.g
    x = state.x
    one = np.ones_like(x)
    ref = max(state.window)
    slack = cfg.bt_rtol * abs(ref)
    alpha = state.alpha
    for n_bt in range(cfg.max_linesearch + 1):
        xp = g.prox(x - alpha * state.gx, alpha, one)
        fp = f.value(xp)
        gp_val = g.value(xp)
        step = xp - x
        if fp + gp_val <= ref - cfg.armijo / (2.0 * alpha) * float(step @ step) + slack:
            break
        alpha *= 0.5
    else:
        raise NumericalFailure(f"nonmonotone search exceeded {cfg.max_linesearch} halvings")
    grad_p = f.gradient(xp)
    s, t = xp - x, grad_p - state.gx
    if cfg.use_bb:
        st = float(s @ t)
        alpha_next = float(s @ s) / st if st > 0 else cfg.alpha_max
        alpha_next = min(max(alpha_next, cfg.alpha_min), cfg.alpha_max)
    else:
        alpha_next = cfg.alpha0
    window = (state.window + [fp + gp_val])[-cfg.nonmonotone_memory:]
    rec = IterationRecord(state.k + 1, fp + gp_val, alpha, n_bt, 1.0,
                          _rel_change(xp, x), 0.0)
    return State(xp, x, alpha_next, state.k + 1, fp, grad_p, gp_val, window=window), rec


def _should_stop(rule, rec):
    if rule.kind == "iterate_rel_change":
        return rec.rel_change < rule.tol
    if rule.kind == "objective_gap":
        return (rec.F - rule.f_star) / abs(rule.f_star) < rule.tol
    return False


def run(config, problem, x0, policy=None, observer=None):
    """Iterate ``config.algorithm`` from ``x0`` until the stop rule or budget.

    ``policy`` maps ``(w, k)`` to a :class:`DiagonalMetric`; by default
    ``sfbem`` and ``sgp`` use split-gradient scaling when ``config.schedule``
    is set and the identity otherwise.  ``observer(k, x)`` is called with
    every new iterate.
    """
    cfg = config
    x0 = np.array(x0, dtype=float).reshape(-1)
    if hasattr(problem.Y, "contains") and not problem.Y.contains(x0):
        raise ValueError("starting point must lie in Y")
    algo = cfg.algorithm
    if algo in ("fista", "gp", "bb_fb"):
        policy = IdentityScaling()
    elif policy is None:
        policy = (SplitGradientScaling(problem.f, cfg.schedule)
                  if cfg.schedule is not None else IdentityScaling())

    state = State(x0.copy(), x0.copy(), cfg.alpha0)
    F0 = math.nan
    if algo in ("gp", "sgp", "bb_fb"):
        if not problem.g.contains(x0):
            raise ValueError(f"{algo} needs a starting point in dom g")
        fx, gx = problem.f.value_and_gradient(x0)
        state.fx, state.gx, state.gval = fx, gx, problem.g.value(x0)
        state.metric = policy(x0, 0)
        state.window = [fx + state.gval]
        F0 = fx + state.gval
    else:
        try:
            F0 = problem.objective(x0)
        except ValueError:
            pass

    out = SolverRun(x0.copy(), [], cfg, F0,
                    [] if cfg.keep_iterates else None,
                    [] if cfg.keep_metrics else None)
    t0 = time.perf_counter()
    for _ in range(cfg.max_iter):
        if algo == "sfbem":
            state, rec = sfbem_step(state, problem, policy, cfg)
            metric = state.metric
        elif algo == "fista":
            state, rec = fista_step(state, problem, cfg)
            metric = None
        elif algo in ("sgp", "gp"):
            metric = state.metric
            state, rec = sgp_step(state, problem, policy, cfg)
        else:
            state, rec = bb_fb_step(state, problem, cfg)
            metric = None
        rec.time_s = time.perf_counter() - t0
        if not math.isfinite(rec.F):
            out.x = state.x_prev
            out.status = "non_finite"
            raise NumericalFailure(f"objective became {rec.F} at iteration {rec.k}")
        out.history.append(rec)
        if out.iterates is not None:
            out.iterates.append(state.x.copy())
        if observer is not None:
            observer(rec.k, state.x)
        if out.metrics is not None and metric is not None:
            out.metrics.append(metric)
        if _should_stop(cfg.stop_rule, rec):
            out.status = "converged"
            break
    out.x = state.x
    return out


def with_algorithm(cfg, algorithm, **changes):
    return replace(cfg, algorithm=algorithm, **changes)
