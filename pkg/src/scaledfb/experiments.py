"""Seeded test problems, reference solutions and error metrics.

Three families: Poisson deblurring with a smoothed-TV penalty, Poisson
compressed sensing with an l1 penalty, and kernel density estimation on the
unit simplex.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .linops import CirculantConvolution, DenseOperator
from .metric import BoundSchedule
from .objectives import HypersurfacePotential, KullbackLeibler, QuadraticForm
from .prox import NonnegIndicator, NonnegL1, NonnegOrthant, SimplexIndicator, WholeSpace
from .solvers import CompositeProblem, SolverConfig, StopRule, run

TOLERANCES = (1e-3, 1e-5, 1e-7)


@dataclass(frozen=True)
class ExperimentDefaults:
    """Per-family solver constants.

    ``max_iter`` is the comparison budget; the reference run uses
    ``reference_budget`` (at least ten times larger).  ``stop_tol`` > 0 selects
    the relative-iterate-change stop rule for comparisons.
    """

    a: float
    schedule_b: float
    schedule_p: float
    alpha0: float
    max_iter: int
    reference_algorithm: str
    reference_budget: int
    stop_tol: float = 0.0


DEFAULTS = {
    "deblur": ExperimentDefaults(2.1, 1e13, 2.1, 1.0, 1500, "sfbem", 15000),
    "cs": ExperimentDefaults(10.0, 1e6, 2.1, 1e4, 3000, "bb_fb", 30000, 1e-7),
    "density": ExperimentDefaults(2.1, 1e10, 2.1, 1.0, 2500, "sfbem", 25000),
}


def poisson_noise(rng, mean):
    """One Poisson draw per entry of ``mean`` (negative means are clipped)."""
    return rng.poisson(np.maximum(mean, 0.0)).astype(float)


# --- deblurring ----------------------------------------------------------------

def gaussian_psf(sigma=1.3, radius=None):
    """Truncated, unit-sum Gaussian kernel of size (2r+1)^2."""
    if radius is None:
        radius = int(math.ceil(3 * sigma))
    t = np.arange(-radius, radius + 1)
    g = np.exp(-(t[:, None] ** 2 + t[None, :] ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def blob_phantom(rng, m, blobs=8, peak=1000.0):
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    img = np.zeros((m, m))
    for _ in range(blobs):
        ci, cj = rng.uniform(0.15 * m, 0.85 * m, size=2)
        width = rng.uniform(m / 32, m / 8)
        amp = rng.uniform(0.2, 1.0)
        img += amp * np.exp(-((ii - ci) ** 2 + (jj - cj) ** 2) / (2 * width ** 2))
    return peak * img / img.max()


@dataclass
class DeblurInstance:
    seed: int
    m: int
    x_true: np.ndarray
    psf: np.ndarray
    b: np.ndarray
    bg: float = 1.0
    rho: float = 0.045
    hs_delta: float = 0.05
    kind: str = "deblur"

    @property
    def A(self):
        return CirculantConvolution(self.psf, self.m)

    def smooth_term(self):
        kl = KullbackLeibler(self.A, self.b, self.bg)
        return kl + self.rho * HypersurfacePotential(self.m, self.hs_delta)

    def problem(self):
        return CompositeProblem(self.smooth_term(), NonnegIndicator(), NonnegOrthant())

    def x0(self):
        level = max(float(np.mean(self.b)) - self.bg, 1e-3)
        return np.full(self.m * self.m, level)

    def arrays(self):
        return {"psf": self.psf, "b": self.b.reshape(self.m, self.m),
                "x_true": self.x_true.reshape(self.m, self.m)}

    def params(self):
        return {"m": self.m, "bg": self.bg, "rho": self.rho, "hs_delta": self.hs_delta}


def gen_deblur(seed, m=64, blobs=8, rho=0.045, hs_delta=0.05, bg=1.0, psf_sigma=1.3,
               peak=1000.0):
    rng = np.random.default_rng(seed)
    x_true = blob_phantom(rng, m, blobs, peak).reshape(-1)
    psf = gaussian_psf(psf_sigma)
    mean = CirculantConvolution(psf, m).apply(x_true) + bg
    b = poisson_noise(rng, mean)
    return DeblurInstance(seed, m, x_true, psf, b, bg, rho, hs_delta)


# --- compressed sensing ------------------------------------------------------------

def flux_preserving_matrix(rng, m, n):
    """Bernoulli(1/2) pattern scaled by 1/m: nonnegative, column sums <= 1,
    every row and column nonzero."""
    while True:
        A = (rng.random((m, n)) < 0.5).astype(float) / m
        if np.all(A.sum(axis=0) > 0) and np.all(A.sum(axis=1) > 0):
            return A


@dataclass
class CsInstance:
    seed: int
    A: np.ndarray
    x_true: np.ndarray
    b: np.ndarray
    bg: float = 1e-10
    rho: float = 1e-3
    s: int = 20
    kind: str = "cs"

    def problem(self):
        kl = KullbackLeibler(DenseOperator(self.A, nonneg=True), self.b, self.bg)
        return CompositeProblem(kl, NonnegL1(self.rho), NonnegOrthant())

    def x0(self):
        level = max(float(np.sum(self.b)) / float(np.sum(self.A)), 1e-3)
        return np.full(self.A.shape[1], level)

    def arrays(self):
        return {"A": self.A, "b": self.b, "x_true": self.x_true}

    def params(self):
        m, n = self.A.shape
        return {"m": m, "n": n, "s": self.s, "bg": self.bg, "rho": self.rho}


def gen_cs(seed, m=1000, n=5000, s=20, rho=1e-3, bg=1e-10, amplitude=1e5):
    if not m < n:
        raise ValueError("compressed sensing needs m < n")
    if not 0 < s <= n:
        raise ValueError("sparsity must lie in [1, n]")
    rng = np.random.default_rng(seed)
    A = flux_preserving_matrix(rng, m, n)
    x_true = np.zeros(n)
    support = rng.choice(n, size=s, replace=False)
    x_true[support] = rng.uniform(0.0, amplitude, size=s)
    # a zero draw would lower the support size
    x_true[support] = np.where(x_true[support] > 0, x_true[support], amplitude / 2)
    b = poisson_noise(rng, A @ x_true + bg)
    return CsInstance(seed, A, x_true, b, bg, rho, s)


# --- density estimation ---------------------------------------------------------------

def mixture_params(components=5):
    """Spread parameters and centers of the equal-weight test mixture."""
    r = (7.0 / 9.0) ** np.arange(components)
    return r ** 0.25, 14.0 * (r - 1.0)


def gaussian_kernel(t, c, spread, param="variance"):
    """Normalized Gaussian density; ``spread`` is a variance or a std."""
    var = spread if param == "variance" else spread ** 2
    return np.exp(-((t - c) ** 2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


@dataclass
class DensityInstance:
    seed: int
    samples: np.ndarray
    C: np.ndarray
    p: np.ndarray
    sigma: float = 1.0
    kernel_param: str = "variance"
    kind: str = "density"

    def problem(self):
        return CompositeProblem(QuadraticForm(self.C, self.p), SimplexIndicator(), WholeSpace())

    def x0(self):
        n = self.p.size
        return np.full(n, 1.0 / n)

    def arrays(self):
        return {"C": self.C, "p": self.p, "samples": self.samples}

    def params(self):
        return {"n": int(self.p.size), "sigma": self.sigma, "kernel_param": self.kernel_param}

    def estimate(self, x, t):
        """Density estimate ``sum_i x_i k_sigma(t, tau_i)`` at points t."""
        t = np.asarray(t, dtype=float)
        K = gaussian_kernel(t[:, None], self.samples[None, :], self.sigma, self.kernel_param)
        return K @ x


def gen_density(seed, n=1000, sigma=1.0, kernel_param="variance"):
    if n < 10:
        raise ValueError("need at least 10 samples")
    if kernel_param not in ("variance", "std"):
        raise ValueError("kernel_param must be 'variance' or 'std'")
    rng = np.random.default_rng(seed)
    spreads, centers = mixture_params()
    comp = rng.integers(0, spreads.size, size=n)
    scale = np.sqrt(spreads) if kernel_param == "variance" else spreads
    samples = centers[comp] + scale[comp] * rng.standard_normal(n)
    diff = samples[:, None] - samples[None, :]
    two_sigma = 2.0 * sigma if kernel_param == "variance" else math.sqrt(2.0) * sigma
    C = gaussian_kernel(diff, 0.0, two_sigma, kernel_param)
    C = 0.5 * (C + C.T)
    p = gaussian_kernel(diff, 0.0, sigma, kernel_param).mean(axis=1)
    return DensityInstance(seed, samples, C, p, sigma, kernel_param)


GENERATORS = {"deblur": gen_deblur, "cs": gen_cs, "density": gen_density}


def generate(experiment, seed, **sizes):
    if experiment not in GENERATORS:
        raise ValueError(f"unknown experiment {experiment!r}")
    return GENERATORS[experiment](seed, **sizes)


def instance_hash(inst):
    h = hashlib.sha256()
    h.update(inst.kind.encode())
    for name, arr in sorted(inst.arrays().items()):
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    for k, v in sorted(inst.params().items()):
        h.update(f"{k}={v!r};".encode())
    return h.hexdigest()[:16]


def save_instance(inst, out_dir, stem=None):
    """Write ``<stem>.vmfb`` (concatenated records) and ``<stem>.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{inst.kind}_seed{inst.seed}"
    arrays = inst.arrays()
    names = sorted(arrays)
    io.save_matrices(out_dir / f"{stem}.vmfb", [arrays[k] for k in names])
    manifest = {"experiment": inst.kind, "seed": inst.seed, "records": names,
                "shapes": {k: list(np.atleast_2d(arrays[k]).shape) for k in names},
                **inst.params()}
    io.write_json(out_dir / f"{stem}.json", manifest)
    return out_dir / f"{stem}.vmfb", out_dir / f"{stem}.json"


def load_instance(manifest_path):
    """Inverse of :func:`save_instance`."""
    manifest_path = Path(manifest_path)
    meta = io.read_json(manifest_path)
    mats = io.load_matrices(manifest_path.with_suffix(".vmfb"))
    if len(mats) != len(meta["records"]):
        raise io.FormatError("record count does not match the manifest")
    arr = dict(zip(meta["records"], mats))
    kind, seed = meta["experiment"], int(meta["seed"])
    if kind == "deblur":
        m = int(meta["m"])
        return DeblurInstance(seed, m, arr["x_true"].reshape(-1), arr["psf"],
                              arr["b"].reshape(-1), meta["bg"], meta["rho"], meta["hs_delta"])
    if kind == "cs":
        return CsInstance(seed, arr["A"], arr["x_true"].reshape(-1), arr["b"].reshape(-1),
                          meta["bg"], meta["rho"], int(meta["s"]))
    if kind == "density":
        return DensityInstance(seed, arr["samples"].reshape(-1), arr["C"], arr["p"].reshape(-1),
                               meta["sigma"], meta["kernel_param"])
    raise io.FormatError(f"unknown experiment {kind!r}")


# --- reference solution and metrics ---------------------------------------------------------

def default_config(experiment, algorithm, **overrides):
    """Solver configuration with the family defaults."""
    d = DEFAULTS[experiment]
    opts = dict(algorithm=algorithm, a=d.a, alpha0=d.alpha0, max_iter=d.max_iter,
                schedule=BoundSchedule(d.schedule_b, d.schedule_p))
    if d.stop_tol > 0:
        opts["stop_rule"] = StopRule("iterate_rel_change", d.stop_tol)
    opts.update(overrides)
    return SolverConfig(**opts)


def polish_simplex_qp(C, p, x, support_rtol=1e-10, kkt_atol=1e-12):
    """Exact minimizer of ``x^T C x / 2 - p^T x`` on the simplex face
    spanned by the support of ``x``.

    Solves the equality-constrained KKT system on the support.  Returns None
    unless the result is strictly positive there and the multiplier
    conditions hold off the support, i.e. unless it is a certified minimizer.
    """
    x = np.asarray(x, dtype=float)
    if not x.max() > 0:
        return None
    S = np.flatnonzero(x > support_rtol * x.max())
    s = S.size
    K = np.zeros((s + 1, s + 1))
    K[:s, :s] = C[np.ix_(S, S)]
    K[:s, s] = 1.0
    K[s, :s] = 1.0
    try:
        sol = np.linalg.solve(K, np.r_[p[S], 1.0])
    except np.linalg.LinAlgError:
        return None
    if not np.all(sol[:s] > 0):
        return None
    xn = np.zeros_like(x)
    xn[S] = sol[:s]
    mu = -sol[s]
    grad = C @ xn - p
    scale = max(1.0, float(np.max(np.abs(p))))
    if np.min(grad - mu) < -kkt_atol * scale:
        return None
    return xn


def compute_reference(inst, budget=None, algorithm=None, cache_dir=None):
    """Long run of the designated solver; returns ``(x_star, F_star)``.

    Density references are refined by :func:`polish_simplex_qp` when that
    yields a certified minimizer.  With ``cache_dir`` the result is stored under a key built from the
    instance hash, solver and budget, and later calls load it verbatim.
    """
    d = DEFAULTS[inst.kind]
    budget = d.reference_budget if budget is None else int(budget)
    algorithm = algorithm or d.reference_algorithm
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"ref_{inst.kind}_{instance_hash(inst)}_{algorithm}_{budget}.npz"
        if path.exists():
            with np.load(path) as z:
                return z["x"].copy(), float(z["F"])
    cfg = default_config(inst.kind, algorithm, max_iter=budget, stop_rule=StopRule())
    problem = inst.problem()
    out = run(cfg, problem, inst.x0())
    x = out.x
    F = problem.objective(x)
    if inst.kind == "density":
        xp = polish_simplex_qp(inst.C, inst.p, x)
        if xp is not None:
            Fp = problem.objective(xp)
            if Fp <= F:
                x, F = xp, Fp
    if not math.isfinite(F):
        raise RuntimeError(f"reference objective is {F}")
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, x=x, F=np.float64(F))
    return x, F


class ErrorTracker:
    """Run observer accumulating relative distances to x* and x_true."""

    def __init__(self, x_star=None, x_true=None):
        self.x_star = x_star
        self.x_true = x_true
        self.rme = []
        self.rre = []
        self._ns = np.linalg.norm(x_star) if x_star is not None else None
        self._nt = np.linalg.norm(x_true) if x_true is not None else None

    def __call__(self, k, x):
        if self.x_star is not None:
            self.rme.append(float(np.linalg.norm(x - self.x_star) / self._ns))
        if self.x_true is not None:
            self.rre.append(float(np.linalg.norm(x - self.x_true) / self._nt))


def rre(x, x_true):
    return float(np.linalg.norm(np.ravel(x) - np.ravel(x_true)) / np.linalg.norm(x_true))


@dataclass
class MetricsReport:
    gap_rel: np.ndarray
    rme: np.ndarray | None = None
    rre: np.ndarray | None = None
    time_s: np.ndarray | None = None
    table: list = field(default_factory=list)

    def iterations_to(self, tol):
        for row in self.table:
            if row["tol"] == tol:
                return row["it"]
        return first_hit(self.gap_rel, tol)


def relative_gap(F, F_star):
    if F_star == 0:
        raise ValueError("relative gap undefined for F* = 0")
    return (np.asarray(F, dtype=float) - F_star) / abs(F_star)


def first_hit(gaps, tol):
    """1-based iteration index of the first gap below tol, or None."""
    idx = np.flatnonzero(np.asarray(gaps) < tol)
    return int(idx[0]) + 1 if idx.size else None


def evaluate(run_out, F_star, x_star=None, x_true=None, tracker=None, tols=TOLERANCES):
    F = run_out.objective
    gaps = relative_gap(F, F_star) if F.size else np.zeros(0)
    rme_arr = rre_arr = None
    if run_out.iterates is not None:
        its = run_out.iterates
        if x_star is not None:
            ns = np.linalg.norm(x_star)
            rme_arr = np.array([np.linalg.norm(x - x_star) / ns for x in its])
        if x_true is not None:
            rre_arr = np.array([rre(x, x_true) for x in its])
    elif tracker is not None:
        rme_arr = np.array(tracker.rme) if tracker.rme else None
        rre_arr = np.array(tracker.rre) if tracker.rre else None
    times = np.array([r.time_s for r in run_out.history])
    table = []
    for tol in tols:
        it = first_hit(gaps, tol)
        row = {"tol": tol, "it": it, "rme": None, "time_s": None}
        if it is not None:
            row["time_s"] = float(times[it - 1])
            if rme_arr is not None:
                row["rme"] = float(rme_arr[it - 1])
        table.append(row)
    return MetricsReport(gaps, rme_arr, rre_arr, times, table)


def rate_check(F, F_star, a, k_lo=10, k_mid=100, k_hi=None, factor=3.0):
    """Bounded-constant test for ``(F_k - F*) (k - 1 + a)^2``.

    ``F[j]`` is F(x^(j+1)).  Passes when the supremum over ``[k_lo, k_hi]``
    is at most ``factor`` times the supremum over ``[k_lo, k_mid]``.
    """
    F = np.asarray(F, dtype=float)
    k = np.arange(1, F.size + 1)
    k_hi = F.size if k_hi is None else min(k_hi, F.size)
    scaled = (F - F_star) * (k - 1 + a) ** 2
    early = scaled[(k >= k_lo) & (k <= k_mid)]
    full = scaled[(k >= k_lo) & (k <= k_hi)]
    if early.size == 0:
        raise ValueError("history too short for the rate check")
    sup_early, sup_full = float(early.max()), float(full.max())
    ok = sup_full <= factor * max(sup_early, 0.0) if sup_early > 0 else sup_full <= 0
    return {"sup_early": sup_early, "sup_full": sup_full, "k_lo": k_lo, "k_mid": k_mid,
            "k_hi": int(k_hi), "factor": factor, "a": a, "ok": bool(ok)}


def backtracking_check(history, alpha0=None, delta=None, eta=None, lipschitz=None):
    """Step-4 inequality at every accepted iterate, non-increasing steplengths,
    and the lower bound ``alpha_k >= delta * eta / L`` when L is known.

    ``history`` holds iteration records or mappings with the keys ``k``,
    ``alpha``, ``f_plus``, ``model`` and ``bt_tol``.
    """
    history = [r if isinstance(r, dict) else vars(r) for r in history]
    viol = [r["k"] for r in history
            if not (r["f_plus"] <= r["model"] + r["bt_tol"])]
    alphas = np.array([r["alpha"] for r in history])
    mono = bool(np.all(np.diff(alphas) <= 0)) and (alpha0 is None or alphas.size == 0
                                                   or alphas[0] <= alpha0)
    out = {"step4_ok": not viol, "step4_violations": viol[:10], "alpha_monotone": mono}
    if lipschitz is not None and delta is not None and eta is not None and alphas.size:
        lb = delta * eta / lipschitz
        out["alpha_lower_bound"] = lb
        out["alpha_min"] = float(alphas.min())
        out["alpha_bound_ok"] = bool(alphas.min() >= lb)
    out["ok"] = all(v for key, v in out.items() if key.endswith("_ok") or key == "alpha_monotone")
    return out
