"""Adaptive simulated annealing with per-parameter reannealing.

Generation temperatures follow T_i(k_i) = T0_i exp(-c_i k_i^(1/D)) where D is
the search dimension and each parameter carries its own annealing-time counter
k_i. Candidate steps use the heavy-tailed generating law

    delta = sgn(u - 1/2) T [(1 + 1/T)^{|2u - 1|} - 1] * (hi - lo)

whose occasional full-range jumps are what lets the schedule cool this fast.
Out-of-bounds coordinates are re-drawn (up to a retry cap) and finally
clamped. Acceptance is Metropolis on a separate temperature annealed by the
same law with its own counter that advances once per accepted point.

Every reanneal interval (counted in acceptances) the parameter counters are
rescaled from cost sensitivities s_i = |dC/dx_i| at the best point: the new
k_i solves T_i(k_i) = T_i(old) * s_max/s_i, clamped to [1, k_max], so
directions the cost barely feels are re-heated relative to sensitive ones.

The run stops when two consecutive windows of 100 acceptances leave the best
cost unchanged within tolerance, or at the trial budget (default 20000).
`local_refine` is a bounded quasi-Newton polish (numerical gradients, capped
function calls) that never returns a point worse than its start.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from .errors import CostNotFinite, InvalidBounds
from .rng import UniformStream

_T_FLOOR = 1e-300
_BIG = 1e30


def temperature(k, t0=1.0, c=1.0, d: int = 1):
    """Annealing schedule T(k) = t0 exp(-c k^(1/d))."""
    k = np.asarray(k, dtype=float)
    out = t0 * np.exp(-c * k ** (1.0 / d))
    return float(out) if out.ndim == 0 else out


def generation_delta(u, temp):
    """Heavy-tailed generating law; u in [0, 1] maps to delta in [-1, 1]."""
    u = np.asarray(u, dtype=float)
    t = np.maximum(np.asarray(temp, dtype=float), _T_FLOOR)
    v = np.abs(2.0 * u - 1.0)
    out = np.sign(u - 0.5) * t * ((1.0 + 1.0 / t) ** v - 1.0)
    return float(out) if out.ndim == 0 else out


@dataclass
class AnnealConfig:
    """Knobs for minimize(); defaults follow the protocol in the module doc."""

    t0: float | np.ndarray = 1.0
    c: float | np.ndarray = 1.0
    accept_t0: float | None = None     # default: max(|cost(x0)|, 1)
    accept_c: float = 1.0
    reanneal_interval: int = 100       # acceptances between sensitivity rescales
    acceptance_window: int = 100
    window_repeat_tol: float = 1e-12
    max_trials: int = 20000
    k_max: float = 1e12
    regen_attempts: int = 100
    sensitivity_step: float = 1e-4     # times parameter range
    seed: int = 0
    x0: np.ndarray | None = None


@dataclass(frozen=True)
class OptResult:
    x: np.ndarray
    cost: float
    trials: int
    acceptances: int
    exit_reason: str                   # converged | trial-limit | acceptance-repeat
    window_best: tuple[float, ...] = field(default_factory=tuple)


def _check_bounds(bounds):
    arr = np.asarray(bounds, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidBounds("bounds must be a sequence of (lo, hi) pairs")
    lo, hi = arr[:, 0].copy(), arr[:, 1].copy()
    if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
        raise InvalidBounds("bounds must be finite")
    if np.any(lo > hi):
        raise InvalidBounds("each lower bound must not exceed its upper bound")
    return lo, hi


def generate_candidate(x, temps, lo, hi, uniforms: UniformStream,
                       regen_attempts: int = 100) -> np.ndarray:
    """One candidate from the generating law, re-drawing out-of-bounds dims."""
    rangev = hi - lo
    cand = x + generation_delta(uniforms.take(x.size), temps) * rangev
    bad = (cand < lo) | (cand > hi)
    tries = 0
    while bad.any() and tries < regen_attempts:
        idx = np.nonzero(bad)[0]
        cand[idx] = x[idx] + generation_delta(uniforms.take(idx.size), temps[idx]) * rangev[idx]
        bad = (cand < lo) | (cand > hi)
        tries += 1
    return np.clip(cand, lo, hi)


def minimize(cost, bounds, config: AnnealConfig | None = None,
             trace_path=None, record_accepted: list | None = None,
             max_acceptances: int | None = None) -> OptResult:
    """Anneal cost over the box; returns the best point ever evaluated."""
    cfg = config or AnnealConfig()
    lo, hi = _check_bounds(bounds)
    d = lo.size
    rangev = hi - lo
    free = rangev > 0.0
    inv_d = 1.0 / d

    t0v = np.broadcast_to(np.asarray(cfg.t0, dtype=float), (d,)).copy()
    cv = np.broadcast_to(np.asarray(cfg.c, dtype=float), (d,)).copy()
    if np.any(t0v <= 0.0) or np.any(cv <= 0.0):
        raise InvalidBounds("t0 and c must be positive")

    x = np.clip(np.asarray(cfg.x0, dtype=float), lo, hi) if cfg.x0 is not None \
        else 0.5 * (lo + hi)
    if x.size != d:
        raise InvalidBounds("x0 dimension must match bounds")

    best_f = math.inf
    best_x = x.copy()

    def evaluate(point):
        nonlocal best_f, best_x
        v = cost(point)
        v = float(v) if v is not None and np.isfinite(v) else math.inf
        if v < best_f:
            best_f = v
            best_x = np.array(point, dtype=float)
        return v

    fx = evaluate(x)
    if not math.isfinite(fx):
        raise CostNotFinite("cost is not finite at the initial point")

    accept_t0 = cfg.accept_t0 if cfg.accept_t0 is not None else max(abs(fx), 1.0)

    uniforms = UniformStream(cfg.seed, stream=0)
    k_gen = np.zeros(d)
    k_acc = 0.0
    trials = 0
    acceptances = 0
    next_window = cfg.acceptance_window
    next_reanneal = cfg.reanneal_interval
    window_best: list[float] = []
    trace_rows: list[str] | None = [] if trace_path is not None else None
    exit_reason = "trial-limit"

    def reanneal():
        nonlocal k_gen
        step = cfg.sensitivity_step * rangev
        sens = np.zeros(d)
        for i in range(d):
            if not free[i]:
                continue
            up = best_x.copy()
            dn = best_x.copy()
            up[i] = min(up[i] + step[i], hi[i])
            dn[i] = max(dn[i] - step[i], lo[i])
            span = up[i] - dn[i]
            if span <= 0.0:
                continue
            fu = evaluate(up)
            fd = evaluate(dn)
            if math.isfinite(fu) and math.isfinite(fd):
                sens[i] = abs(fu - fd) / span
        s_max = sens.max()
        if s_max <= 0.0:
            return
        cur_t = t0v * np.exp(-cv * np.maximum(k_gen, 0.0) ** inv_d)
        active = free & (sens > 0.0)
        t_new = cur_t[active] * (s_max / sens[active])
        arg = np.maximum(np.log(t0v[active] / np.maximum(t_new, _T_FLOOR)) / cv[active], 0.0)
        k_gen[active] = np.clip(arg ** d, 1.0, cfg.k_max)

    while trials < cfg.max_trials:
        trials += 1
        temps = np.maximum(t0v * np.exp(-cv * k_gen ** inv_d), _T_FLOOR)
        cand = generate_candidate(x, temps, lo, hi, uniforms, cfg.regen_attempts)
        fc = evaluate(cand)
        k_gen += 1.0

        t_acc = max(accept_t0 * math.exp(-cfg.accept_c * k_acc ** inv_d), _T_FLOOR)
        if trace_rows is not None:
            trace_rows.append(f"{trials},{fc:.17g},{t_acc:.17g}")

        delta = fc - fx
        accepted = delta <= 0.0
        if not accepted and math.isfinite(fc):
            ratio = delta / t_acc
            accepted = ratio < 700.0 and uniforms.one() < math.exp(-ratio)
        elif not accepted:
            pass
        if accepted:
            x = cand
            fx = fc
            acceptances += 1
            k_acc += 1.0
            if record_accepted is not None:
                record_accepted.append((x.copy(), fx))
            if acceptances >= next_window:
                window_best.append(best_f)
                next_window += cfg.acceptance_window
                if (len(window_best) >= 2 and
                        abs(window_best[-1] - window_best[-2]) <= cfg.window_repeat_tol):
                    exit_reason = "acceptance-repeat"
                    break
            if max_acceptances is not None and acceptances >= max_acceptances:
                exit_reason = "acceptance-repeat"
                break
            if acceptances >= next_reanneal:
                reanneal()
                next_reanneal += cfg.reanneal_interval

    if trace_path is not None:
        with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("trial,cost,accept_temp\n")
            fh.write("\n".join(trace_rows))
            if trace_rows:
                fh.write("\n")

    return OptResult(x=best_x, cost=best_f, trials=trials, acceptances=acceptances,
                     exit_reason=exit_reason, window_best=tuple(window_best))


def local_refine(cost, x0, bounds, max_calls: int = 1000,
                 grad_tol: float = 1e-8) -> OptResult:
    """Bounded quasi-Newton polish; never worse than the starting point.

    Gradients are numerical, so the call budget is spent in blocks of D + 1
    evaluations; convergence is a projected-gradient norm below
    grad_tol * (1 + |start cost|).
    """
    lo, hi = _check_bounds(bounds)
    x0 = np.clip(np.asarray(x0, dtype=float), lo, hi)
    calls = 0

    def wrapped(pt):
        nonlocal calls
        calls += 1
        v = cost(pt)
        return float(v) if v is not None and np.isfinite(v) else _BIG

    f0 = wrapped(x0)
    if f0 >= _BIG:
        raise CostNotFinite("cost is not finite at the refine start")
    iter_budget = max(1, int(max_calls) // (x0.size + 1))
    res = _scipy_minimize(
        wrapped, x0, method="L-BFGS-B", bounds=list(zip(lo, hi)),
        options={"maxfun": max(1, int(max_calls)), "maxiter": iter_budget,
                 "ftol": 1e-17, "gtol": grad_tol * (1.0 + abs(f0))})
    if np.isfinite(res.fun) and res.fun < f0:
        x_best, f_best = np.clip(res.x, lo, hi), float(res.fun)
    else:
        x_best, f_best = x0, f0
    reason = "converged" if res.status == 0 else "trial-limit"
    return OptResult(x=x_best, cost=f_best, trials=calls, acceptances=0,
                     exit_reason=reason)


@dataclass(frozen=True)
class ImportanceSample:
    points: np.ndarray       # accepted trajectory, shape (k, D)
    neg_log_density: np.ndarray
    acceptance_rate: float
    result: OptResult


def importance_sample(log_density, bounds, config: AnnealConfig | None = None,
                      n: int | None = None) -> ImportanceSample:
    """Accepted trajectory of an annealing run over cost = -log_density."""
    record: list = []
    res = minimize(lambda p: -log_density(p), bounds, config,
                   record_accepted=record, max_acceptances=n)
    if record:
        pts = np.stack([p for p, _ in record])
        vals = np.array([v for _, v in record])
    else:
        lo, hi = _check_bounds(bounds)
        pts = np.empty((0, lo.size))
        vals = np.empty(0)
    rate = res.acceptances / res.trials if res.trials else 0.0
    return ImportanceSample(points=pts, neg_log_density=vals,
                            acceptance_rate=rate, result=res)
