"""Regional EEG model: columnar firing dynamics under scalp electrodes.

Each electrode site sits over cortical columns whose excitatory and
inhibitory firing aggregates M^E, M^I evolve by drift and diffusion

    g^G  = -(M^G + N^G tanh F^G) / tau
    g^GG =  N^G sech^2(F^G) / tau

where the threshold factor for target type G sums over source types G'
(short-range E and I plus a long-range excitatory channel):

    F^G = (V^G - sum_G' v a N - 1/2 sum_G' v A M - v_EE (a+ N+ + 1/2 A+ M+))
          / sqrt(pi * sum over the same terms of (v^2 + phi_var)(a N + 1/2 A M))

with net efficacy a = A/2 + B. An option zeroes the M terms in the variance
aggregate only (the usual working approximation, on by default). Centering
shifts the excitatory-source background terms B^G_E so that F^G = 0 exactly
at the firing origin M = 0 with quiet long-range input; long-range background
stays fixed.

The measured potential at a site is Phi = offset + gain_e M^E + gain_i M^I
with the inhibitory aggregate tied to the excitatory one along the firing
trough, M^I = trough_slope * M^E. One observed step obeys

    Phi(t + dt) ~ Normal(Phi(t) + m dt, sigma^2 dt)
    m = gain_e g^E + gain_i g^I,  sigma^2 = gain_e^2 g^EE + gain_i^2 g^II

and the joint log-likelihood of a multichannel series is the sum of those
transition terms over electrodes and epochs. Firings are recovered from data
by inverting the potential map, clamping to the firing ranges (clamps are
counted; a clamp share above 1 percent marks a fit out-of-range).

Inter-site couplings carry delayed excitatory afferents
M-dagger(t) = weight * M^E_source(t - delay), zero before the data start.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import anneal
from .errors import (DegenerateVariance, DimensionMismatch, NonPositiveDenominator,
                     NoSolution, OutOfDomain, SingularInversion)
from .rng import NormalStream

CLAMP_FLAG_FRACTION = 0.01
_PI = float(np.pi)

SITE_FIELDS = ("offset", "gain_e", "gain_i", "trough_slope")


@dataclass(frozen=True)
class ColumnParams:
    """Columnar interaction constants shared by every site of a net.

    Matrix-valued entries are ((EE, EI), (IE, II)) nested tuples indexed
    [target][source]. Efficacies are macrocolumnar-scaled; polarizations are
    in mV (inhibitory sources carry negative mean), thresholds in mV, tau in
    ms. None of these values come with the model; they are configuration.
    """

    n_e: float = 80.0
    n_i: float = 30.0
    tau_ms: float = 5.0
    threshold: tuple[float, float] = (10.0, 10.0)
    gain: tuple[tuple[float, float], tuple[float, float]] = ((0.5, 0.5), (0.5, 0.5))
    background: tuple[tuple[float, float], tuple[float, float]] = ((0.1, 0.1), (0.1, 0.1))
    pol_mean: tuple[tuple[float, float], tuple[float, float]] = ((0.1, -0.1), (0.1, -0.1))
    pol_var: tuple[tuple[float, float], tuple[float, float]] = ((0.031, 0.031), (0.031, 0.031))
    lr_count: float = 8.0
    lr_gain: float = 0.5
    lr_background: float = 0.1


class _ColumnsView:
    """Precomputed coefficient arrays for the threshold factor."""

    def __init__(self, cols: ColumnParams):
        n = np.array([cols.n_e, cols.n_i])
        gain_a = np.asarray(cols.gain, dtype=float)
        v = np.asarray(cols.pol_mean, dtype=float)
        pv = np.asarray(cols.pol_var, dtype=float)
        eff = 0.5 * gain_a + np.asarray(cols.background, dtype=float)
        lr_eff = 0.5 * cols.lr_gain + cols.lr_background
        v_lr = v[0, 0]
        pv_lr = pv[0, 0]
        vv = v * v + pv
        vv_lr = v_lr * v_lr + pv_lr

        self.tau = cols.tau_ms
        self.n = n
        # numerator: num0 - ce M^E - ci M^I - clr M-dagger
        self.num0 = (np.asarray(cols.threshold, dtype=float)
                     - (v * eff * n).sum(axis=1)
                     - v_lr * lr_eff * cols.lr_count)
        self.ce = 0.5 * gain_a[:, 0] * v[:, 0]
        self.ci = 0.5 * gain_a[:, 1] * v[:, 1]
        self.clr = np.full(2, 0.5 * cols.lr_gain * v_lr)
        # variance aggregate: den0 + de M^E + di M^I + dlr M-dagger
        self.den0 = (vv * eff * n).sum(axis=1) + vv_lr * lr_eff * cols.lr_count
        self.de = 0.5 * gain_a[:, 0] * vv[:, 0]
        self.di = 0.5 * gain_a[:, 1] * vv[:, 1]
        self.dlr = np.full(2, 0.5 * cols.lr_gain * vv_lr)


def threshold_factor(cols: ColumnParams, m_e, m_i, m_lr=0.0,
                     denominator_approx: bool = True):
    """Threshold factors (F^E, F^I); inputs broadcast elementwise."""
    view = _ColumnsView(cols)
    m_e = np.asarray(m_e, dtype=float)
    m_i = np.asarray(m_i, dtype=float)
    m_lr = np.asarray(m_lr, dtype=float)
    out = []
    for g in range(2):
        num = view.num0[g] - view.ce[g] * m_e - view.ci[g] * m_i - view.clr[g] * m_lr
        den = view.den0[g]
        if not denominator_approx:
            den = den + view.de[g] * m_e + view.di[g] * m_i + view.dlr[g] * m_lr
        den = np.asarray(den, dtype=float)
        if np.any(den <= 0.0):
            raise NonPositiveDenominator("variance aggregate must be positive")
        f = num / np.sqrt(_PI * den)
        out.append(float(f) if f.ndim == 0 else f)
    return out[0], out[1]


def drifts_diffusions(cols: ColumnParams, f_e, f_i, m_e, m_i):
    """Drifts g^E, g^I and diffusions g^EE, g^II at the given state."""
    tau = cols.tau_ms
    f_e = np.asarray(f_e, dtype=float)
    f_i = np.asarray(f_i, dtype=float)
    sech2_e = 1.0 / np.cosh(np.minimum(np.abs(f_e), 350.0)) ** 2
    sech2_i = 1.0 / np.cosh(np.minimum(np.abs(f_i), 350.0)) ** 2
    g_e = -(np.asarray(m_e, dtype=float) + cols.n_e * np.tanh(f_e)) / tau
    g_i = -(np.asarray(m_i, dtype=float) + cols.n_i * np.tanh(f_i)) / tau
    g_ee = cols.n_e * sech2_e / tau
    g_ii = cols.n_i * sech2_i / tau
    return g_e, g_i, g_ee, g_ii


def centering_shift(cols: ColumnParams) -> ColumnParams:
    """Shift B^G_E so both threshold factors vanish at the firing origin.

    Long-range background is left untouched. Idempotent. Raises NoSolution
    when an excitatory-source term v^G_E N^E is zero.
    """
    view = _ColumnsView(cols)
    v = np.asarray(cols.pol_mean, dtype=float)
    b = np.asarray(cols.background, dtype=float).copy()
    for g in range(2):
        scale = v[g, 0] * cols.n_e
        if abs(scale) < 1e-300 or not np.isfinite(scale):
            raise NoSolution("excitatory-source centering term is zero")
        b[g, 0] += view.num0[g] / scale
    return replace(cols, background=((float(b[0, 0]), float(b[0, 1])),
                                     (float(b[1, 0]), float(b[1, 1]))))


@dataclass(frozen=True)
class ElectrodeSite:
    """Potential map of one electrode: Phi = offset + gain_e M^E + gain_i M^I."""

    name: str
    offset: float = 0.0
    gain_e: float = 1.0
    gain_i: float = 0.5
    trough_slope: float = 0.5     # M^I = trough_slope * M^E


@dataclass(frozen=True)
class Coupling:
    """Directed delayed afferent: weight * M^E_source(t - delay) into target."""

    source: str
    target: str
    weight: float
    delay: int

    def __post_init__(self):
        if int(self.delay) != self.delay or self.delay < 0:
            raise OutOfDomain("delay must be a non-negative integer")
        object.__setattr__(self, "delay", int(self.delay))


@dataclass(frozen=True)
class RegionNet:
    """Electrode sites, their couplings, and shared columnar constants."""

    sites: tuple[ElectrodeSite, ...]
    couplings: tuple[Coupling, ...] = ()
    columns: ColumnParams = field(default_factory=ColumnParams)
    dt_ms: float = 5.2
    denominator_approx: bool = True

    def __post_init__(self):
        names = [s.name for s in self.sites]
        if len(set(names)) != len(names):
            raise OutOfDomain("site names must be unique")
        if not (self.dt_ms > 0.0):
            raise OutOfDomain("dt must be positive")
        index = {n: i for i, n in enumerate(names)}
        for c in self.couplings:
            if c.source not in index or c.target not in index:
                raise OutOfDomain(f"coupling {c.source}->{c.target} names unknown site")
        self._check_zero_delay_acyclic(index)

    def _check_zero_delay_acyclic(self, index):
        adj = {i: [] for i in range(len(self.sites))}
        for c in self.couplings:
            if c.delay == 0:
                adj[index[c.source]].append(index[c.target])
        state = {}

        def visit(node):
            state[node] = 1
            for nxt in adj[node]:
                if state.get(nxt) == 1:
                    raise OutOfDomain("zero-delay couplings must not form a cycle")
                if nxt not in state:
                    visit(nxt)
            state[node] = 2

        for i in adj:
            if i not in state:
                visit(i)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.sites)

    def site_index(self, name: str) -> int:
        for i, s in enumerate(self.sites):
            if s.name == name:
                return i
        raise OutOfDomain(f"unknown site {name!r}")


def parse_param_key(key: str):
    """'Cz.gain_e' -> site field; 'Fz->Cz.weight' -> coupling weight."""
    base, _, fieldname = key.partition(".")
    if not fieldname:
        raise OutOfDomain(f"parameter key {key!r} needs a '.field' suffix")
    if "->" in base:
        src, _, tgt = base.partition("->")
        if fieldname != "weight":
            raise OutOfDomain("coupling parameters expose only 'weight'")
        return ("coupling", (src, tgt), fieldname)
    if fieldname not in SITE_FIELDS:
        raise OutOfDomain(f"unknown site field {fieldname!r}")
    return ("site", base, fieldname)


def apply_params(net: RegionNet, values: dict) -> RegionNet:
    """Return a net with the keyed site/coupling parameters replaced."""
    site_upd: dict[str, dict] = {}
    coup_upd: dict[tuple[str, str], float] = {}
    for key, val in values.items():
        kind, ident, fieldname = parse_param_key(key)
        if kind == "site":
            net.site_index(ident)
            site_upd.setdefault(ident, {})[fieldname] = float(val)
        else:
            coup_upd[ident] = float(val)
    sites = tuple(replace(s, **site_upd[s.name]) if s.name in site_upd else s
                  for s in net.sites)
    pairs = {(c.source, c.target) for c in net.couplings}
    for pair in coup_upd:
        if pair not in pairs:
            raise OutOfDomain(f"unknown coupling {pair[0]}->{pair[1]}")
    couplings = tuple(replace(c, weight=coup_upd[(c.source, c.target)])
                      if (c.source, c.target) in coup_upd else c
                      for c in net.couplings)
    return replace(net, sites=sites, couplings=couplings)


def _site_arrays(net: RegionNet):
    offset = np.array([s.offset for s in net.sites])
    gain_e = np.array([s.gain_e for s in net.sites])
    gain_i = np.array([s.gain_i for s in net.sites])
    slope = np.array([s.trough_slope for s in net.sites])
    denom = gain_e + gain_i * slope
    if np.any(np.abs(denom) < 1e-12):
        raise SingularInversion("combined electrode gain is zero")
    with np.errstate(divide="ignore"):
        bound = np.where(slope != 0.0,
                         np.minimum(net.columns.n_e, net.columns.n_i / np.abs(slope)),
                         net.columns.n_e)
    return offset, gain_e, gain_i, slope, denom, bound


def recover_firings(net: RegionNet, series):
    """Invert potentials to clamped M^E states.

    Returns (m_e, clamp_count, excess_sum): clamped per-epoch firings, how
    many values hit the clamp, and the total distance out of range.
    """
    phi = np.asarray(series, dtype=float)
    if phi.ndim != 2 or phi.shape[1] != len(net.sites):
        raise DimensionMismatch("series must be (epochs, sites)")
    offset, _, _, _, denom, bound = _site_arrays(net)
    raw = (phi - offset) / denom
    excess = np.maximum(np.abs(raw) - bound, 0.0)
    clamped = int(np.count_nonzero(excess > 0.0))
    m_e = np.clip(raw, -bound, bound)
    return m_e, clamped, float(excess.sum())


def _afferent_totals(net: RegionNet, m_e: np.ndarray) -> np.ndarray:
    """Summed delayed afferents per (epoch, target site); zero-padded history."""
    out = np.zeros_like(m_e)
    idx = {s.name: i for i, s in enumerate(net.sites)}
    for c in net.couplings:
        src, tgt, lag = idx[c.source], idx[c.target], c.delay
        if lag == 0:
            out[:, tgt] += c.weight * m_e[:, src]
        elif lag < m_e.shape[0]:
            out[lag:, tgt] += c.weight * m_e[:-lag, src]
    return out


def delayed_afferents(net: RegionNet, firing_history, site: str, t: int) -> np.ndarray:
    """Per incoming edge, weight times the source's M^E at t - delay.

    firing_history is an (epochs, sites) array of excitatory firings; epochs
    before the data start contribute zero.
    """
    hist = np.asarray(firing_history, dtype=float)
    if hist.ndim != 2 or hist.shape[1] != len(net.sites):
        raise DimensionMismatch("firing_history must be (epochs, sites)")
    tgt = net.site_index(site)
    vals = []
    for c in net.couplings:
        if net.site_index(c.target) != tgt:
            continue
        past = t - c.delay
        vals.append(c.weight * hist[past, net.site_index(c.source)]
                    if 0 <= past < hist.shape[0] else 0.0)
    return np.asarray(vals, dtype=float)


def electrode_moments(net: RegionNet, site: str, m_e, m_lr=0.0):
    """Drift m and variance rate sigma^2 of the potential at one site."""
    s = net.sites[net.site_index(site)]
    m_i = s.trough_slope * np.asarray(m_e, dtype=float)
    f_e, f_i = threshold_factor(net.columns, m_e, m_i, m_lr,
                                net.denominator_approx)
    g_e, g_i, g_ee, g_ii = drifts_diffusions(net.columns, f_e, f_i, m_e, m_i)
    m = s.gain_e * g_e + s.gain_i * g_i
    var = s.gain_e ** 2 * g_ee + s.gain_i ** 2 * g_ii
    return m, var


def conditional_logprob(net: RegionNet, site: str, phi_next, phi_cur,
                        m_e, m_lr=0.0, dt: float | None = None):
    """Log density of one potential step given the prepoint firing state."""
    dt = net.dt_ms if dt is None else float(dt)
    if dt <= 0.0:
        raise OutOfDomain("dt must be positive")
    m, var = electrode_moments(net, site, m_e, m_lr)
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0.0):
        raise DegenerateVariance("conditional variance must be positive")
    phidot = (np.asarray(phi_next, dtype=float) - np.asarray(phi_cur, dtype=float)) / dt
    out = -0.5 * np.log(2.0 * _PI * var * dt) - dt * (phidot - m) ** 2 / (2.0 * var)
    return float(out) if out.ndim == 0 else out


def loglikelihood_details(net: RegionNet, series) -> dict:
    """Joint transition log-likelihood with clamp diagnostics."""
    phi = np.asarray(series, dtype=float)
    if phi.ndim != 2 or phi.shape[1] != len(net.sites):
        raise DimensionMismatch("series must be (epochs, sites)")
    if phi.shape[0] < 2:
        raise DimensionMismatch("need at least two epochs")
    m_e, clamped, excess = recover_firings(net, phi)
    aff = _afferent_totals(net, m_e)
    _, gain_e, gain_i, slope, _, _ = _site_arrays(net)

    pre_e = m_e[:-1, :]
    pre_i = slope * pre_e
    pre_lr = aff[:-1, :]
    f_e, f_i = threshold_factor(net.columns, pre_e, pre_i, pre_lr,
                                net.denominator_approx)
    g_e, g_i, g_ee, g_ii = drifts_diffusions(net.columns, f_e, f_i, pre_e, pre_i)
    m = gain_e * g_e + gain_i * g_i
    var = gain_e ** 2 * g_ee + gain_i ** 2 * g_ii
    if np.any(var <= 0.0):
        raise DegenerateVariance("conditional variance must be positive")
    dt = net.dt_ms
    phidot = np.diff(phi, axis=0) / dt
    terms = -0.5 * np.log(2.0 * _PI * var * dt) - dt * (phidot - m) ** 2 / (2.0 * var)
    total = float(np.sum(terms))
    count = m_e.size
    return {
        "loglik": total,
        "clamp_fraction": clamped / count if count else 0.0,
        "excess": excess,
        "out_of_range": clamped / count > CLAMP_FLAG_FRACTION if count else False,
        "per_site": {s.name: float(np.sum(terms[:, i]))
                     for i, s in enumerate(net.sites)},
    }


def joint_loglikelihood(net: RegionNet, series) -> float:
    return loglikelihood_details(net, series)["loglik"]


def innovation_stream(net: RegionNet, series) -> np.ndarray:
    """Standardized one-step innovations (unit variance under the model).

    Row t holds (Phi(t+1) - Phi(t) - m dt) / (sigma sqrt(dt)) per site; the
    potential-rate form (Phidot - m)/sigma times sqrt(dt).
    """
    phi = np.asarray(series, dtype=float)
    m_e, _, _ = recover_firings(net, phi)
    aff = _afferent_totals(net, m_e)
    _, gain_e, gain_i, slope, _, _ = _site_arrays(net)
    pre_e = m_e[:-1, :]
    f_e, f_i = threshold_factor(net.columns, pre_e, slope * pre_e, aff[:-1, :],
                                net.denominator_approx)
    g_e, g_i, g_ee, g_ii = drifts_diffusions(net.columns, f_e, f_i, pre_e, slope * pre_e)
    m = gain_e * g_e + gain_i * g_i
    var = gain_e ** 2 * g_ee + gain_i ** 2 * g_ii
    if np.any(var <= 0.0):
        raise DegenerateVariance("conditional variance must be positive")
    dt = net.dt_ms
    return (np.diff(phi, axis=0) - m * dt) / np.sqrt(var * dt)


def simulate(net: RegionNet, epochs: int, seed: int, initial=None) -> np.ndarray:
    """Euler step the potential dynamics; emitted states respect firing ranges."""
    epochs = int(epochs)
    if epochs < 1:
        raise OutOfDomain("epochs must be >= 1")
    n_sites = len(net.sites)
    offset, gain_e, gain_i, slope, denom, bound = _site_arrays(net)
    dt = net.dt_ms
    stream = NormalStream(seed)

    phi = np.empty((epochs, n_sites))
    phi[0] = np.asarray(initial, dtype=float) if initial is not None else offset
    m_hist = np.empty((epochs, n_sites))
    idx = {s.name: i for i, s in enumerate(net.sites)}
    in_edges = [(idx[c.source], idx[c.target], c.delay, c.weight)
                for c in net.couplings]

    for t in range(epochs):
        m_hist[t] = np.clip((phi[t] - offset) / denom, -bound, bound)
        phi[t] = offset + denom * m_hist[t]
        if t == epochs - 1:
            break
        aff = np.zeros(n_sites)
        for src, tgt, lag, w in in_edges:
            if t - lag >= 0:
                aff[tgt] += w * m_hist[t - lag, src]
        m_e = m_hist[t]
        f_e, f_i = threshold_factor(net.columns, m_e, slope * m_e, aff,
                                    net.denominator_approx)
        g_e, g_i, g_ee, g_ii = drifts_diffusions(net.columns, f_e, f_i,
                                                 m_e, slope * m_e)
        m = gain_e * g_e + gain_i * g_i
        var = gain_e ** 2 * g_ee + gain_i ** 2 * g_ii
        if np.any(var <= 0.0):
            raise DegenerateVariance("conditional variance must be positive")
        z = stream.draw(n_sites)
        phi[t + 1] = phi[t] + m * dt + np.sqrt(var * dt) * z
    return phi


def centering_check(net: RegionNet, series) -> list[dict]:
    """Per-site firing statistics; flags sites drifting away from the origin."""
    phi = np.asarray(series, dtype=float)
    m_e, clamped, _ = recover_firings(net, phi)
    rows = []
    for i, s in enumerate(net.sites):
        me = m_e[:, i]
        mi = s.trough_slope * me
        mean_e = float(np.mean(me))
        mean_i = float(np.mean(mi))
        rows.append({
            "site": s.name,
            "mean_e": mean_e,
            "rms_e": float(np.sqrt(np.mean(me ** 2))),
            "mean_i": mean_i,
            "rms_i": float(np.sqrt(np.mean(mi ** 2))),
            "flagged": bool(abs(mean_e) > 0.1 * net.columns.n_e
                            or abs(mean_i) > 0.1 * net.columns.n_i),
        })
    return rows


@dataclass(frozen=True)
class FitResult:
    net: RegionNet
    loglik: float
    clamp_fraction: float
    out_of_range: bool
    anneal_result: anneal.OptResult | None
    refine_result: anneal.OptResult | None


def fit_net(series, net: RegionNet, free, bounds,
            config: anneal.AnnealConfig | None = None,
            penalty_weight: float = 1e3, refine_calls: int = 1000,
            trace_path=None) -> FitResult:
    """Fit the keyed free parameters by annealing the penalized likelihood.

    free is a sequence of parameter keys ('Fz.offset', 'Fz->Cz.weight', ...);
    bounds maps each key to (lo, hi). The cost is -loglik plus penalty_weight
    times the total out-of-range firing distance, and the columnar constants
    are re-centered on every evaluation (the shift is a function of the
    columns alone, so this also covers coupling-weight changes). An empty
    free list returns the template untouched with its likelihood.
    """
    phi = np.asarray(series, dtype=float)
    keys = list(free)
    if not keys:
        det = loglikelihood_details(net, phi)
        return FitResult(net=net, loglik=det["loglik"],
                         clamp_fraction=det["clamp_fraction"],
                         out_of_range=det["out_of_range"],
                         anneal_result=None, refine_result=None)
    try:
        box = [(float(bounds[k][0]), float(bounds[k][1])) for k in keys]
    except KeyError as exc:
        raise OutOfDomain(f"missing bounds for parameter {exc.args[0]!r}") from exc
    for k in keys:
        parse_param_key(k)

    def build(vec):
        candidate = apply_params(net, dict(zip(keys, vec)))
        return replace(candidate, columns=centering_shift(candidate.columns))

    def cost(vec):
        try:
            det = loglikelihood_details(build(vec), phi)
        except (NoSolution, SingularInversion, DegenerateVariance,
                NonPositiveDenominator):
            return np.inf
        return -det["loglik"] + penalty_weight * det["excess"]

    res = anneal.minimize(cost, box, config, trace_path=trace_path)
    refine = None
    best = res
    if refine_calls > 0:
        refine = anneal.local_refine(cost, res.x, box, max_calls=refine_calls)
        if refine.cost < best.cost:
            best = refine
    fitted = build(best.x)
    det = loglikelihood_details(fitted, phi)
    return FitResult(net=fitted, loglik=det["loglik"],
                     clamp_fraction=det["clamp_fraction"],
                     out_of_range=det["out_of_range"],
                     anneal_result=res, refine_result=refine)
