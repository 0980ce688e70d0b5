"""Portfolio aggregation, tail-risk measures, and position optimization.

A portfolio return is either a linear blend dM = sum_j (a_j dx_j + b_j) or the
contract form dM = (K_t - K_t')/K_t' where K is cash plus summed position
values sgn(NC) NC (p - p_entry), next-epoch prices are forecast as
p (1 + dx), and position changes pay slippage -s |delta NC|.

The sampled dM distribution is summarized by the same two-tailed exponential
shape used for channel marginals (mean m_M, width X from the raw second
moment), plus a fixed-width histogram over [m_M - 12X, m_M + 12X] for
diagnostics. The analytic tail probability of losses beyond a value-at-risk
level is Q = 1/2 exp(-| -|VaR| - m_M |/X); the empirical counterpart counts
samples below -|VaR|. Expected tail loss is the mean of that empirical tail
and is reported as absent (None) when the tail holds no samples.

Position optimization anneals the free position vector against
objective + penalty * |q_empirical - q_target| on a fixed event batch (common
random numbers), flagging the result infeasible when the best point misses
the tail-probability tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import anneal
from .errors import (DegenerateData, DimensionMismatch, OutOfDomain, ZeroCapital)
from .marginals import EPS_VAR, ExponentialMarginal

PENALTY_WEIGHT = 1e3
Q_TARGET = 0.01
Q_TOLERANCE = 0.002
VAR_LEVEL = 0.05
BIN_COUNT = 201
BIN_HALF_WIDTH = 12.0


def _dx_of(events):
    dx = getattr(events, "dx", events)
    dx = np.asarray(dx, dtype=float)
    if dx.ndim != 2:
        raise DimensionMismatch("events must be a 2-D (n, channels) array")
    return dx


@dataclass(frozen=True)
class LinearPortfolio:
    """dM = dx . weights + sum(offsets)."""

    weights: tuple[float, ...]
    offsets: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != len(self.offsets):
            raise DimensionMismatch("weights and offsets must have equal length")


def portfolio_returns(events, portfolio: LinearPortfolio) -> np.ndarray:
    dx = _dx_of(events)
    w = np.asarray(portfolio.weights, dtype=float)
    b = np.asarray(portfolio.offsets, dtype=float)
    if dx.shape[1] != w.size:
        raise DimensionMismatch("portfolio dimension must match event channels")
    return dx @ w + b.sum()


@dataclass(frozen=True)
class ContractPortfolio:
    """Contract-count portfolio state for one forecast step.

    counts are the next-epoch positions being valued; prev_counts the current
    ones (they only matter through slippage on the change). entry_prices are
    the fill prices the open positions carry.
    """

    counts: tuple[float, ...]
    prices: tuple[float, ...]
    entry_prices: tuple[float, ...]
    cash: float
    prev_counts: tuple[float, ...] | None = None
    slippage: float = 0.0

    def __post_init__(self):
        n = len(self.counts)
        if len(self.prices) != n or len(self.entry_prices) != n:
            raise DimensionMismatch("contract arrays must share one length")
        if self.prev_counts is not None and len(self.prev_counts) != n:
            raise DimensionMismatch("prev_counts length must match counts")

    def value_now(self) -> float:
        nc = np.asarray(self.counts, dtype=float)
        p = np.asarray(self.prices, dtype=float)
        pe = np.asarray(self.entry_prices, dtype=float)
        return float(self.cash + np.sum(np.sign(nc) * nc * (p - pe)))


def returns_from_contracts(events, portfolio: ContractPortfolio) -> np.ndarray:
    """dM = (K_t - K_t')/K_t' with forecast prices p (1 + dx)."""
    dx = _dx_of(events)
    nc = np.asarray(portfolio.counts, dtype=float)
    if dx.shape[1] != nc.size:
        raise DimensionMismatch("contract dimension must match event channels")
    prev = np.asarray(portfolio.prev_counts if portfolio.prev_counts is not None
                      else portfolio.counts, dtype=float)
    p = np.asarray(portfolio.prices, dtype=float)
    pe = np.asarray(portfolio.entry_prices, dtype=float)

    k_prev = portfolio.cash + float(np.sum(np.sign(prev) * prev * (p - pe)))
    if k_prev == 0.0:
        raise ZeroCapital("portfolio value at the anchor epoch is zero")
    p_next = p * (1.0 + dx)
    exposure = (np.sign(nc) * nc) * (p_next - pe)
    slip = -portfolio.slippage * float(np.sum(np.abs(nc - prev)))
    k_next = portfolio.cash + exposure.sum(axis=1) + slip
    return (k_next - k_prev) / k_prev


@dataclass(frozen=True, eq=False)
class PortfolioDistribution:
    """Shape fit plus diagnostic histogram of sampled portfolio returns."""

    mean: float                   # m_M
    width: float                  # X
    count: int
    bin_edges: np.ndarray
    bin_counts: np.ndarray
    samples_sorted: np.ndarray
    width_minus: float | None = None
    width_plus: float | None = None

    @property
    def shape(self) -> ExponentialMarginal:
        return ExponentialMarginal(m=self.mean, chi=self.width,
                                   chi_minus=self.width_minus,
                                   chi_plus=self.width_plus)


def fit_bins(samples, bin_count: int = BIN_COUNT, asymmetric: bool = False,
             eps_var: float = EPS_VAR) -> PortfolioDistribution:
    """Moment fit of the return shape; histogram spans mean +- 12 widths.

    Samples beyond the span are clipped into the end bins so counts always sum
    to the sample count. Moments come from the raw samples, never the bins.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise DegenerateData("need at least two samples")
    mean = float(np.mean(x))
    var = float(np.mean((x - mean) ** 2))
    if var < eps_var:
        raise DegenerateData(f"return variance {var:.3e} below floor")
    width = float(np.sqrt(var / 2.0))
    w_minus = w_plus = None
    if asymmetric:
        below = x[x < mean] - mean
        above = x[x > mean] - mean
        if below.size and above.size:
            w_minus = float(np.sqrt(np.mean(below ** 2) / 2.0))
            w_plus = float(np.sqrt(np.mean(above ** 2) / 2.0))
    if int(bin_count) < 1:
        raise OutOfDomain("bin_count must be >= 1")
    span = BIN_HALF_WIDTH * width
    edges = np.linspace(mean - span, mean + span, int(bin_count) + 1)
    clipped = np.clip(x, edges[0], edges[-1])
    counts, _ = np.histogram(clipped, bins=edges)
    return PortfolioDistribution(mean=mean, width=width, count=x.size,
                                 bin_edges=edges, bin_counts=counts,
                                 samples_sorted=np.sort(x),
                                 width_minus=w_minus, width_plus=w_plus)


def q_analytic(width: float, mean: float, var_level: float) -> float:
    """Tail mass of the fitted shape at the loss threshold -|VaR|."""
    if not (width > 0.0):
        raise OutOfDomain("width must be positive")
    return 0.5 * float(np.exp(-abs(-abs(var_level) - mean) / width))


def implied_width(var_level: float, q_target: float, mean: float = 0.0) -> float:
    """Width X that makes q_analytic equal q_target; inverse of the above."""
    if not (0.0 < q_target < 0.5):
        raise OutOfDomain("q_target must lie in (0, 0.5)")
    gap = abs(-abs(var_level) - mean)
    if gap <= 0.0:
        raise OutOfDomain("threshold coincides with the mean")
    return gap / float(np.log(0.5 / q_target))


def q_empirical(samples, var_level: float) -> float:
    """Fraction of sampled returns below -|VaR|."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise DegenerateData("no samples")
    return float(np.count_nonzero(x < -abs(var_level))) / x.size


def expected_tail_loss(samples, var_level: float) -> float | None:
    """Mean of returns below -|VaR|; None when that tail is empty."""
    x = np.asarray(samples, dtype=float).ravel()
    tail = x[x < -abs(var_level)]
    if tail.size == 0:
        return None
    return float(np.mean(tail))


def cost_q(q: float, q_target: float = Q_TARGET) -> float:
    return abs(q - q_target)


@dataclass(frozen=True)
class RiskConfig:
    var_level: float = VAR_LEVEL
    q_target: float = Q_TARGET
    q_tolerance: float = Q_TOLERANCE
    penalty_weight: float = PENALTY_WEIGHT


@dataclass(frozen=True)
class RiskReport:
    mean: float
    width: float
    q_analytic: float
    q_empirical: float
    expected_tail_loss: float | None
    var_level: float
    q_target: float
    n: int


def risk_report(samples, config: RiskConfig = RiskConfig(),
                bin_count: int = BIN_COUNT):
    """Fit the return shape and assemble the standard tail-risk summary."""
    dist = fit_bins(samples, bin_count=bin_count)
    x = dist.samples_sorted
    return RiskReport(
        mean=dist.mean, width=dist.width,
        q_analytic=q_analytic(dist.width, dist.mean, config.var_level),
        q_empirical=q_empirical(x, config.var_level),
        expected_tail_loss=expected_tail_loss(x, config.var_level),
        var_level=config.var_level, q_target=config.q_target, n=dist.count,
    ), dist


def bhattacharyya_overlap(mean_a: float, width_a: float,
                          mean_b: float, width_b: float) -> float:
    """Closed-form Bhattacharyya coefficient of two two-tailed exponentials.

    1 for identical shapes, decaying toward 0 as locations separate or widths
    diverge.
    """
    if not (width_a > 0.0 and width_b > 0.0):
        raise OutOfDomain("widths must be positive")
    m1, x1, m2, x2 = ((mean_a, width_a, mean_b, width_b)
                      if mean_a <= mean_b else (mean_b, width_b, mean_a, width_a))
    alpha = 0.5 / x1
    beta = 0.5 / x2
    gap = m2 - m1
    outer = (np.exp(-alpha * gap) + np.exp(-beta * gap)) / (alpha + beta)
    h = (beta - alpha) * gap
    if abs(h) < 1e-12:
        middle = gap * np.exp(-alpha * gap)
    else:
        middle = np.exp(-alpha * gap) * -np.expm1(-h) / (beta - alpha)
    return float((outer + middle) / (2.0 * np.sqrt(x1 * x2)))


@dataclass(frozen=True)
class PositionOptimization:
    portfolio: LinearPortfolio | ContractPortfolio
    objective_value: float
    q: float
    cost_q: float
    feasible: bool
    result: anneal.OptResult


def optimize_positions(events, template, bounds, risk: RiskConfig = RiskConfig(),
                       config: anneal.AnnealConfig | None = None,
                       objective=None, refine_calls: int = 1000,
                       trace_path=None) -> PositionOptimization:
    """Anneal free positions on a fixed event batch under the tail constraint.

    template is a LinearPortfolio (weights free) or ContractPortfolio (counts
    free); bounds follow the free vector. objective maps the dM samples to the
    value being minimized (default: negative mean return). The reported point
    is feasible when |q_empirical - q_target| < the configured tolerance.
    """
    dx = _dx_of(events)
    if objective is None:
        objective = lambda dm: -float(np.mean(dm))

    if isinstance(template, LinearPortfolio):
        def build(vec):
            return replace(template, weights=tuple(vec))

        def returns(vec):
            return dx @ vec + float(np.sum(template.offsets))
    elif isinstance(template, ContractPortfolio):
        def build(vec):
            return replace(template, counts=tuple(vec))

        def returns(vec):
            return returns_from_contracts(dx, replace(template, counts=tuple(vec)))
    else:
        raise OutOfDomain("template must be a LinearPortfolio or ContractPortfolio")

    def cost(vec):
        dm = returns(vec)
        q = q_empirical(dm, risk.var_level)
        return objective(dm) + risk.penalty_weight * cost_q(q, risk.q_target)

    res = anneal.minimize(cost, bounds, config, trace_path=trace_path)
    if refine_calls > 0:
        res_ref = anneal.local_refine(cost, res.x, bounds, max_calls=refine_calls)
        if res_ref.cost < res.cost:
            res = anneal.OptResult(x=res_ref.x, cost=res_ref.cost,
                                   trials=res.trials + res_ref.trials,
                                   acceptances=res.acceptances,
                                   exit_reason=res_ref.exit_reason,
                                   window_best=res.window_best)

    dm = returns(res.x)
    q = q_empirical(dm, risk.var_level)
    cq = cost_q(q, risk.q_target)
    return PositionOptimization(
        portfolio=build(res.x), objective_value=objective(dm), q=q, cost_q=cq,
        feasible=bool(cq < risk.q_tolerance), result=res)
