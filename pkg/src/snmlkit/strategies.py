"""Sequential prediction strategies under logarithmic loss.

One-step predictives for a history x_1..x_{t-1}:

* ``snml``  -- weight sup_mu p_mu(x_1..x_{t-1}, y), normalized over y: the
  last-step normalized-maximum-likelihood rule;
* ``bayes`` -- the posterior predictive under the Jeffreys prior, whose weight
  in the mean chart is 1/sigma(mu).

Fixed-horizon joints:

* ``cnml`` -- sup-likelihood of the full sequence normalized over all
  continuations of the conditioning prefix x_1..x_m;
* ``nml``  -- the unconditioned case m = 0 (finite here only for Bernoulli).

Bernoulli values on the maximal domain are exact ``fractions.Fraction``;
everything else is float, with quadrature behind the normalizers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

from . import quadrature
from .errors import (
    DivergentNormalizer,
    HorizonTooLarge,
    ImproperPosterior,
    NonConvergence,
)
from .families import Bernoulli, Family, Interval, ObservationSequence

STRATEGIES = ("snml", "bayes", "cnml", "nml")

_NORMALIZER_TOL_ABS = 1e-12
_NORMALIZER_TOL_REL = 1e-10


@dataclass(frozen=True)
class RegretRecord:
    strategy_loss: float
    best_expert_loglik: float
    regret: float
    m: int
    n: int


class PredictiveDistribution:
    """A normalized one-step law over the observation space.

    ``density(x)`` is taken with respect to the family's own base measure: a
    Lebesgue density for continuous families, a probability mass for counting
    families, and at the locations listed in ``atoms`` the point mass itself.
    ``normalizer`` is the denominator actually computed (Shtarkov integral or
    posterior-predictive normalizer).
    """

    def __init__(self, family: Family, log_weight: Callable[[float], float], log_normalizer: float, horizon: str):
        self.family = family
        self._log_weight = log_weight
        self.log_normalizer = float(log_normalizer)
        self.normalizer = math.exp(self.log_normalizer) if self.log_normalizer < 709 else math.inf
        self.horizon = horizon

    def log_density(self, x: float) -> float:
        return self._log_weight(float(x)) - self.log_normalizer

    def density(self, x: float) -> float:
        return math.exp(self.log_density(x))

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        return tuple((a, self.density(a)) for a in self.family.observation_atoms())


def _coerce_values(family: Family, values: Iterable[float]) -> tuple[float, ...]:
    if isinstance(values, ObservationSequence):
        values = values.values
    out = tuple(float(v) for v in values)
    for v in out:
        family._check_observation(v)
    return out


def _coerce_sequence(family: Family, seq: ObservationSequence) -> ObservationSequence:
    if not isinstance(seq, ObservationSequence):
        raise TypeError("expected an ObservationSequence (values plus conditioning length m)")
    _coerce_values(family, seq.values)
    return seq


def _strategy_name(strategy: str) -> str:
    name = str(strategy).lower()
    if name not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    return name


def _is_exact_bernoulli(family: Family) -> bool:
    return type(family) is Bernoulli and family.mean_domain == Interval(0.0, 1.0, True, True)


def _bernoulli_sup_fraction(values: Sequence[float]) -> Fraction:
    """sup_mu of the Bernoulli likelihood as an exact rational, 0^0 = 1."""
    n = len(values)
    if n == 0:
        return Fraction(1)
    s = sum(1 for v in values if v == 1.0)
    out = Fraction(1)
    if s:
        out *= Fraction(s, n) ** s
    if n - s:
        out *= Fraction(n - s, n) ** (n - s)
    return out


def _sum_discrete(family: Family, term: Callable[[float], float]) -> float:
    if family.finite_support is not None:
        return math.fsum(term(v) for v in family.finite_support)
    return quadrature.sum_counting(lambda k: term(float(k)))


@lru_cache(maxsize=8192)
def _snml_log_normalizer(family: Family, history: tuple[float, ...]) -> float:
    """log integral (or sum) over y of sup_mu p_mu(history, y)."""
    base = family.sup_log_likelihood(history)

    def rel(y: float) -> float:
        return math.exp(family.sup_log_likelihood(history + (y,)) - base)

    if family.is_discrete:
        total = _sum_discrete(family, rel)
    else:
        core = family.convex_core()
        hint = family.observation_hint(history)
        try:
            res = quadrature.integrate(
                quadrature.guarded(rel),
                core.bounds(),
                tol_abs=_NORMALIZER_TOL_ABS,
                tol_rel=_NORMALIZER_TOL_REL,
                peak_hint=hint,
            )
        except NonConvergence as exc:
            raise DivergentNormalizer(f"snml normalizer for history {history!r}: {exc}") from exc
        total = res.value + math.fsum(rel(a) for a in family.observation_atoms())
    if not total > 0 or math.isinf(total):
        raise DivergentNormalizer(f"snml normalizer for history {history!r} evaluated to {total!r}")
    return math.log(total) + base


def snml_predictive(family: Family, history: Iterable[float] = ()) -> PredictiveDistribution:
    """Last-step NML predictive given the history."""
    hist = _coerce_values(family, history)
    if len(hist) < family.min_conditioning:
        raise DivergentNormalizer(
            f"kind {family.kind} needs at least m={family.min_conditioning} conditioning "
            f"observations; got {len(hist)} (the maximum-likelihood envelope is not normalizable)"
        )
    log_norm = _snml_log_normalizer(family, hist)

    def log_weight(y: float) -> float:
        return family.sup_log_likelihood(hist + (float(y),))

    return PredictiveDistribution(family, log_weight, log_norm, horizon="one-step")


def _posterior_anchor(family: Family, hist: tuple[float, ...]) -> float:
    lo, hi = family.mean_interior()
    try:
        est = family.mle_mean(hist).value if hist else family.default_reference()
    except Exception:
        est = family.default_reference()
    if math.isfinite(lo) and math.isfinite(hi):
        pad = 1e-6 * (hi - lo)
        return min(max(est, lo + pad), hi - pad)
    if math.isfinite(lo) and est <= lo:
        return lo + 1e-6 * max(1.0, abs(lo))
    if math.isfinite(hi) and est >= hi:
        return hi - 1e-6 * max(1.0, abs(hi))
    return est


def _geodesic_window(family: Family, reference: float) -> tuple[float, float]:
    """Image of the mean domain under the unit-Fisher chart based at reference."""
    lo, hi = family.mean_interior()
    try:
        beta_lo = family.geodesic_from_mean(lo, reference)
    except (ValueError, OverflowError):
        beta_lo = -math.inf
    try:
        beta_hi = family.geodesic_from_mean(hi, reference)
    except (ValueError, OverflowError):
        beta_hi = math.inf
    if math.isnan(beta_lo):
        beta_lo = -math.inf
    if math.isnan(beta_hi):
        beta_hi = math.inf
    return beta_lo, beta_hi


@lru_cache(maxsize=4096)
def _jeffreys_posterior(family: Family, hist: tuple[float, ...]) -> tuple[float, float, float]:
    """Return (anchor mean, log scale, log posterior normalizer).

    The Jeffreys weight 1/sigma(mu) d mu is arc length in the unit-Fisher
    chart, so the normalizer is integrated there: no weight factor, no
    endpoint singularity from sigma -> 0.
    """
    anchor = _posterior_anchor(family, hist)

    def log_post_mean(mu: float) -> float:
        return math.fsum(family.log_density_mean(mu, x) for x in hist)

    scale = log_post_mean(anchor)

    def integrand(beta: float) -> float:
        mu = family.mean_from_geodesic(beta, anchor)
        return math.exp(log_post_mean(mu) - scale)

    window = _geodesic_window(family, anchor)
    try:
        res = quadrature.integrate(
            quadrature.guarded(integrand),
            window,
            tol_abs=1e-13,
            tol_rel=1e-11,
            peak_hint=0.0,
        )
    except NonConvergence as exc:
        raise ImproperPosterior(f"Jeffreys posterior does not normalize for history {hist!r}: {exc}") from exc
    if not res.value > 0 or math.isinf(res.value):
        raise ImproperPosterior(f"Jeffreys posterior normalizer evaluated to {res.value!r}")
    return anchor, scale, math.log(res.value) + scale


def bayes_jeffreys_predictive(family: Family, history: Iterable[float] = ()) -> PredictiveDistribution:
    """Jeffreys-prior posterior predictive given the history."""
    hist = _coerce_values(family, history)
    if len(hist) < family.min_conditioning:
        raise ImproperPosterior(
            f"kind {family.kind} needs at least m={family.min_conditioning} conditioning "
            f"observations for a proper Jeffreys posterior; got {len(hist)}"
        )
    anchor, scale, log_norm = _jeffreys_posterior(family, hist)

    window = _geodesic_window(family, anchor)

    def log_weight(y: float) -> float:
        y = float(y)
        family._check_observation(y)

        def integrand(beta: float) -> float:
            mu = family.mean_from_geodesic(beta, anchor)
            ll = math.fsum(family.log_density_mean(mu, x) for x in hist)
            ll += family.log_density_mean(mu, y)
            return math.exp(ll - scale)

        res = quadrature.integrate(
            quadrature.guarded(integrand),
            window,
            tol_abs=1e-13,
            tol_rel=1e-11,
            peak_hint=0.0,
        )
        if res.value <= 0.0:
            return -math.inf
        return math.log(res.value) + scale

    return PredictiveDistribution(family, log_weight, log_norm, horizon="posterior-predictive")


def _bernoulli_cnml_fraction(seq: ObservationSequence) -> Fraction:
    free = seq.n - seq.m
    numerator = _bernoulli_sup_fraction(seq.values)
    denominator = Fraction(0)
    for bits in itertools.product((0.0, 1.0), repeat=free):
        denominator += _bernoulli_sup_fraction(seq.history + bits)
    return numerator / denominator


def cnml_joint(family: Family, seq: ObservationSequence, horizon: int | None = None) -> float | Fraction:
    """Conditional NML joint of x_{m+1}..x_n given x_1..x_m.

    For continuous observations this is a joint density; the free horizon
    n - m is capped (nested quadrature) at 4, and at 12 for discrete families.
    """
    seq = _coerce_sequence(family, seq)
    if horizon is not None and int(horizon) != seq.n:
        raise ValueError(f"horizon {horizon} does not match the sequence length {seq.n}")
    free = seq.n - seq.m
    if free == 0:
        return 1.0
    cap = 12 if family.is_discrete else 4
    if free > cap:
        raise HorizonTooLarge(f"free horizon n-m={free} exceeds the supported cap {cap} for kind {family.kind}")
    if _is_exact_bernoulli(family):
        return _bernoulli_cnml_fraction(seq)

    base = family.sup_log_likelihood(seq.values)
    if base == -math.inf:
        return 0.0

    def shtarkov_rel(prefix: tuple[float, ...], depth: int) -> float:
        if depth == 0:
            return math.exp(family.sup_log_likelihood(prefix) - base)
        term = lambda y: shtarkov_rel(prefix + (float(y),), depth - 1)
        if family.is_discrete:
            return _sum_discrete(family, term)
        core = family.convex_core()
        hint = family.observation_hint(prefix)
        # outer layers may be looser; the innermost pass carries the precision
        tol_rel = _NORMALIZER_TOL_REL * 30.0 ** (depth - 1)
        res = quadrature.integrate(
            quadrature.guarded(term),
            core.bounds(),
            tol_abs=_NORMALIZER_TOL_ABS,
            tol_rel=tol_rel,
            peak_hint=hint,
        )
        return res.value + math.fsum(term(a) for a in family.observation_atoms())

    denominator = shtarkov_rel(seq.history, free)
    if not denominator > 0 or math.isinf(denominator):
        raise DivergentNormalizer(f"conditional Shtarkov normalizer evaluated to {denominator!r}")
    return 1.0 / denominator


def nml_joint(family: Family, seq: ObservationSequence, horizon: int | None = None) -> float | Fraction:
    """Unconditioned NML joint; requires a finite Shtarkov normalizer."""
    seq = _coerce_sequence(family, seq)
    if seq.m != 0:
        raise ValueError("nml conditions on nothing; use cnml_joint when m > 0")
    if family.shtarkov_divergent_tails is not None:
        raise DivergentNormalizer(
            f"the maximum-likelihood envelope of kind {family.kind} has a divergent "
            f"integral on the {family.shtarkov_divergent_tails} tail(s); no NML distribution exists"
        )
    return cnml_joint(family, seq, horizon)


def shtarkov_sum(family: Family, n: int) -> Fraction:
    """Exact Shtarkov sum over {0,1}^n (Bernoulli on the maximal domain)."""
    if not _is_exact_bernoulli(family):
        raise DivergentNormalizer("exact Shtarkov sums are available for the maximal Bernoulli family only")
    if n < 1:
        raise ValueError("n must be >= 1")
    total = Fraction(0)
    for s in range(n + 1):
        total += math.comb(n, s) * _bernoulli_sup_fraction((1.0,) * s + (0.0,) * (n - s))
    return total


def _bernoulli_snml_joint_fraction(seq: ObservationSequence) -> Fraction:
    total = Fraction(1)
    for t in range(seq.m, seq.n):
        hist = seq.values[:t]
        numerator = _bernoulli_sup_fraction(hist + (seq.values[t],))
        denominator = _bernoulli_sup_fraction(hist + (0.0,)) + _bernoulli_sup_fraction(hist + (1.0,))
        total *= numerator / denominator
    return total


def strategy_joint(family: Family, strategy: str, seq: ObservationSequence) -> float | Fraction:
    """Joint strategy value of the continuation x_{m+1}..x_n given x_1..x_m."""
    name = _strategy_name(strategy)
    seq = _coerce_sequence(family, seq)
    if name == "cnml":
        return cnml_joint(family, seq)
    if name == "nml":
        return nml_joint(family, seq)
    if name == "snml" and _is_exact_bernoulli(family):
        return _bernoulli_snml_joint_fraction(seq)
    predictive = snml_predictive if name == "snml" else bayes_jeffreys_predictive
    log_total = 0.0
    for t in range(seq.m, seq.n):
        log_total += predictive(family, seq.values[:t]).log_density(seq.values[t])
    return math.exp(log_total)


def conditional_regret(family: Family, strategy: str, seq: ObservationSequence) -> RegretRecord:
    """Excess log loss of the strategy over the best single family member."""
    name = _strategy_name(strategy)
    seq = _coerce_sequence(family, seq)
    joint = strategy_joint(family, name, seq)
    strategy_loss = -math.log(joint)
    best = family.sup_log_likelihood(seq.values)
    return RegretRecord(
        strategy_loss=strategy_loss,
        best_expert_loglik=best,
        regret=strategy_loss + best,
        m=seq.m,
        n=seq.n,
    )
