"""Constancy, exchangeability, Laplace, and variance-function analyses.

Every check returns an AnalysisReport: the evaluation grid, the per-point
values, a deviation against a reference, and a three-way verdict.  ``Constant``
means the deviation stays within tolerance relative to max(1, |reference|);
``NonConstant`` means it exceeds the failure threshold; anything in between is
``Inconclusive``.

The variance-function checks work on a VarianceFunctionSpec: either a closed
form (differentiated symbolically) or a table (quintic spline interpolant,
fourth-order central differences with one Richardson step).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
import sympy
from scipy.interpolate import make_interp_spline

from . import quadrature
from .errors import (
    DifferentiationError,
    DivergentIntegral,
    DomainError,
    NonConvergence,
)
from .families import Family, ObservationSequence, transform_family  # noqa: F401  (transform_family re-exported)
from .strategies import cnml_joint, strategy_joint


class Verdict(str, Enum):
    CONSTANT = "Constant"
    NON_CONSTANT = "NonConstant"
    INCONCLUSIVE = "Inconclusive"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, Verdict):
        return obj.value
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if hasattr(obj, "__dataclass_fields__"):
        return {k: _jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    return obj


@dataclass(frozen=True)
class AnalysisReport:
    """Outcome of a grid check.

    The verdict invariant: Constant iff max_abs_deviation is at most
    tolerance_used * max(1, |reference_value|).  For checks that compare
    against an asymptotic limit the stored deviation is the one the verdict is
    judged on (documented per check).
    """

    grid: tuple
    values: tuple
    max_abs_deviation: float
    reference_value: float
    verdict: Verdict
    tolerance_used: float
    details: dict = field(default_factory=dict)

    @staticmethod
    def _judge(deviation: float, scale: float, tolerance: float, fail_threshold: float) -> Verdict:
        if deviation <= tolerance * scale:
            return Verdict.CONSTANT
        if deviation >= fail_threshold * scale:
            return Verdict.NON_CONSTANT
        return Verdict.INCONCLUSIVE

    @classmethod
    def from_values(
        cls,
        grid: Sequence,
        values: Sequence[float],
        tolerance: float,
        fail_threshold: float,
        reference: float | None = None,
        details: dict | None = None,
    ) -> "AnalysisReport":
        values = tuple(float(v) for v in values)
        if not values:
            raise DomainError("a report needs at least one grid value")
        ref = float(reference) if reference is not None else math.fsum(values) / len(values)
        deviation = max(abs(v - ref) for v in values)
        scale = max(1.0, abs(ref))
        verdict = cls._judge(deviation, scale, tolerance, fail_threshold)
        return cls(
            grid=tuple(grid),
            values=values,
            max_abs_deviation=deviation,
            reference_value=ref,
            verdict=verdict,
            tolerance_used=float(tolerance),
            details=dict(details or {}),
        )

    def deviations(self) -> tuple[float, ...]:
        return tuple(abs(v - self.reference_value) for v in self.values)

    def to_dict(self) -> dict:
        return {
            "grid": _jsonable(self.grid),
            "values": _jsonable(self.values),
            "max_abs_deviation": self.max_abs_deviation,
            "reference_value": self.reference_value,
            "verdict": self.verdict.value,
            "tolerance_used": self.tolerance_used,
            "details": _jsonable(self.details),
        }

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)

    def to_csv(self) -> str:
        lines = ["point,value,deviation"]
        for point, value, dev in zip(self.grid, self.values, self.deviations()):
            if isinstance(point, (tuple, list, np.ndarray)):
                cell = '"' + " ".join(_fmt(p) for p in point) + '"'
            else:
                cell = _fmt(point)
            lines.append(f"{cell},{_fmt(value)},{_fmt(dev)}")
        return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> tuple[tuple, tuple, tuple]:
    """Parse to_csv output back into (grid, values, deviations)."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != "point,value,deviation":
        raise ValueError("not an AnalysisReport CSV (missing header)")
    grid, values, deviations = [], [], []
    for ln in lines[1:]:
        if ln.startswith('"'):
            closing = ln.index('"', 1)
            point = tuple(float(p) for p in ln[1:closing].split())
            rest = ln[closing + 2 :]
        else:
            cell, rest = ln.split(",", 1)
            point = float(cell)
        value_s, dev_s = rest.split(",")
        grid.append(point)
        values.append(float(value_s))
        deviations.append(float(dev_s))
    return tuple(grid), tuple(values), tuple(deviations)


# ---- concentration integrals ------------------------------------------------


def condition_integral(
    family: Family,
    mu0: float,
    n: int,
    tol_abs: float = 1e-12,
    tol_rel: float = 1e-10,
) -> float:
    """Integral of exp(-n KL(mu0 || mu)) / sigma(mu) over the mean domain."""
    if n < 1 or int(n) != n:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    mu0 = family._check_mean(mu0, interior=True)
    lo, hi = family.mean_interior()

    def integrand(mu: float) -> float:
        return math.exp(-n * family.kl_divergence(mu0, mu)) / family.sigma(mu)

    hint = mu0 if lo < mu0 < hi else None
    try:
        res = quadrature.integrate(
            quadrature.guarded(integrand), (lo, hi), tol_abs=tol_abs, tol_rel=tol_rel, peak_hint=hint
        )
    except NonConvergence as exc:
        raise DivergentIntegral(f"concentration integral for kind {family.kind}, mu0={mu0}, n={n}: {exc}") from exc
    return res.value


def check_constancy(
    family: Family,
    n: int,
    mu0_grid: Sequence[float],
    tolerance: float = 1e-4,
    fail_threshold: float = 5e-3,
) -> AnalysisReport:
    """Evaluate the concentration integral across mu0 values.

    A 0.5% max deviation from the grid mean is a 1% total spread, the
    separation the negative cases are expected to clear.
    """
    grid = tuple(float(m) for m in mu0_grid)
    if len(grid) < 1:
        raise DomainError("mu0 grid is empty")
    values = [condition_integral(family, mu0, n) for mu0 in grid]
    return AnalysisReport.from_values(grid, values, tolerance, fail_threshold, details={"n": int(n)})


def laplace_asymptotics_check(
    family: Family,
    mu0: float,
    position: str = "interior",
    n_list: Sequence[int] = (2, 5, 10, 20, 50),
    fail_threshold: float | None = None,
) -> AnalysisReport:
    """Ratios of the concentration integral to its Laplace reference.

    The reference is sqrt(2*pi/n), halved when mu0 sits on a (restricted)
    domain boundary.  The verdict judges the final ratio only, with tolerance
    5/n_last; the stored deviation is that final-n deviation.
    """
    pos = str(position).strip().lower()
    if pos not in ("interior", "boundary"):
        raise DomainError(f"position must be 'interior' or 'boundary', got {position!r}")
    boundary = pos == "boundary"
    n_list = tuple(int(n) for n in n_list)
    if not n_list or any(n < 1 for n in n_list):
        raise DomainError("n_list must hold positive integers")
    lo, hi = family.mean_interior()
    if boundary:
        if not (mu0 == lo or mu0 == hi) or not math.isfinite(mu0):
            raise DomainError(f"mu0={mu0!r} is not a finite endpoint of the mean domain ({lo}, {hi})")
    elif not lo < mu0 < hi:
        raise DomainError(f"mu0={mu0!r} is not interior to the mean domain ({lo}, {hi})")

    ratios = [condition_integral(family, mu0, n) / quadrature.laplace_reference(n, boundary) for n in n_list]
    tolerance = 5.0 / n_list[-1]
    fail = fail_threshold if fail_threshold is not None else max(0.25, 2.0 * tolerance)
    deviation = abs(ratios[-1] - 1.0)
    verdict = AnalysisReport._judge(deviation, 1.0, tolerance, fail)
    return AnalysisReport(
        grid=n_list,
        values=tuple(ratios),
        max_abs_deviation=deviation,
        reference_value=1.0,
        verdict=verdict,
        tolerance_used=tolerance,
        details={"position": pos, "mu0": float(mu0)},
    )


# ---- exchangeability ---------------------------------------------------------


def _spread(joints: Sequence) -> tuple[float, int, int]:
    hi = max(range(len(joints)), key=lambda i: joints[i])
    lo = min(range(len(joints)), key=lambda i: joints[i])
    top = joints[hi]
    if top <= 0:
        return 0.0, hi, lo
    return float((top - joints[lo]) / top), hi, lo


def exchangeability_test(
    family: Family,
    m: int,
    n: int,
    test_set: str = "random",
    *,
    count: int = 20,
    seed: int = 0,
    history: Sequence[float] | None = None,
    continuations: Sequence[Sequence[float]] | None = None,
    sample_mean: float | None = None,
    tolerance: float = 1e-6,
    fail_threshold: float = 1e-3,
) -> AnalysisReport:
    """Max relative spread of SNML joints across permutations of x_{m+1}..x_n.

    ``all-discrete`` enumerates every sequence over a finite support (grouped
    by history and continuation multiset); ``random`` draws ``count``
    continuations (and the history, unless given) at ``sample_mean``;
    explicit ``continuations`` override the test set.  The worst witness pair
    is recorded in details.
    """
    m, n = int(m), int(n)
    if not 0 <= m < n:
        raise DomainError(f"need 0 <= m < n, got m={m}, n={n}")
    free = n - m
    mode = str(test_set).strip().lower().replace("_", "-")

    cases: list[tuple[tuple[float, ...], tuple[float, ...]]] = []
    if continuations is not None:
        hist = tuple(float(v) for v in history) if history is not None else ()
        if len(hist) != m:
            raise DomainError(f"explicit continuations need a history of length m={m}")
        for cont in continuations:
            cont = tuple(float(v) for v in cont)
            if len(cont) != free:
                raise DomainError(f"continuation {cont!r} does not have length n-m={free}")
            cases.append((hist, cont))
    elif mode in ("all-discrete", "alldiscrete"):
        support = family.finite_support
        if support is None:
            raise DomainError(f"kind {family.kind} has no finite support; use the random test set")
        if len(support) ** n > 4096:
            raise DomainError(f"enumerating {len(support)}^{n} sequences is above the supported size")
        for hist in itertools.product(support, repeat=m):
            for multiset in itertools.combinations_with_replacement(support, free):
                cases.append((tuple(hist), tuple(multiset)))
    elif mode == "random":
        rng = np.random.default_rng(seed)
        mean = float(sample_mean) if sample_mean is not None else family.default_reference()
        if history is not None:
            hist = tuple(float(v) for v in history)
            if len(hist) != m:
                raise DomainError(f"history must have length m={m}")
        else:
            hist = tuple(float(v) for v in family.sample(mean, m, rng))
        for _ in range(int(count)):
            cases.append((hist, tuple(float(v) for v in family.sample(mean, free, rng))))
    else:
        raise DomainError(f"unknown test set {test_set!r}; expected 'all-discrete' or 'random'")

    grid: list[tuple[float, ...]] = []
    values: list[float] = []
    witness: dict | None = None
    worst = -1.0
    for hist, cont in cases:
        orderings = sorted(set(itertools.permutations(cont)))
        joints = [strategy_joint(family, "snml", ObservationSequence(hist + p, m)) for p in orderings]
        spread, hi_i, lo_i = _spread(joints)
        grid.append(cont)
        values.append(spread)
        if spread > worst:
            worst = spread
            witness = {
                "history": list(hist),
                "max_ordering": list(orderings[hi_i]),
                "max_joint": joints[hi_i],
                "min_ordering": list(orderings[lo_i]),
                "min_joint": joints[lo_i],
            }
    details = {"m": m, "n": n, "strategy": "snml", "witness": witness}
    return AnalysisReport.from_values(grid, values, tolerance, fail_threshold, reference=0.0, details=details)


def bayes_cnml_agreement(
    family: Family,
    m: int,
    n: int,
    sequences: Iterable[Sequence[float] | ObservationSequence],
    tolerance: float = 1e-4,
    fail_threshold: float = 1e-2,
) -> AnalysisReport:
    """Relative gap between the Jeffreys posterior-predictive joint and CNML."""
    m, n = int(m), int(n)
    seqs: list[ObservationSequence] = []
    for s in sequences:
        if not isinstance(s, ObservationSequence):
            s = ObservationSequence(tuple(float(v) for v in s), m)
        if s.m != m or s.n != n:
            raise DomainError(f"sequence {s.values!r} does not match m={m}, n={n}")
        seqs.append(s)
    if not seqs:
        raise DomainError("no sequences supplied")
    gaps, cnml_values, bayes_values = [], [], []
    for s in seqs:
        c = float(cnml_joint(family, s))
        b = float(strategy_joint(family, "bayes", s))
        cnml_values.append(c)
        bayes_values.append(b)
        gaps.append(abs(b - c) / max(abs(c), 1e-300))
    details = {"m": m, "n": n, "cnml": cnml_values, "bayes": bayes_values}
    return AnalysisReport.from_values(
        [s.values for s in seqs], gaps, tolerance, fail_threshold, reference=0.0, details=details
    )


# ---- variance functions ------------------------------------------------------


@dataclass(frozen=True)
class DerivativeBundle:
    """Divergence derivatives in the unit-Fisher chart at one mean point.

    d2..d6 are the Taylor coefficients D_k of the divergence from the point;
    they reduce to polynomials in sigma and its first four mean-derivatives.
    c is the constant of the second-order condition when the grid sweep found
    one, else None.
    """

    mu: float
    sigma: float
    sigma_derivs: tuple[float, float, float, float]
    d2: float
    d3: float
    d4: float
    d5: float
    d6: float
    c: float | None = None


def _bundle_from_profile(mu: float, profile: tuple[float, float, float, float, float]) -> DerivativeBundle:
    s, s1, s2, s3, s4 = profile
    d3 = -s1
    d4 = s1 * s1 - 2.0 * s * s2
    d5 = -(s1**3) + 2.0 * s * s1 * s2 - 3.0 * s * s * s3
    d6 = s1**4 - 4.0 * s * s1 * s1 * s2 - 3.0 * s * s * s1 * s3 + 4.0 * s * s * s2 * s2 - 4.0 * s**3 * s4
    return DerivativeBundle(
        mu=float(mu),
        sigma=s,
        sigma_derivs=(s1, s2, s3, s4),
        d2=1.0,
        d3=d3,
        d4=d4,
        d5=d5,
        d6=d6,
    )


class VarianceFunctionSpec:
    """A positive variance function V(mu) on a bounded open interval.

    ``closed`` takes a symbolic expression in ``mu`` and differentiates
    sigma = sqrt(V) analytically; ``from_table`` interpolates (mu, V) samples
    with a quintic spline and differentiates it by fourth-order central
    differences with one Richardson step, step h = 1e-3 * width.
    """

    def __init__(self, label, domain, profile_fn, kind, default_tolerance, margin=0.0):
        lo, hi = float(domain[0]), float(domain[1])
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DomainError(f"variance domain must be a bounded interval, got {domain!r}")
        self.label = label
        self.domain = (lo, hi)
        self.kind = kind
        self.default_tolerance = default_tolerance
        self._profile_fn = profile_fn
        self._margin = margin
        for mu in self.default_grid(7):
            try:
                v = self.variance_at(mu)
            except DifferentiationError as exc:
                raise DomainError(f"variance spec invalid on its domain: {exc}") from exc
            if not v > 0:
                raise DomainError(f"variance must be positive on the domain; V({mu}) = {v}")

    @classmethod
    def closed(cls, expression, domain, label: str | None = None) -> "VarianceFunctionSpec":
        mu_sym = sympy.Symbol("mu", real=True)
        expr = sympy.sympify(expression, locals={"mu": mu_sym})
        if expr.free_symbols - {mu_sym}:
            raise DomainError(f"variance expression has unknown symbols: {expr.free_symbols - {mu_sym}}")
        # sqrt(V) and its sympy relatives collapse to Abs for perfect squares,
        # whose higher derivatives are distributions.  Differentiating V
        # itself stays smooth; the sigma derivatives then follow from the
        # exact identities obtained by differentiating sigma^2 = V.
        funcs = []
        d = expr
        for _ in range(5):
            funcs.append(sympy.lambdify(mu_sym, d, modules="math"))
            d = sympy.diff(d, mu_sym)

        def profile(mu: float) -> tuple[float, float, float, float, float]:
            try:
                v, v1, v2, v3, v4 = (float(f(mu)) for f in funcs)
            except (ValueError, ZeroDivisionError, OverflowError) as exc:
                raise DifferentiationError(f"variance derivative undefined at mu={mu}: {exc}") from exc
            if not v > 0:
                raise DifferentiationError(f"variance must be positive, got V({mu}) = {v}")
            s = math.sqrt(v)
            s1 = v1 / (2.0 * s)
            s2 = (v2 - 2.0 * s1 * s1) / (2.0 * s)
            s3 = (v3 - 6.0 * s1 * s2) / (2.0 * s)
            s4 = (v4 - 6.0 * s2 * s2 - 8.0 * s1 * s3) / (2.0 * s)
            return (s, s1, s2, s3, s4)

        return cls(label or str(expr), domain, profile, "closed", default_tolerance=1e-6)

    @classmethod
    def from_table(cls, mu_values, v_values, label: str | None = None) -> "VarianceFunctionSpec":
        mu_arr = np.asarray(mu_values, dtype=float)
        v_arr = np.asarray(v_values, dtype=float)
        if mu_arr.ndim != 1 or mu_arr.shape != v_arr.shape:
            raise DomainError("mu and V tables must be equal-length vectors")
        if len(mu_arr) < 12:
            raise DomainError(f"need at least 12 table rows for stable fourth derivatives, got {len(mu_arr)}")
        if not np.all(np.diff(mu_arr) > 0):
            raise DomainError("mu table must be strictly increasing")
        if not np.all(v_arr > 0):
            raise DomainError("V table must be positive")
        spline = make_interp_spline(mu_arr, np.sqrt(v_arr), k=5)
        lo, hi = float(mu_arr[0]), float(mu_arr[-1])
        width = hi - lo
        h = 1e-3 * width

        def sigma(x: float) -> float:
            return float(spline(x))

        def profile(mu: float) -> tuple[float, float, float, float, float]:
            if mu - 3.0 * h < lo or mu + 3.0 * h > hi:
                raise DifferentiationError(
                    f"mu={mu} is within 3h={3 * h:.3g} of the table edge; the difference stencil does not fit"
                )
            return (sigma(mu),) + _difference_derivatives(sigma, mu, h)

        return cls(
            label or "tabulated",
            (lo, hi),
            profile,
            "tabulated",
            default_tolerance=1e-3,
            margin=4.0 * h,
        )

    def sigma_profile(self, mu: float) -> tuple[float, float, float, float, float]:
        lo, hi = self.domain
        if not lo <= mu <= hi:
            raise DomainError(f"mu={mu} outside the variance domain {self.domain}")
        return self._profile_fn(float(mu))

    def variance_at(self, mu: float) -> float:
        s = self.sigma_profile(mu)[0]
        return s * s

    def sigma_at(self, mu: float) -> float:
        return self.sigma_profile(mu)[0]

    def default_grid(self, count: int) -> tuple[float, ...]:
        lo, hi = self.domain
        pad = max(0.05 * (hi - lo), self._margin)
        return tuple(np.linspace(lo + pad, hi - pad, count))

    def __repr__(self) -> str:
        return f"VarianceFunctionSpec({self.label!r}, domain={self.domain}, kind={self.kind})"


def _difference_derivatives(f: Callable[[float], float], x: float, h: float) -> tuple[float, float, float, float]:
    """First four derivatives by fourth-order stencils plus one Richardson step."""

    def stencils(step: float) -> tuple[float, float, float, float]:
        fm3, fm2, fm1 = f(x - 3 * step), f(x - 2 * step), f(x - step)
        f0 = f(x)
        fp1, fp2, fp3 = f(x + step), f(x + 2 * step), f(x + 3 * step)
        d1 = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * step)
        d2 = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * step**2)
        d3 = (-fp3 + 8 * fp2 - 13 * fp1 + 13 * fm1 - 8 * fm2 + fm3) / (8 * step**3)
        d4 = (-fp3 + 12 * fp2 - 39 * fp1 + 56 * f0 - 39 * fm1 + 12 * fm2 - fm3) / (6 * step**4)
        return d1, d2, d3, d4

    coarse = stencils(h)
    fine = stencils(h / 2)
    return tuple((16.0 * fi - ci) / 15.0 for fi, ci in zip(fine, coarse))


def sigma_ode_check(
    vf: VarianceFunctionSpec,
    mu_grid: Sequence[float] | None = None,
    tolerance: float | None = None,
    fail_threshold: float = 1e-2,
) -> AnalysisReport:
    """Constancy of g(mu) = (sigma')^2 + 3 sigma sigma'' across the grid.

    When constant, the shared value is reported as c (reference_value and
    details["c"]); a DerivativeBundle per grid point sits in details.
    """
    grid = tuple(float(m) for m in (mu_grid if mu_grid is not None else vf.default_grid(9)))
    tol = tolerance if tolerance is not None else vf.default_tolerance
    profiles = [vf.sigma_profile(mu) for mu in grid]
    g_values = [p[1] * p[1] + 3.0 * p[0] * p[2] for p in profiles]
    report = AnalysisReport.from_values(grid, g_values, tol, fail_threshold)
    c = report.reference_value if report.verdict is Verdict.CONSTANT else None
    bundles = tuple(
        DerivativeBundle(
            mu=b.mu,
            sigma=b.sigma,
            sigma_derivs=b.sigma_derivs,
            d2=b.d2,
            d3=b.d3,
            d4=b.d4,
            d5=b.d5,
            d6=b.d6,
            c=c,
        )
        for b in (_bundle_from_profile(mu, p) for mu, p in zip(grid, profiles))
    )
    details = dict(report.details)
    details.update({"c": c, "bundles": bundles, "label": vf.label})
    return AnalysisReport(
        grid=report.grid,
        values=report.values,
        max_abs_deviation=report.max_abs_deviation,
        reference_value=report.reference_value,
        verdict=report.verdict,
        tolerance_used=report.tolerance_used,
        details=details,
    )


def higher_order_check(
    vf: VarianceFunctionSpec,
    mu_grid: Sequence[float] | None = None,
    tolerance: float | None = None,
    fail_threshold: float = 1e-2,
) -> AnalysisReport:
    """Constancy of the higher-order divergence combinations.

    Checks 5*D3^2 - 3*D4 (fifth order) and
    385*D3^4 + 105*D4^2 - 24*D6 - 630*D3^2*D4 + 168*D3*D5 (seventh order) on
    the grid; when the second-order check found a constant c, the seventh-order
    values are also matched against the reduced form -(64/3)*c'*(sigma')^2 +
    41*c'^2 with c' = (2/3)c.  The top-level values are the seventh-order
    combination; the verdict is Constant only when every tested combination is
    constant, judged through a shared normalized deviation.
    """
    grid = tuple(float(m) for m in (mu_grid if mu_grid is not None else vf.default_grid(9)))
    tol = tolerance if tolerance is not None else vf.default_tolerance
    ode = sigma_ode_check(vf, grid, tolerance=tol, fail_threshold=fail_threshold)
    bundles: tuple[DerivativeBundle, ...] = ode.details["bundles"]

    fifth = [5.0 * b.d3 * b.d3 - 3.0 * b.d4 for b in bundles]
    seventh = [
        385.0 * b.d3**4 + 105.0 * b.d4**2 - 24.0 * b.d6 - 630.0 * b.d3**2 * b.d4 + 168.0 * b.d3 * b.d5
        for b in bundles
    ]
    fifth_report = AnalysisReport.from_values(grid, fifth, tol, fail_threshold)
    seventh_report = AnalysisReport.from_values(grid, seventh, tol, fail_threshold)

    # one normalized deviation drives the conjunction verdict
    normalized = [
        fifth_report.max_abs_deviation / max(1.0, abs(fifth_report.reference_value)),
        seventh_report.max_abs_deviation / max(1.0, abs(seventh_report.reference_value)),
    ]
    reduced_detail = None
    if ode.verdict is Verdict.CONSTANT:
        c_unit = (2.0 / 3.0) * ode.reference_value
        reduced = [
            -(64.0 / 3.0) * c_unit * b.sigma_derivs[0] ** 2 + 41.0 * c_unit * c_unit for b in bundles
        ]
        mismatch = max(abs(s - r) for s, r in zip(seventh, reduced))
        scale = max(1.0, abs(seventh_report.reference_value))
        normalized.append(mismatch / scale)
        reduced_detail = {
            "values": reduced,
            "max_mismatch": mismatch,
            "verdict": AnalysisReport._judge(mismatch, scale, tol, fail_threshold),
        }

    scale7 = max(1.0, abs(seventh_report.reference_value))
    deviation = max(normalized) * scale7
    verdict = AnalysisReport._judge(deviation, scale7, tol, fail_threshold)
    details = {
        "label": vf.label,
        "fifth_order": {
            "values": fifth,
            "reference_value": fifth_report.reference_value,
            "verdict": fifth_report.verdict,
        },
        "seventh_order": {
            "values": seventh,
            "reference_value": seventh_report.reference_value,
            "verdict": seventh_report.verdict,
        },
        "reduced_form": reduced_detail,
        "ode_constant": ode.details["c"],
    }
    return AnalysisReport(
        grid=grid,
        values=tuple(seventh),
        max_abs_deviation=deviation,
        reference_value=seventh_report.reference_value,
        verdict=verdict,
        tolerance_used=tol,
        details=details,
    )


# ---- classification ----------------------------------------------------------


class FamilyClass(str, Enum):
    GAUSSIAN_LOCATION = "GaussianLocation"
    GAMMA_LINEAR_SIGMA = "GammaLinearSigma"
    TWEEDIE32_CLASS = "Tweedie32Class"
    NOT_EXCHANGEABLE = "NotExchangeable"


@dataclass(frozen=True)
class Classification:
    family_class: FamilyClass
    reason: str | None = None
    coefficients: dict | None = None

    def to_dict(self) -> dict:
        return {
            "family_class": self.family_class.value,
            "reason": self.reason,
            "coefficients": _jsonable(self.coefficients),
        }


_FIT_RTOL = 1e-8


def _affine_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least-squares y ~ k*x + ell; returns (k, ell, max abs residual)."""
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = np.max(np.abs(design @ coef - y))
    return float(coef[0]), float(coef[1]), float(resid)


def classify_family(vf: VarianceFunctionSpec, grid_size: int = 33) -> Classification:
    """Match the variance function against the exchangeable solution forms.

    Constant V is a location-Gaussian; sigma affine in mu with nonzero slope
    is the Gamma line; sigma^(4/3) affine with nonzero slope is the 3/2-power
    class.  Everything else is NotExchangeable, with the reason naming the
    failed check: a quadratic variance that is not a perfect square, a
    non-constant second-order combination, or a non-constant higher-order
    combination.
    """
    mu = np.asarray(vf.default_grid(grid_size), dtype=float)
    v = np.array([vf.variance_at(x) for x in mu])
    sigma = np.sqrt(v)
    v_scale = float(np.max(np.abs(v)))
    width = vf.domain[1] - vf.domain[0]

    v_mean = float(np.mean(v))
    if float(np.max(np.abs(v - v_mean))) <= _FIT_RTOL * v_scale:
        return Classification(FamilyClass.GAUSSIAN_LOCATION, coefficients={"variance": v_mean})

    k, ell, resid = _affine_fit(mu, sigma)
    sigma_scale = float(np.max(sigma))
    if resid <= _FIT_RTOL * sigma_scale and abs(k) * width > _FIT_RTOL * sigma_scale:
        coeffs = {"k": k, "ell": ell, "exponent": 2.0}
        if abs(ell) <= _FIT_RTOL * sigma_scale:
            coeffs["gamma_shape"] = 1.0 / (k * k)
        return Classification(FamilyClass.GAMMA_LINEAR_SIGMA, coefficients=coeffs)

    w = sigma ** (4.0 / 3.0)
    k, ell, resid = _affine_fit(mu, w)
    w_scale = float(np.max(w))
    if resid <= _FIT_RTOL * w_scale and abs(k) * width > _FIT_RTOL * w_scale:
        return Classification(
            FamilyClass.TWEEDIE32_CLASS, coefficients={"k": k, "ell": ell, "exponent": 1.5}
        )

    quad = np.polyfit(mu, v, 2)
    quad_resid = float(np.max(np.abs(np.polyval(quad, mu) - v)))
    if quad_resid <= _FIT_RTOL * v_scale:
        a, b, c0 = (float(q) for q in quad)
        disc = b * b - 4.0 * a * c0
        return Classification(
            FamilyClass.NOT_EXCHANGEABLE,
            reason=(
                f"variance is quadratic (a={a:.6g}, b={b:.6g}, c={c0:.6g}) with discriminant "
                f"{disc:.6g} != 0, so it is not a perfect square; quadratic-variance families "
                f"outside the square form are not exchangeable"
            ),
            coefficients={"a": a, "b": b, "c": c0, "discriminant": disc},
        )

    ode = sigma_ode_check(vf)
    if ode.verdict is not Verdict.CONSTANT:
        return Classification(
            FamilyClass.NOT_EXCHANGEABLE,
            reason="(sigma')^2 + 3*sigma*sigma'' varies across the grid (second-order condition fails)",
        )
    higher = higher_order_check(vf)
    if higher.verdict is not Verdict.CONSTANT:
        return Classification(
            FamilyClass.NOT_EXCHANGEABLE,
            reason="higher-order divergence combinations vary across the grid",
        )
    return Classification(
        FamilyClass.NOT_EXCHANGEABLE,
        reason="no affine sigma or sigma^(4/3) profile matched within tolerance",
    )
