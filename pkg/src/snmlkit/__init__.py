"""Sequential log-loss prediction with one-parameter exponential families.

Families expose mean/natural/geodesic charts, KL divergence, and Fisher
information; strategies provide SNML, Jeffreys-posterior, CNML, and NML
predictions; analysis hosts the constancy, exchangeability, Laplace,
ODE, and classification checks behind them.
"""

from .analysis import (
    AnalysisReport,
    Classification,
    DerivativeBundle,
    FamilyClass,
    VarianceFunctionSpec,
    Verdict,
    bayes_cnml_agreement,
    check_constancy,
    classify_family,
    condition_integral,
    exchangeability_test,
    higher_order_check,
    laplace_asymptotics_check,
    parse_report_csv,
    sigma_ode_check,
)
from .errors import (
    DifferentiationError,
    DivergentIntegral,
    DivergentNormalizer,
    DomainError,
    EmptyWindow,
    HorizonTooLarge,
    ImproperPosterior,
    NanIntegrand,
    NonConvergence,
    NonMonotone,
    QuadratureError,
    SnmlkitError,
    UnsupportedPoint,
)
from .families import (
    Bernoulli,
    Chart,
    Family,
    GammaShape,
    GaussianLocation,
    Interval,
    MleEstimate,
    ObservationSequence,
    ParamValue,
    Poisson,
    TransformedFamily,
    Tweedie32,
    from_json,
    transform_family,
)
from .strategies import (
    PredictiveDistribution,
    RegretRecord,
    bayes_jeffreys_predictive,
    cnml_joint,
    conditional_regret,
    nml_joint,
    shtarkov_sum,
    snml_predictive,
    strategy_joint,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "Bernoulli",
    "Chart",
    "Classification",
    "DerivativeBundle",
    "DifferentiationError",
    "DivergentIntegral",
    "DivergentNormalizer",
    "DomainError",
    "EmptyWindow",
    "Family",
    "FamilyClass",
    "GammaShape",
    "GaussianLocation",
    "HorizonTooLarge",
    "ImproperPosterior",
    "Interval",
    "MleEstimate",
    "NanIntegrand",
    "NonConvergence",
    "NonMonotone",
    "ObservationSequence",
    "ParamValue",
    "Poisson",
    "PredictiveDistribution",
    "QuadratureError",
    "RegretRecord",
    "SnmlkitError",
    "TransformedFamily",
    "Tweedie32",
    "UnsupportedPoint",
    "VarianceFunctionSpec",
    "Verdict",
    "bayes_cnml_agreement",
    "bayes_jeffreys_predictive",
    "check_constancy",
    "classify_family",
    "cnml_joint",
    "condition_integral",
    "conditional_regret",
    "exchangeability_test",
    "from_json",
    "higher_order_check",
    "laplace_asymptotics_check",
    "nml_joint",
    "parse_report_csv",
    "shtarkov_sum",
    "sigma_ode_check",
    "snml_predictive",
    "strategy_joint",
    "transform_family",
]
