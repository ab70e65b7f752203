"""Reference experiment definitions for the built-in benchmark problems.

Each experiment binds a problem to the methods compared in the reference
study (crude MCS, FORM, the single-MPP importance-sampling baseline, and
the two-stage mixture method), together with the reported values and the
tolerance bands used by the reproduction suite.  ``run_experiment``
executes the configured replicates and emits a comparison report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConfigError, StageFailureError
from .estimators import is_estimate_from_log
from .evaluation import Evaluator, ProblemSpec, builtin_problem
from .pipeline import (S4isConfig, run_akis_baseline, run_form_baseline,
                       run_mcs_baseline, run_s4is)
from .probability import GaussianMixture, log_std_normal_pdf

_METHODS = ("mcs", "form", "akis", "s4is")


@dataclass(frozen=True)
class Band:
    """A reported reference value with the tolerance band the reproduction
    suite checks, and where the value comes from ("reported" for values
    taken from the reference tables, "computed" for locally derived ones).
    """

    quantity: str  # "pf", "eps_r" or "n_eval"
    value: float
    low: float
    high: float
    provenance: str = "reported"

    def __post_init__(self):
        if not self.low <= self.high:
            raise ConfigError(f"empty tolerance band for {self.quantity}")
        if self.provenance not in ("reported", "computed"):
            raise ConfigError(f"unknown provenance {self.provenance!r}")

    def contains(self, x):
        return self.low <= x <= self.high


@dataclass(frozen=True)
class ExperimentDef:
    example_id: str
    problem: ProblemSpec
    methods: tuple
    mcs_n: int
    replicates: int
    # method name -> tuple of Bands
    expected: dict = field(default_factory=dict)

    def __post_init__(self):
        for m in self.methods:
            if m not in _METHODS:
                raise ConfigError(f"unknown method {m!r}")


# Reported comparison values per example: {method: {quantity: value}}.
# eps_r entries are fractions, not percentages.
_REPORTED = {
    "example1": {
        "mcs": {"pf": 4.460e-3, "n_eval": 1e6},
        "form": {"pf": 1.348e-3, "eps_r": 0.698, "n_eval": 12},
        "akis": {"pf": 1.179e-3, "eps_r": 0.736, "n_eval": 71.1},
        "s4is": {"pf": 4.483e-3, "eps_r": 0.005, "n_eval": 60.6},
    },
    "example2": {
        "mcs": {"pf": 0.02857, "n_eval": 1e6},
        "form": {"pf": 0.03116, "eps_r": 0.091, "n_eval": 39},
        "akis": {"pf": 0.02863, "eps_r": 0.002, "n_eval": 91.4},
        "s4is": {"pf": 0.02830, "eps_r": 0.009, "n_eval": 53.3},
    },
    "example3": {
        "mcs": {"pf": 0.03130, "n_eval": 1e6},
        "form": {"pf": 0.1182, "eps_r": 2.776, "n_eval": 695},
        "akis": {"pf": 0.03123, "eps_r": 0.002, "n_eval": 985.9},
        "s4is": {"pf": 0.03078, "eps_r": 0.017, "n_eval": 71.4},
    },
    "example4_c3": {
        "mcs": {"pf": 3.470e-3, "n_eval": 1e6},
        "form": {"pf": 1.350e-3, "eps_r": 0.611, "n_eval": 7},
        "akis": {"pf": 1.462e-3, "eps_r": 0.579, "n_eval": 97.6},
        "s4is": {"pf": 3.531e-3, "eps_r": 0.018, "n_eval": 72.8},
    },
    "example4_c4": {
        "mcs": {"pf": 9.172e-5, "n_eval": 4e6},
        "form": {"pf": 3.167e-5, "eps_r": 0.655, "n_eval": 7},
        "akis": {"pf": 4.509e-5, "eps_r": 0.508, "n_eval": 110.3},
        "s4is": {"pf": 9.120e-5, "eps_r": 0.006, "n_eval": 83.2},
    },
    "example4_c5": {
        "mcs": {"pf": 9.485e-7, "n_eval": 4e8},
        "form": {"pf": 2.867e-7, "eps_r": 0.698, "n_eval": 7},
        "akis": {"pf": 2.277e-7, "eps_r": 0.760, "n_eval": 92.4},
        "s4is": {"pf": 9.035e-7, "eps_r": 0.047, "n_eval": 118.6},
    },
    "example5_d2": {
        "mcs": {"pf": 4.926e-3, "n_eval": 1e6},
        "form": {"pf": 3.844e-3, "eps_r": 0.220, "n_eval": 20},
        "akis": {"pf": 4.928e-3, "eps_r": 0.0004, "n_eval": 59.0},
        "s4is": {"pf": 4.921e-3, "eps_r": 0.001, "n_eval": 23.9},
    },
    "example5_d10": {
        "mcs": {"pf": 2.744e-3, "n_eval": 1e6},
        "form": {"pf": 1.003e-3, "eps_r": 0.634, "n_eval": 35},
        "akis": {"pf": 2.711e-3, "eps_r": 0.012, "n_eval": 678.2},
        "s4is": {"pf": 2.739e-3, "eps_r": 0.002, "n_eval": 48.6},
    },
    "example5_d50": {
        "mcs": {"pf": 1.934e-3, "n_eval": 1e6},
        "form": {"pf": 1.541e-4, "eps_r": 0.920, "n_eval": 155},
        "akis": {"pf": 1.903e-3, "eps_r": 0.016, "n_eval": 1845.2},
        "s4is": {"pf": 1.915e-3, "eps_r": 0.010, "n_eval": 168.6},
    },
}

# Reproduction tolerance bands (wider than the reported scatter to absorb
# implementation variance): (method, quantity) -> (low, high).
_BANDS = {
    "example1": {
        ("mcs", "pf"): (4.2e-3, 4.7e-3),
        ("s4is", "eps_r"): (0.0, 0.10),
        ("s4is", "n_eval"): (0.0, 150.0),
    },
    "example2": {
        ("form", "pf"): (0.03116 * 0.85, 0.03116 * 1.15),
        ("s4is", "eps_r"): (0.0, 0.10),
        ("s4is", "n_eval"): (0.0, 150.0),
    },
    "example3": {
        ("form", "eps_r"): (1.0, math.inf),
        ("s4is", "eps_r"): (0.0, 0.10),
        ("s4is", "n_eval"): (0.0, 200.0),
    },
    "example4_c3": {
        ("form", "pf"): (1.350e-3 * 0.9, 1.350e-3 * 1.1),
        ("s4is", "eps_r"): (0.0, 0.15),
        ("s4is", "n_eval"): (0.0, 200.0),
    },
    "example4_c4": {
        ("s4is", "eps_r"): (0.0, 0.20),
        ("s4is", "n_eval"): (0.0, 250.0),
    },
    "example4_c5": {
        ("s4is", "eps_r"): (0.0, 0.30),
        ("s4is", "n_eval"): (0.0, 300.0),
    },
    "example5_d2": {
        ("s4is", "eps_r"): (0.0, 0.10),
        ("s4is", "n_eval"): (0.0, 80.0),
    },
    "example5_d10": {
        ("s4is", "eps_r"): (0.0, 0.15),
        ("s4is", "n_eval"): (0.0, 200.0),
    },
    "example5_d50": {
        ("s4is", "eps_r"): (0.0, 0.20),
        ("s4is", "n_eval"): (0.0, 500.0),
    },
}

_PROBLEM_ARGS = {
    "example1": ("example1", {}),
    "example2": ("example2", {}),
    "example3": ("example3", {}),
    "example4_c3": ("example4", {"c": 3}),
    "example4_c4": ("example4", {"c": 4}),
    "example4_c5": ("example4", {"c": 5}),
    "example5_d2": ("example5", {"d": 2}),
    "example5_d10": ("example5", {"d": 10}),
    "example5_d50": ("example5", {"d": 50}),
}

EXAMPLE_IDS = tuple(_PROBLEM_ARGS)


def reference_table(example_id, replicates=10):
    """The comparison experiment for one example: reported values plus the
    tolerance bands the reproduction suite enforces."""
    if example_id not in _PROBLEM_ARGS:
        raise ConfigError(f"unknown example id {example_id!r}")
    name, kwargs = _PROBLEM_ARGS[example_id]
    problem = builtin_problem(name, **kwargs)
    reported = _REPORTED[example_id]
    bands = _BANDS[example_id]
    expected = {}
    for method, vals in reported.items():
        rows = []
        for quantity, value in vals.items():
            low, high = bands.get((method, quantity), (-math.inf, math.inf))
            rows.append(Band(quantity, value, low, high))
        expected[method] = tuple(rows)
    # Ground truth at desk scale: example4 c=5 replaces the 4e8-sample MCS
    # with a true-g importance-sampling oracle, so no mcs method there.
    methods = ("form", "akis", "s4is") if example_id == "example4_c5" \
        else ("mcs", "form", "akis", "s4is")
    mcs_n = int(reported["mcs"]["n_eval"]) if "mcs" in methods else 0
    return ExperimentDef(example_id, problem, methods, mcs_n, replicates, expected)


def oracle_is_reference(problem: ProblemSpec, rng, n=1_000_000, n_starts=10):
    """High-precision reference for very small failure probabilities: an
    importance-sampling estimate with the true performance function and a
    Gaussian mixture centred on the distinct MPPs (identity covariance).

    MPPs are searched per component with multi-start constrained
    optimisation (min ||u||^2 s.t. g <= 0); HL-RF is avoided here because
    it oscillates on some component geometries and a missed branch would
    bias the reference low.
    """
    d = problem.dim
    rv = problem.marginals
    centers = []
    for comp in problem.components:
        def g_u(u, comp=comp):
            return float(comp(np.atleast_2d(rv.from_standard_normal(u)))[0])

        starts = [np.zeros(d)] + [rng.uniform(-4.0, 4.0, size=d)
                                  for _ in range(n_starts - 1)]
        for s in starts:
            res = optimize.minimize(
                lambda u: float(u @ u), s, jac=lambda u: 2.0 * u,
                method="SLSQP",
                constraints=[{"type": "ineq", "fun": lambda u: -g_u(u)}],
                options={"maxiter": 200, "ftol": 1e-10})
            u_star = res.x
            if not res.success or g_u(u_star) > 1e-6:
                continue
            if all(np.linalg.norm(u_star - c) > 0.5 for c in centers):
                centers.append(u_star)
    if not centers:
        raise StageFailureError("no MPP found on any component")
    evaluator = Evaluator(problem)
    gm = GaussianMixture(np.array(centers))
    u = gm.sample(n, rng)
    g = evaluator.g_batch(problem.marginals.from_standard_normal(u))
    return is_estimate_from_log(g <= 0, log_std_normal_pdf(u), gm.logpdf(u))


@dataclass
class MethodRow:
    method: str
    mean_pf: float
    eps_r: float  # vs the report's reference pf; NaN when no reference
    mean_cov: float
    mean_n_eval: float
    replicates: int
    passed: bool | None  # None when the method has no gating bands
    error: str | None = None

    def to_dict(self):
        def clean(x):
            return None if isinstance(x, float) and math.isnan(x) else x
        return {"method": self.method, "mean_pf": clean(self.mean_pf),
                "eps_r": clean(self.eps_r), "mean_cov": clean(self.mean_cov),
                "mean_n_eval": clean(self.mean_n_eval),
                "replicates": self.replicates, "passed": self.passed,
                "error": self.error}


@dataclass
class ExperimentReport:
    example_id: str
    reference_pf: float
    reference_source: str  # "mcs" / "oracle" / "reported"
    rows: list

    @property
    def all_passed(self):
        return all(r.passed for r in self.rows if r.passed is not None)

    def to_dict(self):
        return {"example_id": self.example_id,
                "reference_pf": self.reference_pf,
                "reference_source": self.reference_source,
                "rows": [r.to_dict() for r in self.rows],
                "all_passed": self.all_passed}

    def format_table(self):
        lines = [f"{self.example_id}  (reference pf {self.reference_pf:.4e},"
                 f" {self.reference_source})",
                 f"{'method':<8}{'mean pf':>12}{'eps_r':>10}{'CoV':>8}"
                 f"{'N_eval':>10}  verdict"]
        for r in self.rows:
            if r.error is not None:
                lines.append(f"{r.method:<8}  FAILED: {r.error}")
                continue
            eps = "--" if math.isnan(r.eps_r) else f"{100 * r.eps_r:.1f}%"
            cov = "--" if math.isnan(r.mean_cov) else f"{100 * r.mean_cov:.1f}%"
            verdict = "-" if r.passed is None else ("pass" if r.passed else "FAIL")
            lines.append(f"{r.method:<8}{r.mean_pf:>12.4e}{eps:>10}{cov:>8}"
                         f"{r.mean_n_eval:>10.1f}  {verdict}")
        return "\n".join(lines)


def _run_method(method, exp, config, rng):
    if method == "mcs":
        return run_mcs_baseline(exp.problem, exp.mcs_n, rng)
    if method == "form":
        return run_form_baseline(exp.problem, rng)
    if method == "akis":
        return run_akis_baseline(exp.problem, config, rng)
    if method == "s4is":
        return run_s4is(exp.problem, config, rng).estimate
    raise ConfigError(f"unknown method {method!r}")


def run_experiment(exp: ExperimentDef, rng, config=None, reference_pf=None):
    """Run every configured method for the configured replicate count and
    compare against the tolerance bands.

    The relative-error reference is, in order of preference: an explicit
    ``reference_pf``, this run's own MCS mean, the true-g oracle (example4
    c=5), or the reported value.  A method error becomes a failed row, not
    an aborted report.
    """
    if config is None:
        config = S4isConfig()
    estimates = {}
    errors = {}
    for method in exp.methods:
        reps = exp.replicates if method in ("akis", "s4is") else 1
        try:
            estimates[method] = [_run_method(method, exp, config, rng)
                                 for _ in range(reps)]
        except Exception as e:  # deliberate: report the row as failed
            errors[method] = f"{type(e).__name__}: {e}"

    if reference_pf is not None:
        ref, source = float(reference_pf), "computed"
    elif "mcs" in estimates:
        ref = float(np.mean([e.pf for e in estimates["mcs"]]))
        source = "mcs"
    elif exp.example_id == "example4_c5":
        ref, source = oracle_is_reference(exp.problem, rng).pf, "oracle"
    else:
        ref, source = exp.problem.reference_pf, "reported"

    rows = []
    for method in exp.methods:
        if method in errors:
            rows.append(MethodRow(method, math.nan, math.nan, math.nan,
                                  math.nan, 0, False, errors[method]))
            continue
        ests = estimates[method]
        mean_pf = float(np.mean([e.pf for e in ests]))
        eps_r = abs(ref - mean_pf) / ref if ref else math.nan
        covs = [e.cov for e in ests if e.cov_defined]
        mean_cov = float(np.mean(covs)) if covs else math.nan
        mean_n_eval = float(np.mean([e.n_eval for e in ests]))
        measured = {"pf": mean_pf, "eps_r": eps_r, "n_eval": mean_n_eval}
        verdicts = [band.contains(measured[band.quantity])
                    for band in exp.expected.get(method, ())
                    if (band.low, band.high) != (-math.inf, math.inf)]
        passed = None if not verdicts else all(verdicts)
        rows.append(MethodRow(method, mean_pf, eps_r, mean_cov, mean_n_eval,
                              len(ests), passed))
    return ExperimentReport(exp.example_id, ref, source, rows)
