"""Two-stage orchestration: exploratory coarse surrogate, Gaussian-mixture
importance sampling with adaptive refinement, and the single-MPP
importance-sampling baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .clustering import build_gm, kmeans, mpp_per_cluster
from .errors import BaselineError, StageFailureError, StationaryPointError
from .estimators import ReliabilityEstimate, is_estimate_from_log, mcs_estimate
from .evaluation import Evaluator, ProblemSpec
from .form import form_pf, hlrf_search, multi_start_mpps
from .learning import CandidatePool, PoolExhausted, lf1_scores, lf2_scores, min_distances, select_next
from .probability import (GaussianMixture, hypercube_density, log_std_normal_pdf,
                          sample_hypercube)
from .surrogate import SupportPointSet, fit_surrogate, update_surrogate

HIGHDIM_THRESHOLD = 10


@dataclass
class S4isConfig:
    """Tuning knobs for the two-stage run; defaults follow the reference
    settings (trailing window 5, tolerances 0.01 / 0.001)."""

    n_c1: int | None = None        # None: min(1e4, max(1e3, 10^d))
    n_s1_0: int | None = None      # None: max(12, (d+1)(d+2)/2)
    n_c2: int = 10_000
    k_clusters: int = 4
    eps1: float = 0.01
    a1: int = 5
    eps2: float = 0.001
    a2: int = 5
    max_iter1: int = 300
    max_iter2: int = 300
    cov_target: float = 0.05
    highdim_form_seed: bool | None = None  # None: auto when d >= 10
    lf_scale_mode: str = "normalized"      # "normalized" | "raw"
    composite: bool | None = None          # None: composite for systems
    strict_candidate_sizing: bool = False
    form_starts: int = 1
    gp_isotropic: bool | None = None  # None: auto when d >= 20
    gp_restarts: int = 5
    gp_warm_updates: bool = True
    pool_growth_limit: int = 10

    def __post_init__(self):
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ValueError("stopping tolerances must be positive")
        if self.a1 < 1 or self.a2 < 1:
            raise ValueError("trailing windows must cover >= 1 iteration")
        if self.lf_scale_mode not in ("normalized", "raw"):
            raise ValueError("lf_scale_mode must be 'normalized' or 'raw'")

    def candidates_stage1(self, d):
        if self.n_c1 is not None:
            return self.n_c1
        cap = 10_000
        raw = 10**d if d < 5 else cap
        if self.strict_candidate_sizing:
            return min(cap, raw)
        return min(cap, max(1_000, raw))

    def initial_support(self, d):
        if self.n_s1_0 is not None:
            return self.n_s1_0
        return max(12, (d + 1) * (d + 2) // 2)

    def wants_form_seed(self, d):
        if self.highdim_form_seed is not None:
            return self.highdim_form_seed
        return d >= HIGHDIM_THRESHOLD

    def wants_isotropic_gp(self, d):
        # Per-input lengthscales stop being identifiable once their count
        # rivals the support size; fall back to one shared lengthscale.
        if self.gp_isotropic is not None:
            return self.gp_isotropic
        return d >= 20


@dataclass
class StageReport:
    pf_history: list
    cov_history: list
    n_eval_history: list
    final: ReliabilityEstimate
    support_size: int
    termination: str
    coarse: bool = False
    initial_pf: float | None = None
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "pf_history": list(self.pf_history),
            "cov_history": [None if (c is None or math.isnan(c)) else c for c in self.cov_history],
            "n_eval_history": list(self.n_eval_history),
            "final": self.final.to_dict(),
            "support_size": self.support_size,
            "termination": self.termination,
            "coarse": self.coarse,
            "initial_pf": self.initial_pf,
            "notes": self.notes,
        }


@dataclass
class S4isResult:
    estimate: ReliabilityEstimate
    stage1: StageReport
    stage2: StageReport

    def to_dict(self):
        return {
            "estimate": self.estimate.to_dict(),
            "stage1": self.stage1.to_dict(),
            "stage2": self.stage2.to_dict(),
        }


def _feature_map(rv):
    """GP training coordinates: original-space inputs standardized by the
    marginal moments. Affine in theta, so e.g. a limit state linear in the
    physical variables stays linear; identical to u-space for normal
    marginals."""
    means = np.array([m.mean for m in rv.marginals])
    sds = np.array([m.sd for m in rv.marginals])

    def feat(thetas):
        return (np.atleast_2d(np.asarray(thetas, dtype=float)) - means) / sds

    return feat


def _scale(outputs, mode):
    if mode == "raw":
        return 1.0
    s = float(np.std(outputs))
    return s if s > 1e-12 else 1.0


def _use_composite(problem: ProblemSpec, config: S4isConfig):
    if config.composite is not None:
        return config.composite and problem.n_components > 1
    return problem.aggregation != "single"


def _maximin_indices(points, n_pick):
    """Greedy space-filling subset, seeded at the point nearest the origin."""
    n = points.shape[0]
    n_pick = min(n_pick, n)
    chosen = [int(np.argmin(np.linalg.norm(points, axis=1)))]
    dmin = np.linalg.norm(points - points[chosen[0]], axis=1)
    for _ in range(n_pick - 1):
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.linalg.norm(points - points[nxt], axis=1))
    return chosen


def _evaluate_support(evaluator, rv, us):
    thetas = np.atleast_2d(rv.from_standard_normal(us))
    comps = np.array([evaluator.components_at(t) for t in thetas])
    ys = evaluator.problem.aggregate(comps)
    return thetas, np.atleast_1d(ys), comps


def _append_support(evaluator, rv, support, u):
    theta = rv.from_standard_normal(u)
    comps = evaluator.components_at(np.asarray(theta, dtype=float))
    y = float(evaluator.problem.aggregate(comps))
    support.append(u, theta, y, comps)


def _window_converged(history, window, tol):
    if len(history) <= window:
        return False
    mean = float(np.mean(history[-window:]))
    if mean <= 0:
        return False
    return abs(history[-1] - mean) / mean <= tol


def stage1(problem: ProblemSpec, config: S4isConfig, rng, evaluator: Evaluator):
    """Exploration stage: uniform candidates on [-5, 5]^d, space-filling
    initial design, distance-aware refinement, coarse estimator.

    Returns (report, surrogate, support set, failure samples in u-space).
    """
    rv = problem.marginals
    d = problem.dim
    composite = _use_composite(problem, config)
    n_c1 = config.candidates_stage1(d)
    cands = sample_hypercube(d, n_c1, rng)
    pool = CandidatePool(cands)

    feat = _feature_map(rv)
    x_cands = feat(rv.from_standard_normal(cands))

    init_idx = _maximin_indices(cands, config.initial_support(d))
    pool.selected[init_idx] = True
    us = cands[init_idx]
    thetas, ys, comps = _evaluate_support(evaluator, rv, us)
    support = SupportPointSet(us, thetas, ys, comps)
    model = fit_surrogate(support, composite=composite, n_restarts=config.gp_restarts,
                          feature_fn=feat, isotropic=config.wants_isotropic_gp(d))

    log_pn = log_std_normal_pdf(cands)
    log_q1 = np.log(hypercube_density(cands))
    dmin = min_distances(cands, support.inputs_u)

    pf_hist, cov_hist, ne_hist = [], [], []
    termination = "max_iterations"
    means = None
    for _ in range(config.max_iter1):
        means = model.predict_mean(x_cands)
        scale = _scale(support.outputs, config.lf_scale_mode)
        scores = lf1_scores(np.abs(means), dmin, scale)
        try:
            idx = select_next(pool, scores)
        except PoolExhausted:
            termination = "pool_exhausted"
            break
        _append_support(evaluator, rv, support, cands[idx])
        model = update_surrogate(model, support, n_restarts=config.gp_restarts,
                                 warm=config.gp_warm_updates, feature_fn=feat)
        dmin = np.minimum(dmin, np.linalg.norm(cands - cands[idx], axis=1))

        means = model.predict_mean(x_cands)
        est = is_estimate_from_log(means <= 0, log_pn, log_q1)
        est.n_eval = evaluator.ledger.count
        pf_hist.append(est.pf)
        cov_hist.append(est.cov)
        ne_hist.append(evaluator.ledger.count)
        if _window_converged(pf_hist, config.a1, config.eps1):
            termination = "converged"
            break

    final = is_estimate_from_log(means <= 0, log_pn, log_q1)
    final.n_eval = evaluator.ledger.count
    final.stage_history = list(pf_hist)
    failure_u = cands[means <= 0]
    report = StageReport(pf_hist, cov_hist, ne_hist, final, len(support),
                         termination, coarse=True)
    if failure_u.shape[0] == 0:
        raise StageFailureError(
            "stage 1 classified no candidate as failed; enable the FORM-seeded "
            "exploration or enlarge the candidate pool")
    return report, model, support, failure_u


def stage2(problem: ProblemSpec, config: S4isConfig, rng, evaluator: Evaluator,
           model, support, failure_u=None, mpps=None):
    """Importance-sampling stage around the mixture of most probable points."""
    rv = problem.marginals
    notes = {}
    if mpps is None:
        assignment = kmeans(failure_u, config.k_clusters, rng)
        mpps = mpp_per_cluster(failure_u, assignment)
        if assignment.reduced:
            notes["k_reduced_to"] = int(assignment.k)
    gm = build_gm(mpps)
    notes["n_mixture_components"] = int(gm.n_components)

    feat = _feature_map(rv)
    cands = gm.sample(config.n_c2, rng)
    pool = CandidatePool(cands)
    x_cands = feat(rv.from_standard_normal(cands))
    log_pn = log_std_normal_pdf(cands)
    log_q2 = gm.logpdf(cands)

    means = model.predict_mean(x_cands)
    initial = is_estimate_from_log(means <= 0, log_pn, log_q2)
    dmin = min_distances(cands, support.inputs_u)

    pf_hist, cov_hist, ne_hist = [], [], []
    termination = "max_iterations"
    est = initial
    for _ in range(config.max_iter2):
        scale = _scale(support.outputs, config.lf_scale_mode)
        scores = lf2_scores(np.abs(means), dmin, log_pn, log_q2, scale)
        try:
            idx = select_next(pool, scores)
        except PoolExhausted:
            termination = "pool_exhausted"
            break
        _append_support(evaluator, rv, support, cands[idx])
        model = update_surrogate(model, support, n_restarts=config.gp_restarts,
                                 warm=config.gp_warm_updates, feature_fn=feat)
        dmin = np.minimum(dmin, np.linalg.norm(cands - cands[idx], axis=1))

        means = model.predict_mean(x_cands)
        est = is_estimate_from_log(means <= 0, log_pn, log_q2)
        est.n_eval = evaluator.ledger.count
        pf_hist.append(est.pf)
        cov_hist.append(est.cov)
        ne_hist.append(evaluator.ledger.count)
        if _window_converged(pf_hist, config.a2, config.eps2):
            termination = "converged"
            break

    # CoV control: enlarge the candidate pool at surrogate-only cost until
    # the estimator variance target is met or the growth cap is reached.
    grown = 0
    while (not est.cov_defined or est.cov > config.cov_target) and \
            len(pool) < config.pool_growth_limit * config.n_c2:
        extra = gm.sample(config.n_c2, rng)
        pool.extend(extra)
        log_pn = np.concatenate([log_pn, log_std_normal_pdf(extra)])
        log_q2 = np.concatenate([log_q2, gm.logpdf(extra)])
        means = np.concatenate([means, model.predict_mean(feat(rv.from_standard_normal(extra)))])
        est = is_estimate_from_log(means <= 0, log_pn, log_q2)
        est.n_eval = evaluator.ledger.count
        grown += 1
    if grown:
        notes["pool_enlargements"] = grown
        pf_hist.append(est.pf)
        cov_hist.append(est.cov)
        ne_hist.append(evaluator.ledger.count)

    est.stage_history = list(pf_hist)
    report = StageReport(pf_hist, cov_hist, ne_hist, est, len(support),
                         termination, initial_pf=initial.pf, notes=notes)
    return report, model


def _thin_trace(trace_u, trace_g, trace_components, min_sep=0.05, max_points=300):
    """Subset of trace points with pairwise separation; finite-difference
    probe points sit within the step of their iterate and would otherwise
    ill-condition the kernel matrix. Points near the limit state first."""
    order = np.argsort(np.abs(trace_g), kind="stable")
    keep = []
    for i in order:
        if len(keep) >= max_points:
            break
        if all(np.linalg.norm(trace_u[i] - trace_u[j]) >= min_sep for j in keep):
            keep.append(int(i))
    keep.sort()
    comps = trace_components[keep] if trace_components is not None else None
    return trace_u[keep], trace_g[keep], comps


def _form_seed(problem, config, rng, evaluator):
    """FORM-driven exploration for high dimension: multi-start HL-RF supplies
    both the mixture centers and the initial support set."""
    rv = problem.marginals
    # Past ~20 inputs, central-difference gradients dominate the evaluation
    # budget; forward differences halve the per-iteration cost.
    fd = "forward" if problem.dim >= 20 else "central"
    distinct, all_results = multi_start_mpps(evaluator, config.form_starts, rng,
                                             fd_scheme=fd)
    trace_u = np.vstack([r.trace_u for r in all_results])
    trace_g = np.concatenate([r.trace_g for r in all_results])
    trace_c = np.vstack([r.trace_components for r in all_results])
    # Keep every converged MPP in the training set.
    thin_u, thin_g, thin_c = _thin_trace(trace_u, trace_g, trace_c)
    thetas = np.atleast_2d(rv.from_standard_normal(thin_u))
    support = SupportPointSet(thin_u, thetas, thin_g, thin_c)
    composite = _use_composite(problem, config)
    model = fit_surrogate(support, composite=composite, n_restarts=config.gp_restarts,
                          feature_fn=_feature_map(rv),
                          isotropic=config.wants_isotropic_gp(problem.dim))
    mpps = np.array([r.u_star for r in distinct])
    beta_min = distinct[0].beta
    pf_form = form_pf(beta_min)
    final = ReliabilityEstimate(pf=pf_form, variance=0.0, cov=math.nan,
                                n_eval=evaluator.ledger.count, n_samples=0)
    report = StageReport([], [], [], final, len(support), "form_seed", coarse=True,
                         notes={"beta": beta_min, "n_mpps": len(distinct)})
    return report, model, support, mpps


def run_s4is(problem: ProblemSpec, config: S4isConfig, rng):
    """Full run: exploration (sampling-based or FORM-seeded) then the
    mixture importance-sampling refinement."""
    evaluator = Evaluator(problem)
    if config.wants_form_seed(problem.dim):
        s1_report, model, support, mpps = _form_seed(problem, config, rng, evaluator)
        s2_report, model = stage2(problem, config, rng, evaluator, model, support,
                                  mpps=mpps)
    else:
        s1_report, model, support, failure_u = stage1(problem, config, rng, evaluator)
        s2_report, model = stage2(problem, config, rng, evaluator, model, support,
                                  failure_u=failure_u)
    final = s2_report.final
    final.n_eval = evaluator.ledger.count
    return S4isResult(estimate=final, stage1=s1_report, stage2=s2_report)


def run_akis_baseline(problem: ProblemSpec, config: S4isConfig, rng):
    """Single-MPP importance-sampling baseline: HL-RF, a single shifted
    Gaussian instrumental density, and min-U refinement of an aggregated
    surrogate until the classification is certain (min U >= 2)."""
    rv = problem.marginals
    evaluator = Evaluator(problem)
    start = np.zeros(problem.dim)
    res = None
    for attempt in range(10):
        try:
            cand = hlrf_search(evaluator, start)
        except StationaryPointError:
            # Symmetric systems can have a vanishing finite-difference
            # gradient at the mean point; jitter the start and retry.
            cand = None
        if cand is not None and cand.converged:
            res = cand
            break
        start = rng.uniform(-2.0, 2.0, size=problem.dim)
    if res is None:
        distinct, _ = multi_start_mpps(evaluator, 10, rng)
        res = distinct[0]
    feat = _feature_map(rv)
    gm = GaussianMixture(res.u_star[None, :])
    cands = gm.sample(config.n_c2, rng)
    pool = CandidatePool(cands)
    x_cands = feat(rv.from_standard_normal(cands))
    log_pn = log_std_normal_pdf(cands)
    log_q = gm.logpdf(cands)

    thin_u, thin_g, thin_c = _thin_trace(res.trace_u, res.trace_g, res.trace_components)
    support = SupportPointSet(thin_u, np.atleast_2d(rv.from_standard_normal(thin_u)), thin_g, thin_c)
    doe_idx = _maximin_indices(cands - res.u_star, 12)
    pool.selected[doe_idx] = True
    for i in doe_idx:
        _append_support(evaluator, rv, support, cands[i])
    model = fit_surrogate(support, composite=False, n_restarts=config.gp_restarts,
                          feature_fn=feat)

    for _ in range(config.max_iter2):
        means, sds = model.predict(x_cands)
        with np.errstate(divide="ignore", invalid="ignore"):
            u_scores = np.where(sds > 0, np.abs(means) / sds,
                                np.where(means == 0, 0.0, np.inf))
        unselected = np.flatnonzero(~pool.selected)
        if unselected.size == 0 or float(np.min(u_scores[unselected])) >= 2.0:
            break
        idx = select_next(pool, u_scores)
        _append_support(evaluator, rv, support, cands[idx])
        model = update_surrogate(model, support, n_restarts=config.gp_restarts,
                                 warm=config.gp_warm_updates, feature_fn=feat)

    # Fixed-size IS estimate: the single shifted Gaussian cannot reach other
    # failure branches anyway, so growing the pool only adds weight variance.
    means = model.predict_mean(x_cands)
    est = is_estimate_from_log(means <= 0, log_pn, log_q)
    est.n_eval = evaluator.ledger.count
    return est


def run_mcs_baseline(problem: ProblemSpec, n: int, rng):
    """Crude Monte Carlo with n samples of the true performance function."""
    rv = problem.marginals
    u = rng.standard_normal(size=(n, problem.dim))
    evaluator = Evaluator(problem)
    g = evaluator.g_batch(rv.from_standard_normal(u))
    est = mcs_estimate(g <= 0)
    est.n_eval = evaluator.ledger.count
    return est


def run_form_baseline(problem: ProblemSpec, rng):
    """Classical first-order estimate: a single HL-RF search from the mean
    point, reporting Phi(-beta) at the final iterate whether or not the
    search converged (oscillation on multimodal limit states is part of the
    method's documented behaviour).  A vanishing gradient at the mean point
    falls back to a multi-start search."""
    evaluator = Evaluator(problem)
    try:
        res = hlrf_search(evaluator, np.zeros(problem.dim))
    except StationaryPointError:
        distinct, _ = multi_start_mpps(evaluator, 10, rng)
        res = distinct[0]
    pf = form_pf(res.beta)
    return ReliabilityEstimate(pf, 0.0, float("nan"),
                               n_eval=evaluator.ledger.count, n_samples=0)
