"""Performance functions: built-in benchmark problems, call counting and an
external-process evaluator for user-supplied models.

A performance function g(theta) defines failure as g <= 0. Built-in component
functions are vectorized over rows of theta; the external evaluator handles
one point per request over a newline-delimited JSON stdio protocol.
"""

from __future__ import annotations

import json
import math
import subprocess
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError, ProtocolError
from .probability import Marginal, RandomVector

AGGREGATIONS = ("single", "series_min", "parallel_max")


@dataclass(frozen=True)
class ProblemSpec:
    """A reliability problem: marginals plus one or more component functions.

    ``components`` maps a (n, d) array of original-space points to a (n,)
    array per component. ``reference_pf`` carries a known failure probability
    and its provenance, when available.
    """

    name: str
    marginals: RandomVector
    components: tuple
    aggregation: str = "single"
    reference_pf: float | None = None
    reference_source: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if self.aggregation == "single" and len(self.components) != 1:
            raise ConfigError("single aggregation takes exactly one component")
        if self.aggregation != "single" and len(self.components) < 2:
            raise ConfigError("series/parallel systems need >= 2 components")

    @property
    def dim(self):
        return self.marginals.dim

    @property
    def n_components(self):
        return len(self.components)

    def aggregate(self, component_values):
        """Combine per-component values into the system g."""
        vals = np.asarray(component_values, dtype=float)
        if self.aggregation == "series_min":
            return np.min(vals, axis=-1)
        if self.aggregation == "parallel_max":
            return np.max(vals, axis=-1)
        return vals[..., 0]


@dataclass
class EvaluationLedger:
    """Counts distinct performance-function calls; cached repeats are free."""

    count: int = 0
    cache: dict = field(default_factory=dict)

    @staticmethod
    def _key(theta):
        return np.asarray(theta, dtype=float).tobytes()


class Evaluator:
    """Binds a problem to a per-run ledger.

    ``g`` returns the aggregated value for one point; ``components_at``
    additionally exposes the per-component values for series systems.
    """

    def __init__(self, problem: ProblemSpec, ledger: EvaluationLedger | None = None):
        self.problem = problem
        self.ledger = ledger if ledger is not None else EvaluationLedger()

    def components_at(self, theta):
        theta = np.asarray(theta, dtype=float)
        key = EvaluationLedger._key(theta)
        hit = self.ledger.cache.get(key)
        if hit is not None:
            return hit
        row = theta[None, :]
        vals = np.array([float(np.asarray(c(row))[0]) for c in self.problem.components])
        if not np.all(np.isfinite(vals)):
            raise EvaluationError(f"non-finite performance value at theta={theta.tolist()}")
        self.ledger.count += 1
        self.ledger.cache[key] = vals
        return vals

    def g(self, theta):
        return float(self.problem.aggregate(self.components_at(theta)))

    def g_batch(self, thetas, cache=False):
        """Vectorized evaluation for cheap analytic g (MCS references).

        Increments the ledger count per point but skips the point cache
        unless asked, to keep million-sample runs light.
        """
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        if cache:
            return np.array([self.g(t) for t in thetas])
        per_comp = np.stack([np.asarray(c(thetas), dtype=float) for c in self.problem.components], axis=-1)
        if not np.all(np.isfinite(per_comp)):
            raise EvaluationError("non-finite performance value in batch")
        self.ledger.count += thetas.shape[0]
        return self.problem.aggregate(per_comp)


def _std_normals(d):
    return RandomVector(tuple(Marginal("normal", 0.0, 1.0) for _ in range(d)))


def _example1_components():
    r2 = math.sqrt(2.0)

    def c1(t):
        return 3 + 0.1 * (t[:, 0] - t[:, 1]) ** 2 - r2 * (t[:, 0] + t[:, 1]) / 2

    def c2(t):
        return 3 + 0.1 * (t[:, 0] - t[:, 1]) ** 2 + r2 * (t[:, 0] + t[:, 1]) / 2

    def c3(t):
        return (t[:, 0] - t[:, 1]) + 3 * r2

    def c4(t):
        return -(t[:, 0] - t[:, 1]) + 3 * r2

    return (c1, c2, c3, c4)


def _example2_component(t):
    c1, c2, m, r, t1, f1 = (t[:, i] for i in range(6))
    w0 = np.sqrt((c1 + c2) / m)
    return 3 * r - np.abs(2 * f1 / (m * w0**2) * np.sin(w0 * t1 / 2))


def _example3_component(t):
    t1, t2 = t[:, 0], t[:, 1]
    return -((t1**2 + 4) * (t2 - 1)) / 20 + np.sin(2.5 * t1) + 2


def _example4_components(c):
    def c1(t):
        return c - 1 - t[:, 1] + np.exp(-t[:, 0] ** 2 / 10) + (t[:, 0] / 5) ** 4

    def c2(t):
        return c**2 / 2 - t[:, 0] * t[:, 1]

    return (c1, c2)


def _example5_component(d):
    # Threshold three sigma-of-the-sum above the mean of the sum; with the
    # benchmark's lognormal(mean 1, sd 0.2) marginals this reproduces the
    # reported reference probabilities at every dimension.
    threshold = d + 3 * 0.2 * math.sqrt(d)

    def comp(t):
        return threshold - np.sum(t, axis=-1)

    return comp


# Reported reference failure probabilities (large-sample MCS) keyed by
# problem variant.
_REFERENCE_PF = {
    "example1": 4.460e-3,
    "example2": 0.02857,
    "example3": 0.03130,
    ("example4", 3): 3.470e-3,
    ("example4", 4): 9.172e-5,
    ("example4", 5): 9.485e-7,
    ("example5", 2): 4.926e-3,
    ("example5", 10): 2.744e-3,
    ("example5", 50): 1.934e-3,
}


def builtin_problem(name, c=None, d=None):
    """Construct one of the five built-in benchmark problems.

    example4 takes the reliability-level constant ``c`` in {3, 4, 5};
    example5 takes the dimension ``d`` >= 1.
    """
    if name == "example1":
        return ProblemSpec("example1", _std_normals(2), _example1_components(),
                           "series_min", _REFERENCE_PF["example1"], "reported")
    if name == "example2":
        marginals = RandomVector((
            Marginal("normal", 1.0, 0.1),
            Marginal("normal", 0.1, 0.01),
            Marginal("normal", 1.0, 0.05),
            Marginal("normal", 0.5, 0.05),
            Marginal("normal", 1.0, 0.2),
            Marginal("normal", 1.0, 0.2),
        ))
        return ProblemSpec("example2", marginals, (_example2_component,),
                           "single", _REFERENCE_PF["example2"], "reported")
    if name == "example3":
        marginals = RandomVector((Marginal("normal", 1.5, 1.0), Marginal("normal", 2.5, 1.0)))
        return ProblemSpec("example3", marginals, (_example3_component,),
                           "single", _REFERENCE_PF["example3"], "reported")
    if name == "example4":
        if c not in (3, 4, 5):
            raise ConfigError("example4 requires c in {3, 4, 5}")
        ref = _REFERENCE_PF[("example4", c)]
        return ProblemSpec(f"example4_c{c}", _std_normals(2), _example4_components(c),
                           "series_min", ref, "reported")
    if name == "example5":
        if d is None or d < 1:
            raise ConfigError("example5 requires d >= 1")
        marginals = RandomVector(tuple(Marginal("lognormal", 1.0, 0.2) for _ in range(d)))
        ref = _REFERENCE_PF.get(("example5", d))
        return ProblemSpec(f"example5_d{d}", marginals, (_example5_component(d),),
                           "single", ref, "reported" if ref is not None else None)
    raise ConfigError(f"unknown built-in problem {name!r}")


class ExternalEvaluator:
    """Child-process performance function over newline-delimited JSON.

    Requests are ``{"id": n, "theta": [...]}``; responses must echo the id
    with either a ``g`` value or an ``error`` message. One request is in
    flight at a time; any protocol violation aborts the run.
    """

    def __init__(self, command, dim):
        self.command = command
        self.dim = dim
        self._next_id = 1
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            command, shell=isinstance(command, str),
            stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            text=True, bufsize=1,
        )

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __call__(self, thetas):
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        return np.array([self._evaluate_one(t) for t in thetas])

    def _evaluate_one(self, theta):
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            line = json.dumps({"id": req_id, "theta": [float(x) for x in theta]})
            try:
                self._proc.stdin.write(line + "\n")
                self._proc.stdin.flush()
                reply = self._proc.stdout.readline()
            except (BrokenPipeError, ValueError) as exc:
                raise EvaluationError(f"external evaluator died: {exc}") from exc
            if not reply:
                raise EvaluationError("external evaluator closed its output")
            try:
                msg = json.loads(reply)
            except json.JSONDecodeError as exc:
                raise ProtocolError(f"malformed response line: {reply!r}") from exc
            if msg.get("id") != req_id:
                raise ProtocolError(f"response id {msg.get('id')} != request id {req_id}")
            if "error" in msg:
                raise EvaluationError(f"external evaluator error: {msg['error']}")
            if "g" not in msg:
                raise ProtocolError(f"response missing 'g': {reply!r}")
            g = float(msg["g"])
            if not math.isfinite(g):
                raise EvaluationError("external evaluator returned a non-finite value")
            return g


def external_problem(command, dim, marginals: RandomVector, name="external"):
    """Wrap an external command as a single-component problem."""
    if marginals.dim != dim:
        raise ConfigError("marginal count does not match dim")
    return ProblemSpec(name, marginals, (ExternalEvaluator(command, dim),), "single")
