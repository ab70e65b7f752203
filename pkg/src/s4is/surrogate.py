"""Gaussian-process surrogate (ordinary kriging) and the composite-min
wrapper for series systems.

Inputs live in u-space; outputs are standardized internally and
de-normalized on prediction. Hyperparameters (per-dimension lengthscales)
maximize the concentrated log marginal likelihood with the constant trend
and signal variance profiled out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.linalg import cho_factor, cho_solve
from scipy.spatial.distance import cdist

from .errors import FitError

_LS_BOUNDS = (1e-2, 1e3)
_NUGGET_START = 1e-10
_NUGGET_MAX = 1e-4
_BIG = 1e25


@dataclass
class SupportPointSet:
    """Append-only dataset of evaluated points: u-space inputs, the matching
    original-space inputs, aggregated outputs and optional per-component
    outputs."""

    inputs_u: np.ndarray
    inputs_theta: np.ndarray
    outputs: np.ndarray
    component_outputs: np.ndarray | None = None  # (n, n_components)

    def __post_init__(self):
        self.inputs_u = np.atleast_2d(np.asarray(self.inputs_u, dtype=float))
        self.inputs_theta = np.atleast_2d(np.asarray(self.inputs_theta, dtype=float))
        self.outputs = np.asarray(self.outputs, dtype=float)
        if self.component_outputs is not None:
            self.component_outputs = np.atleast_2d(np.asarray(self.component_outputs, dtype=float))
        n = self.inputs_u.shape[0]
        if self.inputs_theta.shape[0] != n or self.outputs.shape[0] != n:
            raise ValueError("support point arrays must have equal lengths")

    def __len__(self):
        return self.inputs_u.shape[0]

    def append(self, u, theta, y, components=None):
        u = np.asarray(u, dtype=float)
        if np.any(np.all(np.isclose(self.inputs_u, u, rtol=0, atol=0), axis=1)):
            raise ValueError("duplicate support input")
        self.inputs_u = np.vstack([self.inputs_u, u])
        self.inputs_theta = np.vstack([self.inputs_theta, np.asarray(theta, dtype=float)])
        self.outputs = np.append(self.outputs, float(y))
        if self.component_outputs is not None:
            self.component_outputs = np.vstack([self.component_outputs, np.asarray(components, dtype=float)])


def _sq_dists(a, b, lengthscales):
    return cdist(a / lengthscales, b / lengthscales, "sqeuclidean")


class GpSurrogate:
    """Anisotropic squared-exponential GP with a constant trend.

    Invariants: the posterior mean reproduces training outputs up to the
    stabilizing jitter on the kernel diagonal (within 1e-3 in output units
    for well-scaled data) and is equivariant under a constant output shift.
    """

    def __init__(self):
        self.fitted = False
        self.x = None
        self.y = None
        self.lengthscales = None
        self.signal_variance = None  # in standardized output units
        self.trend = None            # constant trend, standardized units
        self.nugget = None           # absolute output-space noise variance
        self.isotropic = False       # one shared lengthscale across inputs
        self.nll_history = []        # best objective after each accepted restart

    # -- fitting -----------------------------------------------------------

    def fit(self, x, y, n_restarts=5, seed=0, init_lengthscales=None,
            isotropic=False):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        n, d = x.shape
        self.isotropic = bool(isotropic)
        n_params = 1 if self.isotropic else d
        if n < 2:
            raise ValueError("need at least 2 support points")
        if np.unique(x, axis=0).shape[0] != n:
            raise ValueError("duplicate inputs in training data")
        self.x = x
        self.y = y
        self._y_mean = float(y.mean())
        self._y_sd = float(y.std())
        if self._y_sd < 1e-12 * (abs(self._y_mean) + 1.0):
            # Degenerate constant data: the trend absorbs everything.
            self._constant = True
            self.lengthscales = np.ones(d)
            self.signal_variance = 0.0
            self.trend = 0.0
            self.nugget = 0.0
            self.fitted = True
            return self
        self._constant = False
        z = (y - self._y_mean) / self._y_sd
        self._z = z

        rng = np.random.default_rng(seed)
        lo, hi = np.log(_LS_BOUNDS[0]), np.log(_LS_BOUNDS[1])
        starts = []
        if init_lengthscales is not None:
            init = np.log(init_lengthscales)
            if self.isotropic:
                init = np.atleast_1d(np.median(init))
            starts.append(np.clip(init, lo, hi))
        starts.append(np.zeros(n_params))  # unit lengthscales
        while len(starts) < max(n_restarts, 1):
            starts.append(rng.uniform(math.log(0.1), math.log(10.0), size=n_params))

        delta = _NUGGET_START
        while True:
            try:
                self._optimize(starts, lo, hi, delta)
                break
            except np.linalg.LinAlgError:
                delta *= 10.0
                if delta > _NUGGET_MAX * 1.01:
                    raise FitError("Cholesky failed after nugget escalation") from None
        self.fitted = True
        return self

    def _nll(self, log_ls, delta):
        ls = np.exp(log_ls)
        if self.isotropic:
            ls = np.full(self.x.shape[1], float(ls[0]))
        n = self.x.shape[0]
        r = np.exp(-0.5 * _sq_dists(self.x, self.x, ls))
        r[np.diag_indices(n)] += delta
        try:
            cf = cho_factor(r, lower=True)
        except np.linalg.LinAlgError:
            return _BIG, None
        z = self._z
        ones = np.ones(n)
        rz = cho_solve(cf, z)
        r1 = cho_solve(cf, ones)
        denom = ones @ r1
        beta = (ones @ rz) / denom
        resid = z - beta
        sigma2 = max(float(resid @ cho_solve(cf, resid)) / n, 1e-300)
        logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
        nll = 0.5 * (n * math.log(sigma2) + logdet)
        return nll, (cf, beta, sigma2, r1, denom)

    def _optimize(self, starts, lo, hi, delta):
        best = (math.inf, None, None)
        self.nll_history = []
        for s in starts:
            res = optimize.minimize(
                lambda p: self._nll(p, delta)[0], s, method="L-BFGS-B",
                bounds=[(lo, hi)] * len(s), options={"maxiter": 60},
            )
            if res.fun < best[0]:
                best = (res.fun, res.x, None)
            self.nll_history.append(best[0])
        if not math.isfinite(best[0]) or best[1] is None:
            raise np.linalg.LinAlgError("no feasible hyperparameters")
        nll, aux = self._nll(best[1], delta)
        if aux is None:
            raise np.linalg.LinAlgError("Cholesky failed at optimum")
        cf, beta, sigma2, r1, denom = aux
        self.lengthscales = np.exp(best[1])
        if self.isotropic:
            self.lengthscales = np.full(self.x.shape[1], float(self.lengthscales[0]))
        self.trend = beta
        self.signal_variance = sigma2
        self._delta = delta
        self.nugget = delta * sigma2 * self._y_sd**2
        self._cf = cf
        self._alpha = cho_solve(cf, self._z - beta)
        self._rinv1 = r1
        self._one_rinv_one = denom

    def update(self, u_new, theta_new, y_new, n_restarts=5, seed=0, warm=False):
        """Refit on the augmented dataset; ``warm`` seeds one restart at the
        current lengthscales and trims the random restarts."""
        u_new = np.asarray(u_new, dtype=float)
        if np.any(np.all(self.x == u_new, axis=1)):
            raise ValueError("duplicate support input")
        x = np.vstack([self.x, u_new])
        y = np.append(self.y, np.asarray(y_new, dtype=float).ravel())
        model = GpSurrogate()
        if warm and not self._constant:
            model.fit(x, y, n_restarts=min(n_restarts, 3), seed=seed,
                      init_lengthscales=self.lengthscales, isotropic=self.isotropic)
        else:
            model.fit(x, y, n_restarts=n_restarts, seed=seed, isotropic=self.isotropic)
        return model

    # -- prediction --------------------------------------------------------

    def _check(self, u):
        if not self.fitted:
            raise ValueError("surrogate is not fitted")
        return np.atleast_2d(np.asarray(u, dtype=float))

    def predict_mean(self, u):
        uq = self._check(u)
        if self._constant:
            out = np.full(uq.shape[0], self._y_mean)
        else:
            k = np.exp(-0.5 * _sq_dists(uq, self.x, self.lengthscales))
            out = self._y_mean + self._y_sd * (self.trend + k @ self._alpha)
        return out[0] if np.asarray(u).ndim == 1 else out

    def predict_sd(self, u):
        uq = self._check(u)
        if self._constant:
            out = np.zeros(uq.shape[0])
        else:
            k = np.exp(-0.5 * _sq_dists(uq, self.x, self.lengthscales))
            v = cho_solve(self._cf, k.T)
            var = 1.0 - np.sum(k.T * v, axis=0)
            u_term = 1.0 - k @ self._rinv1
            var = self.signal_variance * (var + u_term**2 / self._one_rinv_one)
            out = self._y_sd * np.sqrt(np.clip(var, 0.0, None))
        return out[0] if np.asarray(u).ndim == 1 else out

    def predict(self, u):
        return self.predict_mean(u), self.predict_sd(u)

    def to_dict(self):
        """JSON-ready dump of hyperparameters and training data."""
        return {
            "lengthscales": self.lengthscales.tolist(),
            "signal_variance": self.signal_variance,
            "trend": self.trend,
            "nugget": self.nugget,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
        }


class CompositeMinSurrogate:
    """Per-component GPs for a series system; the prediction is the minimum
    over component means. The predictive sd reported is that of the
    minimizing component."""

    def __init__(self, models):
        self.models = list(models)
        if not self.models:
            raise ValueError("need at least one component model")

    @classmethod
    def fit(cls, x, component_y, n_restarts=5, seed=0):
        models = []
        for j in range(component_y.shape[1]):
            models.append(GpSurrogate().fit(x, component_y[:, j], n_restarts=n_restarts, seed=seed + j))
        return cls(models)

    def update(self, u_new, theta_new, component_y_new, n_restarts=5, seed=0, warm=False):
        models = [m.update(u_new, theta_new, yj, n_restarts=n_restarts, seed=seed + j, warm=warm)
                  for j, (m, yj) in enumerate(zip(self.models, np.asarray(component_y_new, dtype=float)))]
        return CompositeMinSurrogate(models)

    @property
    def fitted(self):
        return all(m.fitted for m in self.models)

    def _stack_means(self, u):
        return np.stack([np.atleast_1d(m.predict_mean(np.atleast_2d(u))) for m in self.models], axis=1)

    def predict_mean(self, u):
        means = self._stack_means(u).min(axis=1)
        return means[0] if np.asarray(u).ndim == 1 else means

    def predict_sd(self, u):
        means = self._stack_means(u)
        sds = np.stack([np.atleast_1d(m.predict_sd(np.atleast_2d(u))) for m in self.models], axis=1)
        picked = sds[np.arange(means.shape[0]), means.argmin(axis=1)]
        return picked[0] if np.asarray(u).ndim == 1 else picked

    def predict(self, u):
        return self.predict_mean(u), self.predict_sd(u)


def training_inputs(points: SupportPointSet, feature_fn=None):
    """Training coordinates: u-space by default, or a caller-supplied
    featurization of the original-space inputs."""
    if feature_fn is None:
        return points.inputs_u
    return np.atleast_2d(feature_fn(points.inputs_theta))


def fit_surrogate(points: SupportPointSet, composite=False, n_restarts=5, seed=0,
                  feature_fn=None, isotropic=False):
    """Fit the configured surrogate on a support point set."""
    x = training_inputs(points, feature_fn)
    if composite:
        if points.component_outputs is None:
            raise ValueError("composite surrogate needs per-component outputs")
        return CompositeMinSurrogate.fit(x, points.component_outputs,
                                         n_restarts=n_restarts, seed=seed)
    return GpSurrogate().fit(x, points.outputs, n_restarts=n_restarts, seed=seed,
                             isotropic=isotropic)


def update_surrogate(model, points: SupportPointSet, n_restarts=5, seed=0, warm=True,
                     feature_fn=None):
    """Refit the surrogate after a point was appended to ``points``."""
    x = training_inputs(points, feature_fn)
    if isinstance(model, CompositeMinSurrogate):
        if not warm:
            return CompositeMinSurrogate.fit(x, points.component_outputs,
                                             n_restarts=n_restarts, seed=seed)
        return _warm_composite(model, x, points.component_outputs, n_restarts, seed)
    iso = getattr(model, "isotropic", False)
    if warm and not model._constant:
        return GpSurrogate().fit(x, points.outputs, n_restarts=min(n_restarts, 3),
                                 seed=seed, init_lengthscales=model.lengthscales,
                                 isotropic=iso)
    return GpSurrogate().fit(x, points.outputs, n_restarts=n_restarts, seed=seed,
                             isotropic=iso)


def _warm_composite(model, x, component_outputs, n_restarts, seed):
    models = []
    for j, m in enumerate(model.models):
        if m._constant:
            models.append(GpSurrogate().fit(x, component_outputs[:, j],
                                            n_restarts=n_restarts, seed=seed + j))
        else:
            models.append(GpSurrogate().fit(x, component_outputs[:, j],
                                            n_restarts=min(n_restarts, 3), seed=seed + j,
                                            init_lengthscales=m.lengthscales))
    return CompositeMinSurrogate(models)
