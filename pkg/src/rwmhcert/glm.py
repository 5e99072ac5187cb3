"""Exponential-family and GLM posteriors and their certificate constants.

The posterior has the form

    f(theta | y, x)  proportional to
        exp( sum_i <Pi(theta, x_i), T(y_i)> - sum_i c(theta, x_i) - g(theta) )

and the constants below feed the drift/minorization pipeline:

* ``C1`` for the rate certificate ``f_s(u) = gamma u``,
* ``f_xy(u) = K1 + K2 u + K3 u^2`` bounding the unnormalized ``|log f|``,
* ``M'_p``, beyond which the curvature certificate holds with margin ``eta``.

Logistic and Poisson regression presets are included.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .drift import drift_certificate
from .geometry import ConeParams
from .kernels import KIND_LOGISTIC, KIND_POISSON, KernelSpec
from .proposal import RadialProposal
from .rates import lower_bounds, rate_report
from .target import (CurvatureCert, EnvelopeFn, LogTarget, NormQuality, SuperexpCert,
                     TargetBundle, fd_hessian, find_mode, make_bundle)


class GLMDataError(ValueError):
    pass


class CurvatureMarginError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class GLMData:
    """Covariates ``x_i`` (rows of an n x p array) and statistics ``T(y_i)`` (n x m)."""

    covariates: np.ndarray
    statistics: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=float)
        T = np.asarray(self.statistics, dtype=float)
        if X.ndim != 2:
            raise GLMDataError(f"covariates must be 2-D (n, p), got shape {X.shape}")
        if T.ndim == 1:
            T = T[:, None]
        if T.ndim != 2 or T.shape[0] != X.shape[0]:
            raise GLMDataError(f"statistics shape {T.shape} does not match {X.shape[0]} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(T))):
            raise GLMDataError("data contain NaN or Inf")
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "statistics", T)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def m(self) -> int:
        return self.statistics.shape[1]

    @property
    def y(self) -> np.ndarray:
        return self.statistics[:, 0]


def load_glm_csv(path) -> GLMData:
    """Read a CSV with header ``y, x1, ..., xp`` (UTF-8, decimal point)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise GLMDataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "y":
        raise GLMDataError(f"{path}: first column must be 'y', got {header[:1]}")
    xs = header[1:]
    want = [f"x{j + 1}" for j in range(len(xs))]
    if not xs or xs != want:
        raise GLMDataError(f"{path}: covariate columns must be {want or ['x1', '...']}, got {xs}")
    ys, X = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise GLMDataError(f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise GLMDataError(f"{path}, line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise GLMDataError(f"{path}, line {lineno}: NaN or Inf not allowed")
        ys.append(vals[0])
        X.append(vals[1:])
    if not ys:
        raise GLMDataError(f"{path}: no data rows")
    return GLMData(np.array(X), np.array(ys))


# ---------------------------------------------------------------------------
# prior


class PriorKind(str, enum.Enum):
    STRONGLY_CONVEX = "strongly_convex"
    DISSIPATIVE = "dissipative"


@dataclass(frozen=True)
class PriorSpec:
    """Prior ``exp(-g(theta))``.

    ``lambda2`` is a Lipschitz constant of ``grad g``; ``gamma`` is
    ``lambda1`` (strongly convex) or ``a_dag`` (dissipative).
    """

    g: Callable
    grad_g: Callable
    lambda2: float
    kind: PriorKind = PriorKind.STRONGLY_CONVEX
    lambda1: Optional[float] = None
    a_dag: Optional[float] = None
    b_dag: float = 0.0
    hess_g: Optional[Callable] = None
    precision: Optional[float] = None  # set for isotropic Gaussian priors

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        if not self.lambda2 > 0:
            raise ValueError(f"lambda2 must be positive, got {self.lambda2!r}")
        if self.kind is PriorKind.STRONGLY_CONVEX:
            if self.lambda1 is None or not self.lambda1 > 0:
                raise ValueError("strongly convex prior needs lambda1 > 0")
        else:
            if self.a_dag is None or not self.a_dag > 0 or not self.b_dag >= 0:
                raise ValueError("dissipative prior needs a_dag > 0 and b_dag >= 0")

    @property
    def gamma(self) -> float:
        return self.lambda1 if self.kind is PriorKind.STRONGLY_CONVEX else self.a_dag

    def lipschitz_ratio(self, dim, n_pairs=100, seed=0, scale=3.0) -> float:
        """Largest observed ``|grad g(a) - grad g(b)| / |a - b|`` over seeded pairs."""
        rng = np.random.default_rng(seed)
        a = scale * rng.standard_normal((n_pairs, dim))
        b = scale * rng.standard_normal((n_pairs, dim))
        num = np.linalg.norm(self.grad_g(a) - self.grad_g(b), axis=1)
        return float(np.max(num / np.linalg.norm(a - b, axis=1)))


def gaussian_prior(dim: int, precision: float = 1.0) -> PriorSpec:
    """N(0, I / precision) with ``g(theta) = precision |theta|^2 / 2``."""
    tau = float(precision)
    return PriorSpec(g=lambda t: 0.5 * tau * np.sum(np.asarray(t) ** 2, axis=-1),
                     grad_g=lambda t: tau * np.asarray(t, dtype=float),
                     hess_g=lambda t: tau * np.eye(dim), lambda2=tau,
                     kind=PriorKind.STRONGLY_CONVEX, lambda1=tau, precision=tau)


# ---------------------------------------------------------------------------
# constants


class CumulantCase(str, enum.Enum):
    BOUNDED_GRADIENT = "bounded_gradient"
    CONVEX_BOUNDED_CURVATURE = "convex_bounded_curvature"


@dataclass(frozen=True)
class GLMConstants:
    lambda_data: float
    K_data: float
    cumulant_case: str
    C1: float
    K1: float
    K2: float
    K3: float
    gamma: float
    eta: float
    lambda2: float
    J_tilde: float
    Mp_prime: float
    n: int
    source: str = "generic"

    def f_xy(self, u):
        u = np.asarray(u, dtype=float)
        return self.K1 + self.K2 * u + self.K3 * u * u

    def to_dict(self):
        return asdict(self)


def _check_eta(eta, gamma, lambda2):
    if not (0.0 < eta and eta * lambda2 < gamma):
        raise CurvatureMarginError(
            f"curvature margin violated: need 0 < eta < gamma/lambda2 = {gamma / lambda2:.6g}, got eta={eta!r}")


def glm_constants(data: GLMData, prior: PriorSpec, lambda_data: float, K_data: float,
                  cumulant_case, grad_c_at_0, eta: float, c_at_0=None,
                  pi_at_0_norm: float = 0.0) -> GLMConstants:
    """Generic GLM constants.

    Parameters
    ----------
    lambda_data : float
        Bound on the spectral norm of ``grad Pi(theta, x_i)``.
    K_data : float
        Bound on ``|grad c|`` (bounded-gradient case) or on the Hessian of
        ``c`` (convex, bounded-curvature case).
    cumulant_case : CumulantCase or str
    grad_c_at_0 : array (n, p) or (n,)
        ``grad c(0, x_i)`` vectors, or their norms.
    eta : float
        Curvature margin, ``0 < eta < gamma / lambda2``.
    c_at_0 : array (n,), optional
        ``c(0, x_i)``; zero when omitted.
    pi_at_0_norm : float
        ``max_i |Pi(0, x_i)|``.

    Notes
    -----
    ``C1`` is one of four expressions selected by the cumulant case and the
    prior kind.  The bounds ``K2``, ``K3`` and ``J_tilde`` sum the per-
    observation cumulant bounds over all ``n`` observations.
    """
    case = CumulantCase(cumulant_case)
    gamma = prior.gamma
    _check_eta(eta, gamma, prior.lambda2)
    if not (lambda_data >= 0 and K_data >= 0 and math.isfinite(lambda_data) and math.isfinite(K_data)):
        raise ValueError("lambda_data and K_data must be finite and non-negative")
    n, p = data.n, data.p
    sumT = float(np.sum(np.linalg.norm(data.statistics, axis=1))) if n else 0.0
    gc0 = np.asarray(grad_c_at_0, dtype=float)
    gc0 = np.linalg.norm(gc0.reshape(n, -1), axis=1) if gc0.size else np.zeros(0)
    max_gc0 = float(gc0.max()) if gc0.size else 0.0
    c0 = np.zeros(n) if c_at_0 is None else np.abs(np.asarray(c_at_0, dtype=float))
    max_c0 = float(c0.max()) if c0.size else 0.0
    zero = np.zeros(p)
    g0 = abs(float(prior.g(zero)))
    dg0 = float(np.linalg.norm(prior.grad_g(zero)))
    tail = dg0 if prior.kind is PriorKind.STRONGLY_CONVEX else prior.b_dag

    if case is CumulantCase.BOUNDED_GRADIENT:
        C1 = lambda_data * sumT + n * K_data + tail
        K2 = lambda_data * sumT + n * K_data + dg0
        K3 = 0.5 * prior.lambda2
        J = n * K_data
    else:
        C1 = lambda_data * sumT + n * max_gc0 + tail
        K2 = lambda_data * sumT + n * max_gc0 + dg0
        K3 = 0.5 * (prior.lambda2 + n * K_data)
        J = n * max_gc0 + n * K_data
    K1 = pi_at_0_norm * sumT + n * max_c0 + g0
    Mp = max((C1 + lambda_data * sumT + J + dg0) / (gamma - eta * prior.lambda2), 1.0)
    return GLMConstants(lambda_data=float(lambda_data), K_data=float(K_data), cumulant_case=case.value,
                        C1=C1, K1=K1, K2=K2, K3=K3, gamma=gamma, eta=float(eta),
                        lambda2=prior.lambda2, J_tilde=J, Mp_prime=Mp, n=n)


def logistic_constants(X, y, eta: float, prior_precision: float = 1.0) -> GLMConstants:
    """Closed-form constants for logistic regression with an N(0, I/tau) prior.

    With ``m = max_i |x_i|``: ``C1 = K2 = m (n + sum|y_i|)``, ``K1 = 0``
    (centered cumulant ``log(1 + e^t) - log 2``), ``K3 = tau``,
    ``lambda2 = tau + lambda_max(X^T X) / 4``, ``gamma = tau`` and
    ``M'_p = max((C1 + m sum|y_i| + n m) / (gamma - eta lambda2), 1)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    tau = float(prior_precision)
    mx = float(np.max(np.linalg.norm(X, axis=1))) if n else 0.0
    sumy = float(np.sum(np.abs(y)))
    lam_max = float(np.linalg.eigvalsh(X.T @ X)[-1]) if n else 0.0
    lambda2 = tau + lam_max / 4.0
    _check_eta(eta, tau, lambda2)
    C1 = mx * (n + sumy)
    J = n * mx
    Mp = max((C1 + mx * sumy + J) / (tau - eta * lambda2), 1.0)
    return GLMConstants(lambda_data=mx, K_data=mx, cumulant_case=CumulantCase.BOUNDED_GRADIENT.value,
                        C1=C1, K1=0.0, K2=C1, K3=tau, gamma=tau, eta=float(eta), lambda2=lambda2,
                        J_tilde=J, Mp_prime=Mp, n=n, source="logistic")


# ---------------------------------------------------------------------------
# normalization


def _log_normalizer(log_unnorm, grad, hess, dim, init, method):
    """``(log Z, mode, quality)`` for ``exp(log_unnorm)``."""
    probe = LogTarget(dim=dim, log_density=log_unnorm, grad_log_density=grad, hess_log_density=hess)
    mode, _ = find_mode(probe, init)
    l0 = float(log_unnorm(mode))
    H = hess(mode) if hess is not None else fd_hessian(grad, mode)
    sign, logdet = np.linalg.slogdet(-np.asarray(H))
    if sign <= 0:
        raise ValueError("Hessian at the mode is not negative definite")
    if method == "auto":
        method = "quadrature" if dim <= 2 else "laplace"
    if method == "laplace":
        return l0 + 0.5 * dim * math.log(2 * math.pi) - 0.5 * logdet, mode, "laplace"
    if method != "quadrature":
        raise ValueError(f"unknown normalization method {method!r}")
    if dim > 2:
        raise ValueError("quadrature normalization restricted to p <= 2")
    sd = 1.0 / np.sqrt(np.linalg.eigvalsh(-np.asarray(H)))
    w = 40.0 * float(sd.max())

    def fn(*z):
        return math.exp(float(log_unnorm(np.array(z))) - l0)

    ranges = [(mode[j] - w, mode[j] + w) for j in range(dim)]
    if dim == 1:
        v, _ = integrate.quad(fn, *ranges[0], points=[mode[0]], epsabs=0.0, epsrel=1e-12, limit=400)
    else:
        v, _ = integrate.nquad(fn, ranges, opts={"epsabs": 0.0, "epsrel": 1e-10, "limit": 200})
    return l0 + math.log(v), mode, "quadrature"


def _finish_target(dim, ell, grad, hess, kernel_kind, vec_a, prior_prec, mat, kernel_shift,
                   log_norm, normalization, init):
    if log_norm is not None:
        logZ, quality, how = float(log_norm), NormQuality.EXACT, "user"
    else:
        logZ, _, how = _log_normalizer(ell, grad, hess, dim, init, normalization)
        quality = NormQuality.APPROXIMATE
    c0 = -logZ
    kernel = None
    if prior_prec is not None:
        kernel = KernelSpec(kernel_kind, vec_a, np.array([prior_prec]), mat, c0 + kernel_shift)
    t = LogTarget.from_unnormalized(dim, ell, grad, c0, quality=quality, hess_log_density=hess,
                                    kernel=kernel)
    return t, how


# ---------------------------------------------------------------------------
# exponential family


def expfam_posterior(data: GLMData, prior: PriorSpec, cumulant, grad_cumulant, hess_cumulant=None,
                     log_norm: float | None = None, normalization: str = "auto",
                     name: str = "expfam_posterior") -> TargetBundle:
    """Posterior ``exp(<sum_i x_i, theta> - n c(theta) - g(theta))``.

    The rate certificate is ``f_s(u) = lambda1 u`` with
    ``C1 = sum_i |x_i| + n |grad c(0)| + |grad g(0)|``.  Pass ``log_norm``
    (the log normalizing constant) to mark the target exact.
    """
    if prior.kind is not PriorKind.STRONGLY_CONVEX:
        raise ValueError("exponential-family posterior needs a strongly convex prior")
    n, p = data.n, data.p
    if data.m != p:
        raise GLMDataError("exponential-family posterior needs T(x) = x with m = p")
    s = data.covariates.sum(axis=0)

    def ell(t):
        t = np.asarray(t, dtype=float)
        return t @ s - n * cumulant(t) - prior.g(t)

    def grad(t):
        t = np.asarray(t, dtype=float)
        return s - n * grad_cumulant(t) - prior.grad_g(t)

    hess = None
    if hess_cumulant is not None and prior.hess_g is not None:
        def hess(t):
            return -n * hess_cumulant(t) - prior.hess_g(t)

    t, how = _finish_target(p, ell, grad, hess, None, None, None, None, 0.0, log_norm,
                            normalization, np.zeros(p))
    zero = np.zeros(p)
    C1 = (float(np.sum(np.linalg.norm(data.covariates, axis=1))) + n * float(np.linalg.norm(grad_cumulant(zero)))
          + float(np.linalg.norm(prior.grad_g(zero))))
    sup = SuperexpCert.linear(prior.lambda1, C1)
    return make_bundle(t, None, sup, None, init=np.zeros(p), name=name,
                       strong_convexity=prior.lambda1, meta={"normalization": how})


# ---------------------------------------------------------------------------
# logistic regression


def _check_binary(y):
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.all((y == 0) | (y == 1)):
        raise GLMDataError("logistic regression needs y in {0, 1}")
    return y


def logistic_target(X, y, prior_precision: float = 1.0, log_norm=None, normalization="auto"):
    """Normalized logistic-regression posterior with an N(0, I/tau) prior.

    Returns ``(LogTarget, normalization_method)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_binary(y)
    n, p = X.shape
    tau = float(prior_precision)
    log2 = math.log(2.0)

    def ell(t):
        t = np.asarray(t, dtype=float)
        eta = t @ X.T
        return np.sum(y * eta - (np.logaddexp(0.0, eta) - log2), axis=-1) - 0.5 * tau * np.sum(t * t, axis=-1)

    def grad(t):
        t = np.asarray(t, dtype=float)
        eta = t @ X.T
        r = y - 1.0 / (1.0 + np.exp(-eta))
        return r @ X - tau * t

    def hess(t):
        eta = np.asarray(t, dtype=float) @ X.T
        s = 1.0 / (1.0 + np.exp(-eta))
        return -(X.T * (s * (1 - s))) @ X - tau * np.eye(p)

    # the compiled kernel uses the uncentered cumulant, hence the n log 2 shift
    return _finish_target(p, ell, grad, hess, KIND_LOGISTIC, y.copy(), tau, X.copy(), n * log2,
                          log_norm, normalization, np.zeros(p))


def logistic_bundle(X, y, eta: float | None = None, prior_precision: float = 1.0,
                    log_norm=None, normalization="auto"):
    """Posterior bundle and constants; ``eta`` defaults to half its admissible range."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_binary(y)
    if eta is None:
        lam_max = float(np.linalg.eigvalsh(X.T @ X)[-1])
        eta = 0.5 * prior_precision / (prior_precision + lam_max / 4.0)
    consts = logistic_constants(X, y, eta, prior_precision)
    t, how = logistic_target(X, y, prior_precision, log_norm, normalization)
    c0 = abs(t.log_norm_offset)
    env = EnvelopeFn(lambda u: consts.f_xy(u) + c0)
    sup = SuperexpCert.linear(consts.gamma, consts.C1)
    curv = CurvatureCert(eta=float(eta), M_p=consts.Mp_prime)
    bundle = make_bundle(t, env, sup, curv, init=np.zeros(X.shape[1]), name="logistic_posterior",
                         strong_convexity=prior_precision, grad_lipschitz=consts.lambda2,
                         meta={"normalization": how})
    return bundle, consts


def logistic_preset(X, y, prop: RadialProposal, eta: float | None = None, K: float = 1.0 / 3.0,
                    eps_alpha: float | None = None, prior_precision: float = 1.0, n_mc: int = 100_000,
                    seed: int = 0, candidates=None, normalization="auto", log_norm=None):
    """End-to-end certificate for Bayesian logistic regression.

    Returns ``(bundle, constants, certificate, rate_report)``.
    """
    bundle, consts = logistic_bundle(X, y, eta, prior_precision, log_norm, normalization)
    params = (ConeParams.from_eta(consts.eta, K=K) if eps_alpha is None
              else ConeParams(eps_alpha=eps_alpha, K=K))
    cert = drift_certificate(bundle, prop, params)
    lows = lower_bounds(bundle, prop, candidates=candidates, n_mc=n_mc, seed=seed)
    return bundle, consts, cert, rate_report(cert, lows)


# ---------------------------------------------------------------------------
# Poisson regression


def _check_counts(y):
    y = np.asarray(y, dtype=float).reshape(-1)
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise GLMDataError("Poisson regression needs non-negative integer counts")
    return y


def poisson_target(X, y, prior: PriorSpec, log_norm=None, normalization="auto"):
    """Normalized Poisson-regression posterior (log link).  Returns ``(LogTarget, method)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_counts(y)
    n, p = X.shape

    def ell(t):
        eta = np.asarray(t, dtype=float) @ X.T
        return np.sum(y * eta - np.exp(eta), axis=-1) - prior.g(t)

    def grad(t):
        t = np.asarray(t, dtype=float)
        eta = t @ X.T
        return (y - np.exp(eta)) @ X - prior.grad_g(t)

    hess = None
    if prior.hess_g is not None:
        def hess(t):
            eta = np.asarray(t, dtype=float) @ X.T
            return -(X.T * np.exp(eta)) @ X - prior.hess_g(t)

    return _finish_target(p, ell, grad, hess, KIND_POISSON, y.copy(), prior.precision, X.copy(), 0.0,
                          log_norm, normalization, np.zeros(p))


def poisson_lower_bound(f_mode: float, h: float, p: int) -> float:
    """``1 - 1 / (f(theta*) (2 pi h)^(p/2))`` for an N(0, h I) proposal."""
    return 1.0 - 1.0 / (f_mode * (2.0 * math.pi * h) ** (0.5 * p))


def poisson_preset(X, y, prior: PriorSpec | None = None, prop: RadialProposal | None = None,
                   log_norm=None, normalization="auto"):
    """Poisson posterior bundle and its mode-based lower bound on rho.

    Returns ``(bundle, lower_bound)``; the bound is floored at 0 and
    inherits the normalization quality of the bundle.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _check_counts(y)
    n, p = X.shape
    prior = gaussian_prior(p) if prior is None else prior
    if prior.kind is not PriorKind.STRONGLY_CONVEX:
        raise ValueError("Poisson preset needs a strongly convex prior")
    prop = RadialProposal(dim=p) if prop is None else prop
    if prop.family != "gaussian" or prop.dim != p:
        raise ValueError("Poisson preset needs a Gaussian proposal of matching dimension")
    t, how = poisson_target(X, y, prior, log_norm, normalization)
    # rate certificate: convex cumulant e^t with grad c(0, x_i) = x_i
    mx = float(np.max(np.linalg.norm(X, axis=1))) if n else 0.0
    C1 = mx * float(np.sum(np.abs(y))) + n * mx + float(np.linalg.norm(prior.grad_g(np.zeros(p))))
    sup = SuperexpCert.linear(prior.lambda1, C1)
    bundle = make_bundle(t, None, sup, None, init=np.zeros(p), name="poisson_posterior",
                         strong_convexity=prior.lambda1, meta={"normalization": how})
    h = prop.scale**2
    lb = poisson_lower_bound(bundle.p_star, h, p)
    if lb > 0.99:
        warnings.warn(f"Poisson lower bound {lb:.4f} is close to 1: the proposal scale is too large "
                      "for fast mixing", stacklevel=2)
    return bundle, max(lb, 0.0)
