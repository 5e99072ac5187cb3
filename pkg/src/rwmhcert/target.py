"""Target densities with the certificates the bound pipeline consumes.

A :class:`TargetBundle` couples a normalized log-density with

* an envelope ``f_tilde`` bounding ``|log f(x)|`` by a non-decreasing
  function of ``|x|``,
* a superexponential certificate ``<x/|x|, grad log f(x)> <= C1 - f_s(|x|)``
  for ``|x| > M_s``,
* a curvature certificate ``<x/|x|, grad f / |grad f|> <= -eta`` for
  ``|x| > M_p``,

plus the mode and the maximum density value.  The checkers in this module
can falsify a certificate by sampling; they cannot prove one.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ._math import uniform_directions
from .kernels import KIND_GAUSSIAN, KernelSpec
from .roots import invert_monotone

ETA_CLAMP = 1.0 - 1e-6


class NormQuality(str, enum.Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


class ModeNotFoundError(RuntimeError):
    """Mode search failed; ``last_iterate`` holds where it stopped."""

    def __init__(self, msg, last_iterate):
        super().__init__(msg)
        self.last_iterate = np.array(last_iterate, dtype=float)


class NonFiniteDensityError(ModeNotFoundError):
    pass


def _as_points(x, p):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != p:
        raise ValueError(f"expected points with trailing dimension {p}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class LogTarget:
    """Normalized log-density on R^p.

    ``log_density`` and ``grad_log_density`` must accept an array of shape
    ``(..., p)`` and return shapes ``(...)`` and ``(..., p)``.

    Attributes
    ----------
    log_norm_offset : float
        The constant ``c0`` that was added to an unnormalized log-density to
        normalize it (0 when the user supplied a normalized density).
    norm_quality : NormQuality
        Whether ``c0`` is analytic or estimated.
    hess_log_density : callable, optional
        ``(p,) -> (p, p)``; enables Newton steps in :func:`find_mode`.
    kernel : KernelSpec, optional
        Flat form usable by the compiled chain loop.
    gaussian : tuple, optional
        ``(mean, cov)`` when the target is exactly Gaussian.
    """

    dim: int
    log_density: Callable
    grad_log_density: Callable
    log_norm_offset: float = 0.0
    norm_quality: NormQuality = NormQuality.EXACT
    hess_log_density: Optional[Callable] = None
    kernel: Optional[KernelSpec] = None
    gaussian: Optional[tuple] = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"target dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "norm_quality", NormQuality(self.norm_quality))

    def logpdf(self, x):
        return self.log_density(_as_points(x, self.dim))

    def grad(self, x):
        return self.grad_log_density(_as_points(x, self.dim))

    @classmethod
    def from_unnormalized(cls, dim, log_unnorm, grad, c0, quality=NormQuality.APPROXIMATE, **kw):
        """Wrap ``log_unnorm + c0``."""
        c0 = float(c0)
        return cls(dim=dim, log_density=lambda x: log_unnorm(x) + c0, grad_log_density=grad,
                   log_norm_offset=c0, norm_quality=quality, **kw)


def check_gradient(target: LogTarget, points, h=1e-5):
    """Largest relative error between the analytic gradient and central differences."""
    pts = _as_points(points, target.dim).reshape(-1, target.dim)
    worst = 0.0
    for x in pts:
        g = np.asarray(target.grad(x), dtype=float).reshape(target.dim)
        fd = np.empty(target.dim)
        for j in range(target.dim):
            e = np.zeros(target.dim)
            step = h * max(1.0, abs(x[j]))
            e[j] = step
            fd[j] = (float(target.logpdf(x + e)) - float(target.logpdf(x - e))) / (2 * step)
        err = np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1.0)
        worst = max(worst, float(err))
    return worst


@dataclass(frozen=True)
class EnvelopeFn:
    """Non-decreasing radial bound ``|log f(x)| <= f_tilde(|x|)``."""

    f_tilde: Callable

    def __call__(self, r):
        return self.f_tilde(r)

    def is_nondecreasing(self, radii) -> bool:
        v = np.asarray([self.f_tilde(float(r)) for r in np.sort(np.asarray(radii, dtype=float))])
        return bool(np.all(np.diff(v) >= -1e-12 * np.maximum(1.0, np.abs(v[1:]))))


@dataclass(frozen=True)
class SuperexpCert:
    """Rate certificate ``<x/|x|, grad log f(x)> <= C1 - f_s(|x|)`` for ``|x| > M_s``.

    ``f_s`` must be continuous and strictly increasing on ``[0, inf)``.  The
    inverse follows the convention that arguments below the range map to 0,
    the infimum of the domain.  Linear rates (``slope`` set) get an exact
    inverse; otherwise bisection is used.
    """

    f_s: Callable
    C1: float = 0.0
    M_s: float = 0.0
    f_s_inverse: Optional[Callable] = None
    slope: Optional[float] = None

    def __post_init__(self):
        if self.M_s < 0:
            raise ValueError(f"M_s must be non-negative, got {self.M_s!r}")

    @classmethod
    def linear(cls, slope: float, C1: float = 0.0, M_s: float = 0.0) -> "SuperexpCert":
        if not slope > 0:
            raise ValueError(f"linear rate needs a positive slope, got {slope!r}")
        s = float(slope)
        return cls(f_s=lambda u: s * np.asarray(u, dtype=float), C1=float(C1), M_s=float(M_s),
                   f_s_inverse=lambda x: max(float(x), 0.0) / s, slope=s)

    def inverse(self, x: float) -> float:
        if self.f_s_inverse is not None:
            return float(self.f_s_inverse(x))
        return invert_monotone(lambda u: float(self.f_s(u)), float(x), lo=0.0, xtol=1e-15)


@dataclass(frozen=True)
class CurvatureCert:
    """``<x/|x|, grad f(x)/|grad f(x)|> <= -eta`` for ``|x| > M_p``."""

    eta: float
    M_p: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.eta < 1.0):
            raise ValueError(f"curvature eta must lie in (0, 1), got {self.eta!r}")
        if not (self.M_p >= 0.0 and math.isfinite(self.M_p)):
            raise ValueError(f"M_p must be finite and non-negative, got {self.M_p!r}")

    @classmethod
    def clamped(cls, eta: float, M_p: float = 0.0) -> "CurvatureCert":
        """Build with ``eta >= 1`` pulled back to ``1 - 1e-6`` (with a warning)."""
        if eta >= 1.0:
            warnings.warn(f"curvature eta={eta!r} is not below 1; clamped to {ETA_CLAMP}", stacklevel=2)
            eta = ETA_CLAMP
        return cls(eta=float(eta), M_p=float(M_p))


@dataclass(frozen=True)
class TargetBundle:
    """A target together with its certificates, mode and peak density.

    ``strong_convexity`` (m) and ``grad_lipschitz`` (L) are optional and only
    used by the spectral lower bounds.
    """

    target: LogTarget
    envelope: Optional[EnvelopeFn]
    superexp: Optional[SuperexpCert]
    curvature: Optional[CurvatureCert]
    p_star: float
    mode: np.ndarray
    name: str = "target"
    strong_convexity: Optional[float] = None
    grad_lipschitz: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "mode", np.atleast_1d(np.asarray(self.mode, dtype=float)))
        if not (self.p_star > 0 and math.isfinite(self.p_star)):
            raise ValueError(f"p_star must be positive and finite, got {self.p_star!r}")

    @property
    def dim(self) -> int:
        return self.target.dim

    @property
    def M_s(self) -> float:
        return self.superexp.M_s if self.superexp is not None else 0.0

    @property
    def M_p(self) -> float:
        return self.curvature.M_p if self.curvature is not None else 0.0

    @property
    def M_star(self) -> float:
        return max(self.M_s, self.M_p)

    @property
    def norm_quality(self) -> NormQuality:
        return self.target.norm_quality

    def logpdf(self, x):
        return self.target.logpdf(x)

    def require_certificates(self):
        missing = [n for n in ("envelope", "superexp", "curvature") if getattr(self, n) is None]
        if missing:
            raise ValueError(f"bundle {self.name!r} lacks certificates: {', '.join(missing)}")


# ---------------------------------------------------------------------------
# mode finding


def find_mode(target: LogTarget, init, tol: float = 1e-8, max_iter: int = 500):
    """Maximize the log-density.

    Newton steps with backtracking are used when a Hessian is available and
    negative definite; otherwise gradient ascent with Barzilai-Borwein trial
    steps safeguarded by an Armijo line search.

    Returns
    -------
    (mode, p_star)
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    x = np.array(np.atleast_1d(init), dtype=float).reshape(target.dim)
    lf = float(target.logpdf(x))
    if not math.isfinite(lf):
        raise NonFiniteDensityError(f"log-density is not finite at the initial point {x}", x)
    step = 1.0
    for _ in range(max_iter):
        g = np.asarray(target.grad(x), dtype=float).reshape(target.dim)
        if not np.all(np.isfinite(g)):
            raise NonFiniteDensityError(f"gradient is not finite at {x}", x)
        if np.linalg.norm(g) < tol:
            return x, math.exp(lf)
        newton = False
        d = g
        if target.hess_log_density is not None:
            H = np.asarray(target.hess_log_density(x), dtype=float).reshape(target.dim, target.dim)
            try:
                np.linalg.cholesky(-H)
                d = np.linalg.solve(-H, g)
                newton = True
            except np.linalg.LinAlgError:
                d = g
        t = 1.0 if newton else step
        slope = float(g @ d)
        moved = False
        for _ in range(80):
            xn = x + t * d
            ln = float(target.logpdf(xn))
            if math.isfinite(ln) and ln >= lf + 1e-4 * t * slope:
                moved = True
                break
            t *= 0.5
        if not moved:
            # the line search cannot improve: accept if we are at rounding level
            if np.linalg.norm(g) < max(tol, 1e3 * np.finfo(float).eps * max(1.0, np.linalg.norm(x))):
                return x, math.exp(lf)
            raise ModeNotFoundError(f"line search stalled at {x} with |grad|={np.linalg.norm(g):.3g}", x)
        if not newton:
            gn = np.asarray(target.grad(xn), dtype=float).reshape(target.dim)
            sv, yv = xn - x, g - gn
            sy = float(sv @ yv)
            step = float(sv @ sv) / sy if sy > 0 else 2.0 * t
        x, lf = xn, ln
    raise ModeNotFoundError(f"mode search did not converge in {max_iter} iterations", x)


def make_bundle(target, envelope, superexp, curvature, init=None, name="target",
                strong_convexity=None, grad_lipschitz=None, mode=None, tol=1e-8, meta=None):
    """Locate the mode (unless given) and assemble a :class:`TargetBundle`."""
    if mode is None:
        init = np.zeros(target.dim) if init is None else init
        mode, p_star = find_mode(target, init, tol=tol)
    else:
        mode = np.atleast_1d(np.asarray(mode, dtype=float))
        p_star = math.exp(float(target.logpdf(mode)))
    return TargetBundle(target=target, envelope=envelope, superexp=superexp, curvature=curvature,
                        p_star=p_star, mode=mode, name=name, strong_convexity=strong_convexity,
                        grad_lipschitz=grad_lipschitz, meta=dict(meta or {}))


# ---------------------------------------------------------------------------
# built-in Gaussian targets


def gaussian_target(scale: float = 1.0, dim: int = 1, mean=None) -> LogTarget:
    """Isotropic N(mean, scale^2 I)."""
    mu = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float).reshape(dim)
    s2 = float(scale) ** 2
    c = -0.5 * dim * math.log(2.0 * math.pi * s2)

    def logf(x):
        d = x - mu
        return c - 0.5 * np.sum(d * d, axis=-1) / s2

    def grad(x):
        return -(x - mu) / s2

    def hess(x):
        return -np.eye(dim) / s2

    spec = KernelSpec(KIND_GAUSSIAN, mu.copy(), np.full(dim, 1.0 / s2), np.zeros((1, dim)), c)
    return LogTarget(dim=dim, log_density=logf, grad_log_density=grad, hess_log_density=hess,
                     kernel=spec, gaussian=(mu.copy(), s2 * np.eye(dim)))


def gaussian_bundle(scale: float = 1.0, dim: int = 1, eta: float = 0.99) -> TargetBundle:
    """N(0, scale^2 I) with f_s(u) = u / scale^2, C1 = 0, M* = 0."""
    t = gaussian_target(scale, dim)
    s2 = float(scale) ** 2
    c = -0.5 * dim * math.log(2.0 * math.pi * s2)
    const = abs(c)
    env = EnvelopeFn(lambda r: 0.5 * np.asarray(r, dtype=float) ** 2 / s2 + const)
    return TargetBundle(target=t, envelope=env, superexp=SuperexpCert.linear(1.0 / s2),
                        curvature=CurvatureCert.clamped(eta), p_star=math.exp(c),
                        mode=np.zeros(dim), name=f"gaussian(scale={scale:g}, dim={dim})",
                        strong_convexity=1.0 / s2, grad_lipschitz=1.0 / s2)


def standard_normal_bundle(dim: int = 1, eta: float = 0.99) -> TargetBundle:
    b = gaussian_bundle(1.0, dim, eta)
    return replace(b, name=f"standard_normal(dim={dim})")


# ---------------------------------------------------------------------------
# combinators


def _quality(*qs, force_approx=False):
    if force_approx or any(NormQuality(q) is NormQuality.APPROXIMATE for q in qs):
        return NormQuality.APPROXIMATE
    return NormQuality.EXACT


def _sum_rate(s1: SuperexpCert, s2: SuperexpCert) -> SuperexpCert:
    C1 = s1.C1 + s2.C1
    M_s = max(s1.M_s, s2.M_s)
    if s1.slope is not None and s2.slope is not None:
        return SuperexpCert.linear(s1.slope + s2.slope, C1, M_s)
    return SuperexpCert(f_s=lambda u: s1.f_s(u) + s2.f_s(u), C1=C1, M_s=M_s)


def _min_rate(s1: SuperexpCert, s2: SuperexpCert) -> SuperexpCert:
    C1 = max(s1.C1, s2.C1)
    M_s = max(s1.M_s, s2.M_s)
    if s1.slope is not None and s2.slope is not None:
        return SuperexpCert.linear(min(s1.slope, s2.slope), C1, M_s)
    return SuperexpCert(f_s=lambda u: np.minimum(s1.f_s(u), s2.f_s(u)), C1=C1, M_s=M_s)


def _min_curv(c1: CurvatureCert, c2: CurvatureCert) -> CurvatureCert:
    return CurvatureCert(eta=min(c1.eta, c2.eta), M_p=max(c1.M_p, c2.M_p))


def _both(a, b, fn):
    return None if a is None or b is None else fn(a, b)


def combine_product(b1: TargetBundle, b2: TargetBundle, normalized: bool = False,
                    name: str | None = None) -> TargetBundle:
    """Bundle for ``f = f1 f2``.

    The caller asserts with ``normalized=True`` that the product integrates
    to one; otherwise the result is marked approximate.
    """
    if b1.dim != b2.dim:
        raise ValueError(f"dimension mismatch: {b1.dim} vs {b2.dim}")
    t1, t2 = b1.target, b2.target

    def logf(x):
        return t1.log_density(x) + t2.log_density(x)

    def grad(x):
        return t1.grad_log_density(x) + t2.grad_log_density(x)

    hess = None
    if t1.hess_log_density is not None and t2.hess_log_density is not None:
        def hess(x):
            return t1.hess_log_density(x) + t2.hess_log_density(x)

    t = LogTarget(dim=b1.dim, log_density=logf, grad_log_density=grad, hess_log_density=hess,
                  log_norm_offset=t1.log_norm_offset + t2.log_norm_offset,
                  norm_quality=_quality(t1.norm_quality, t2.norm_quality, force_approx=not normalized))
    env = _both(b1.envelope, b2.envelope,
                lambda e1, e2: EnvelopeFn(lambda r: e1(r) + e2(r)))
    sup = _both(b1.superexp, b2.superexp, _sum_rate)
    curv = _both(b1.curvature, b2.curvature, _min_curv)
    m = _both(b1.strong_convexity, b2.strong_convexity, lambda a, b: a + b)
    L = _both(b1.grad_lipschitz, b2.grad_lipschitz, lambda a, b: a + b)
    return make_bundle(t, env, sup, curv, init=b1.mode, name=name or f"({b1.name})*({b2.name})",
                       strong_convexity=m, grad_lipschitz=L)


def combine_mixture(b1: TargetBundle, b2: TargetBundle, a1: float, a2: float,
                    name: str | None = None) -> TargetBundle:
    """Bundle for ``f = a1 f1 + a2 f2``."""
    if b1.dim != b2.dim:
        raise ValueError(f"dimension mismatch: {b1.dim} vs {b2.dim}")
    if a1 < 0 or a2 < 0 or abs(a1 + a2 - 1.0) > 1e-12:
        raise ValueError(f"mixture weights must be non-negative and sum to 1, got {a1!r}, {a2!r}")
    t1, t2 = b1.target, b2.target
    with np.errstate(divide="ignore"):
        la1, la2 = np.log(a1), np.log(a2)

    def _parts(x):
        l1 = la1 + t1.log_density(x)
        l2 = la2 + t2.log_density(x)
        return l1, l2, np.logaddexp(l1, l2)

    def logf(x):
        return _parts(x)[2]

    def grad(x):
        l1, l2, l = _parts(x)
        w1 = np.exp(l1 - l)[..., None]
        w2 = np.exp(l2 - l)[..., None]
        g = 0.0
        if a1 > 0:
            g = g + w1 * t1.grad_log_density(x)
        if a2 > 0:
            g = g + w2 * t2.grad_log_density(x)
        return g

    t = LogTarget(dim=b1.dim, log_density=logf, grad_log_density=grad,
                  norm_quality=_quality(t1.norm_quality, t2.norm_quality))
    env = _both(b1.envelope, b2.envelope,
                lambda e1, e2: EnvelopeFn(lambda r: np.logaddexp(e1(r) + e2(r), 0.0)))
    sup = _both(b1.superexp, b2.superexp, _min_rate)
    curv = _both(b1.curvature, b2.curvature, _min_curv)
    # start the ascent from whichever component mode is higher under f
    inits = [b1.mode, b2.mode]
    init = max(inits, key=lambda z: float(logf(z)))
    return make_bundle(t, env, sup, curv, init=init, name=name or f"mix({b1.name}, {b2.name})")


def _mixture_component(a: float, swap: bool, constant: float) -> TargetBundle:
    prec = np.array([2.0, 2.0 * a]) if swap else np.array([2.0 * a, 2.0])
    c = math.log(math.sqrt(a) / math.pi)

    def logf(x):
        return c - 0.5 * np.sum(prec * x * x, axis=-1)

    def grad(x):
        return -prec * x

    def hess(x):
        return -np.diag(prec)

    t = LogTarget(dim=2, log_density=logf, grad_log_density=grad, hess_log_density=hess,
                  kernel=KernelSpec(KIND_GAUSSIAN, np.zeros(2), prec.copy(), np.zeros((1, 2)), c),
                  gaussian=(np.zeros(2), np.diag(1.0 / prec)))
    big = max(a, 1.0)
    env = EnvelopeFn(lambda r: big * np.asarray(r, dtype=float) ** 2 + constant)
    sup = SuperexpCert.linear(2.0 * min(a, 1.0))
    curv = CurvatureCert.clamped(min(a, 1.0))
    return TargetBundle(target=t, envelope=env, superexp=sup, curvature=curv, p_star=math.exp(c),
                        mode=np.zeros(2), name=f"component(a={a:g}, swap={swap})",
                        strong_convexity=2.0 * min(a, 1.0), grad_lipschitz=2.0 * big)


def gaussian_mixture_bundle(a: float, envelope_constant: str = "published") -> TargetBundle:
    """Equal-weight mixture of ``sqrt(a)/pi exp(-a x^2 - y^2)`` and its mirror image.

    Components carry ``f_tilde_i(z) = max(a, 1) z^2 + k``, ``f_is(z) = 2 min(a, 1) z``,
    ``C1 = 0``, ``eta_i = min(a, 1)`` (clamped below 1) and ``M* = 0``.

    ``envelope_constant`` selects ``k``: ``"published"`` uses ``sqrt(a)/pi``;
    ``"sound"`` uses ``|log(sqrt(a)/pi)|``, which is what the bound
    ``|log f_i| <= f_tilde_i`` actually requires.
    """
    if not a > 0:
        raise ValueError(f"mixture parameter a must be positive, got {a!r}")
    if envelope_constant == "published":
        k = math.sqrt(a) / math.pi
    elif envelope_constant == "sound":
        k = abs(math.log(math.sqrt(a) / math.pi))
    else:
        raise ValueError(f"envelope_constant must be 'published' or 'sound', got {envelope_constant!r}")
    with warnings.catch_warnings():
        if a >= 1.0:
            warnings.simplefilter("always")
        b1 = _mixture_component(a, False, k)
        b2 = _mixture_component(a, True, k)
    out = combine_mixture(b1, b2, 0.5, 0.5, name=f"gaussian_mixture(a={a:g})")
    return out


# ---------------------------------------------------------------------------
# assumption checks


def fd_hessian(grad, x, h=1e-5):
    """Symmetrized central-difference Hessian built from gradients."""
    x = np.asarray(x, dtype=float)
    p = x.size
    H = np.empty((p, p))
    for j in range(p):
        e = np.zeros(p)
        step = h * max(1.0, abs(x[j]))
        e[j] = step
        H[:, j] = (np.asarray(grad(x + e)) - np.asarray(grad(x - e))) / (2 * step)
    return 0.5 * (H + H.T)


@dataclass
class CheckResult:
    name: str
    n_checked: int = 0
    n_failed: int = 0
    worst_margin: float = -math.inf
    worst_point: Optional[list] = None
    failures: list = field(default_factory=list)
    skipped: str = ""

    @property
    def passed(self) -> bool:
        return self.n_failed == 0

    def add(self, point, margin, tol):
        # margin > 0 means the inequality is violated by that much
        self.n_checked += 1
        if margin > self.worst_margin:
            self.worst_margin = float(margin)
            self.worst_point = [float(v) for v in point]
        if margin > tol:
            self.n_failed += 1
            self.failures.append({"radius": float(np.linalg.norm(point)),
                                  "point": [float(v) for v in point], "margin": float(margin)})

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "n_checked": self.n_checked,
                "n_failed": self.n_failed, "worst_margin": self.worst_margin,
                "worst_point": self.worst_point, "failures": self.failures[:50],
                "skipped": self.skipped}


@dataclass
class AssumptionReport:
    """Outcome of :func:`verify_assumptions`.

    A failed check falsifies the corresponding certificate.  Passing checks
    are evidence only: the sampler sees finitely many points.
    """

    bundle_name: str
    radii: list
    n_directions: int
    seed: int
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed_radii(self, name):
        return sorted({f["radius"] for f in self.checks[name].failures})

    def to_dict(self):
        return {"bundle": self.bundle_name, "radii": [float(r) for r in self.radii],
                "n_directions": self.n_directions, "seed": self.seed, "passed": self.passed,
                "note": "sampled falsification only; passing is evidence, not proof",
                "checks": {k: v.to_dict() for k, v in self.checks.items()}}


def default_radii(M_star: float):
    base = max(M_star, 1.0)
    return [base * k for k in (1.1, 1.5, 2.0, 4.0, 8.0)]


def probe_directions(p, n_random, seed):
    """Seeded uniform directions plus the coordinate axes and the diagonals."""
    rng = np.random.default_rng(seed)
    dirs = [uniform_directions(rng, n_random, p)] if n_random > 0 else []
    eye = np.eye(p)
    dirs.append(np.vstack([eye, -eye]))
    if p > 1:
        k = min(p, 3)
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
        diag = np.zeros((signs.shape[0], p))
        diag[:, :k] = signs / math.sqrt(k)
        dirs.append(diag)
    return np.vstack(dirs)


def verify_assumptions(bundle: TargetBundle, radii=None, n_directions: int = 64, seed: int = 0,
                       check_log_concavity: bool = True, tol: float = 1e-9,
                       concavity_tol: float = 1e-6) -> AssumptionReport:
    """Probe the certificates of ``bundle`` on spheres of the given radii.

    Checks, at ``x = r xi``:

    * ``superexp``: ``<xi, grad log f(x)> <= C1 - f_s(r)`` for ``r > M_s``;
    * ``curvature``: ``<xi, grad f / |grad f|> <= -eta`` for ``r > M_p``;
    * ``envelope``: ``|log f(x)| <= f_tilde(r)``;
    * ``log_concavity`` (optional): the finite-difference Hessian of
      ``log f`` has no eigenvalue above ``concavity_tol``.

    Directions are ``n_directions`` seeded uniform draws plus the coordinate
    axes and diagonals.  Radii default to ``max(M*, 1) * {1.1, 1.5, 2, 4, 8}``.
    """
    if n_directions < 1:
        raise ValueError("n_directions must be at least 1")
    radii = default_radii(bundle.M_star) if radii is None else [float(r) for r in radii]
    p = bundle.dim
    dirs = probe_directions(p, n_directions, seed)
    t = bundle.target
    sup, curv, env = bundle.superexp, bundle.curvature, bundle.envelope
    checks = {k: CheckResult(k) for k in ("superexp", "curvature", "envelope", "log_concavity")}
    if sup is None:
        checks["superexp"].skipped = "no superexponential certificate"
    if curv is None:
        checks["curvature"].skipped = "no curvature certificate"
    if env is None:
        checks["envelope"].skipped = "no envelope"
    if not check_log_concavity:
        checks["log_concavity"].skipped = "disabled"
    for r in radii:
        xs = r * dirs
        lf = np.asarray(t.log_density(xs), dtype=float)
        g = np.asarray(t.grad_log_density(xs), dtype=float)
        radial = np.sum(dirs * g, axis=1)
        if sup is not None and r > sup.M_s:
            rhs = sup.C1 - float(sup.f_s(r))
            for x, v in zip(xs, radial):
                checks["superexp"].add(x, v - rhs, tol * (1 + abs(rhs)))
        if curv is not None and r > curv.M_p:
            gn = np.linalg.norm(g, axis=1)
            cos = np.where(gn > 0, radial / np.where(gn > 0, gn, 1.0), 0.0)
            for x, c in zip(xs, cos):
                checks["curvature"].add(x, c + curv.eta, tol)
        if env is not None:
            bound = float(env(r))
            for x, v in zip(xs, lf):
                checks["envelope"].add(x, abs(v) - bound, tol * (1 + bound))
        if check_log_concavity:
            for x in xs:
                H = fd_hessian(t.grad_log_density, x)
                checks["log_concavity"].add(x, float(np.linalg.eigvalsh(H)[-1]), concavity_tol)
    return AssumptionReport(bundle_name=bundle.name, radii=radii, n_directions=n_directions,
                            seed=seed, checks=checks)


def check_envelope(bundle: TargetBundle, n: int = 1000, max_radius: float = 10.0, seed: int = 0):
    """Worst value of ``|log f(x)| - f_tilde(|x|)`` over ``n`` seeded points in the ball.

    Returns ``(worst_margin, worst_point)``; a positive margin is a violation.
    """
    rng = np.random.default_rng(seed)
    dirs = uniform_directions(rng, n, bundle.dim)
    r = max_radius * rng.random(n) ** (1.0 / bundle.dim)
    xs = r[:, None] * dirs
    margin = np.abs(bundle.target.log_density(xs)) - np.asarray(bundle.envelope(r), dtype=float)
    k = int(np.argmax(margin))
    return float(margin[k]), xs[k]
