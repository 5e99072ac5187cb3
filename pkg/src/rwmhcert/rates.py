"""Upper and lower bounds on the geometric rate rho.

Upper bound: with ``A = 1 + (4 lam b + 2 lam eps_alpha)/(1 - lam) + 2b`` and
``alpha = (1 - lam + 2b + eps_alpha)/(1 - lam + 2b + lam eps_alpha)``,

    rho <= min over r in (0, 1) of max{(1 - eta)^r, alpha^-(1-r) A^r}.

Lower bounds: acceptance-probability infimum, the bounded-proposal bound,
the mode bound, and two spectral-gap bounds (Dirichlet form and conductance).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from ._math import seed_sequence
from .drift import DriftMinCert
from .proposal import RadialProposal, support_radius
from .target import TargetBundle

R_LO, R_HI = 1e-6, 1.0 - 1e-6

LOWER_METHODS = ("acceptance", "bounded_proposal", "mode", "spectral_dirichlet", "spectral_conductance")


class DegenerateDriftError(ValueError):
    pass


class SpectralAssumptionError(ValueError):
    pass


@dataclass(frozen=True)
class UpperBound:
    t_R: float
    r_star: float
    A: float
    alpha_tilde: float
    vacuous: bool
    log_A: float
    log_alpha_tilde: float
    log_t_R: float

    def __iter__(self):
        # unpacks as (t_R, r_star, A, alpha_tilde, vacuous)
        return iter((self.t_R, self.r_star, self.A, self.alpha_tilde, self.vacuous))


def rosenthal_objective(r, eta_tilde, A, alpha_tilde):
    """``max{(1 - eta)^r, alpha^-(1-r) A^r}`` (vectorized in ``r``)."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        t1 = np.exp(r * np.log1p(-eta_tilde)) if eta_tilde < 1 else np.zeros_like(r)
    t2 = np.exp(-(1.0 - r) * math.log(alpha_tilde) + r * math.log(A))
    return np.maximum(t1, t2)


def _optimize_log(l1, la, lA):
    """Minimize ``max(r l1, -(1-r) la + r lA)`` over ``r`` in [R_LO, R_HI].

    ``l1 = log(1 - eta) <= 0``, ``la = log alpha``, ``lA = log A``.  The
    objective is the max of two linear functions of ``r``, hence convex; its
    minimum sits at the crossing or at an endpoint.
    """

    def obj(r):
        a = r * l1 if l1 > -math.inf else -math.inf
        return max(a, -(1.0 - r) * la + r * lA)

    cands = [R_LO, R_HI]
    den = la + lA - l1
    r_cross = None
    if math.isfinite(den) and den != 0:
        r_cross = la / den
        if R_LO < r_cross < R_HI:
            cands.append(r_cross)
    best = min(cands, key=obj)
    return best, obj(best), r_cross


def rosenthal_optimize(eta_tilde, A, alpha_tilde, log_eta_tilde=None, log_A=None, log_alpha=None):
    """Optimize the exponent for given ``(eta_tilde, A, alpha_tilde)``.

    Returns an :class:`UpperBound`.  ``log_*`` arguments take precedence and
    allow constants far outside the double range.
    """
    if log_eta_tilde is None:
        log_eta_tilde = math.log(eta_tilde) if eta_tilde > 0 else -math.inf
    lA = math.log(A) if log_A is None else float(log_A)
    la = math.log(alpha_tilde) if log_alpha is None else float(log_alpha)
    if log_eta_tilde >= 0.0:
        l1 = -math.inf
    elif log_eta_tilde < -30:
        l1 = -math.exp(log_eta_tilde)
    else:
        l1 = math.log1p(-math.exp(log_eta_tilde))
    r, log_t, _ = _optimize_log(l1, la, lA)
    t = math.exp(log_t) if log_t < 709 else math.inf
    return UpperBound(t_R=t, r_star=r, A=math.exp(lA) if lA < 709 else math.inf,
                      alpha_tilde=math.exp(la) if la < 709 else math.inf,
                      vacuous=bool(log_t >= 0.0), log_A=lA, log_alpha_tilde=la, log_t_R=log_t)


def rosenthal_constants(lambda_tilde, eps_alpha, b=None, log_b=None):
    """``(log A, log alpha_tilde)`` computed stably for huge ``b``."""
    if not (0.0 < lambda_tilde < 1.0):
        if lambda_tilde >= 1.0:
            raise DegenerateDriftError("drift factor degenerate: lambda_tilde must be below 1")
        raise ValueError(f"lambda_tilde must lie in (0, 1), got {lambda_tilde!r}")
    if log_b is None:
        if not b > 0:
            raise ValueError("b must be positive")
        log_b = math.log(b)
    lam, ea = lambda_tilde, eps_alpha
    one_m = 1.0 - lam
    if log_b < 600:
        bb = math.exp(log_b)
        A = 1.0 + (4 * lam * bb + 2 * lam * ea) / one_m + 2 * bb
        alpha = (one_m + 2 * bb + ea) / (one_m + 2 * bb + lam * ea)
        return math.log(A), math.log(alpha)
    # b astronomically large: A ~ b (4 lam / (1 - lam) + 2), alpha - 1 ~ (1 - lam) ea / (2b)
    lA = log_b + math.log(4 * lam / one_m + 2.0)
    la = math.exp(math.log(one_m * ea / 2.0) - log_b)
    return lA, la


def rosenthal_upper(eta_tilde, lambda_tilde, b, eps_alpha, log_b=None, log_eta_tilde=None) -> UpperBound:
    """Optimized coupling bound on rho from the drift/minorization constants."""
    if not (0.0 <= eta_tilde <= 1.0):
        raise ValueError(f"eta_tilde must lie in [0, 1], got {eta_tilde!r}")
    lA, la = rosenthal_constants(lambda_tilde, eps_alpha, b=b, log_b=log_b)
    return rosenthal_optimize(eta_tilde, None, None, log_eta_tilde=log_eta_tilde, log_A=lA, log_alpha=la)


def m_coefficient(lambda_tilde, b, f_at_x):
    """``2 + b / (1 - lambda_tilde) + f(x)^(-1/2)``."""
    if not (0.0 < lambda_tilde < 1.0):
        raise ValueError("lambda_tilde must lie in (0, 1)")
    if not (b > 0 and f_at_x > 0):
        raise ValueError("b and f(x) must be positive")
    return 2.0 + b / (1.0 - lambda_tilde) + f_at_x ** -0.5


# ---------------------------------------------------------------------------
# lower bounds


@dataclass
class LowerBound:
    method: str
    value: float
    vacuous: bool = False
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _floor(v):
    # clamp into [0, 1) and flag the non-informative case
    vac = not (v > 0.0)
    v = min(max(float(v), 0.0), np.nextafter(1.0, 0.0))
    return v, vac


def default_candidates(bundle: TargetBundle, prop: RadialProposal):
    """Mode plus the mode shifted by {1, 2, 4, 8} proposal scales along each axis."""
    c = [bundle.mode.copy()]
    for s in (1.0, 2.0, 4.0, 8.0):
        for j in range(bundle.dim):
            e = np.zeros(bundle.dim)
            e[j] = s * prop.scale
            c.append(bundle.mode + e)
            c.append(bundle.mode - e)
    return c


def acceptance_lower(bundle, prop, candidates, n_mc=100_000, seed=0) -> LowerBound:
    """``1 - min_x alpha_hat(x)`` over the candidate set."""
    from .sampler import estimate_acceptance

    seeds = seed_sequence(seed).spawn(len(candidates))
    rows = []
    for x, ss in zip(candidates, seeds):
        a, se = estimate_acceptance(bundle, prop, x, n_mc, ss)
        rows.append((a, se, np.asarray(x, dtype=float)))
    a_min, se_min, x_min = min(rows, key=lambda t: t[0])
    v, vac = _floor(1.0 - a_min)
    return LowerBound("acceptance", v, vac, {
        "label": "candidate-set lower bound", "argmin": x_min.tolist(), "alpha_hat": a_min,
        "se": se_min, "n_candidates": len(candidates), "n_mc": n_mc,
        "caveat": "minimum over candidates approximates the infimum over R^p"})


def bounded_proposal_lower(bundle, prop, candidates) -> LowerBound:
    """``max_x 1 - q(0)/f(x)`` with the constant bound B(x) = q(0)."""
    lf = np.array([float(bundle.target.logpdf(x)) for x in candidates])
    vals = 1.0 - np.exp(prop.log_q0 - lf)
    k = int(np.argmax(vals))
    v, vac = _floor(vals[k])
    return LowerBound("bounded_proposal", v, vac, {"argmax": np.asarray(candidates[k]).tolist(),
                                                   "B": prop.q0})


def mode_lower(bundle, prop, n_mc=100_000, seed=0, method="auto") -> LowerBound:
    """``1 - E[f(x* + Z)] / p*``.

    ``method`` is ``"analytic"`` (Gaussian target and proposal), ``"quadrature"``
    (p <= 2) or ``"mc"``; ``"auto"`` picks the first that applies.
    """
    t = bundle.target
    x0 = bundle.mode
    lp = float(t.logpdf(x0))
    p = bundle.dim
    if method == "auto":
        if t.gaussian is not None and prop.family == "gaussian":
            method = "analytic"
        elif p <= 2:
            method = "quadrature"
        else:
            method = "mc"
    meta = {"path": method, "mode": x0.tolist()}
    if method == "analytic":
        mean, cov = t.gaussian
        if not np.allclose(mean, x0):
            raise ValueError("analytic mode bound needs the mode at the Gaussian mean")
        s2 = prop.scale**2
        # N(x*; x*, cov + s2 I) / N(x*; x*, cov)
        _, ld_cov = np.linalg.slogdet(cov)
        _, ld_sum = np.linalg.slogdet(cov + s2 * np.eye(p))
        ratio = math.exp(0.5 * (ld_cov - ld_sum))
    elif method == "quadrature":
        if p > 2:
            raise ValueError("quadrature mode bound restricted to p <= 2")
        W = support_radius(prop, 1e-15)

        def fn(*z):
            zv = np.array(z)
            return math.exp(float(t.logpdf(x0 + zv)) - lp + float(prop.radial_log_density(np.linalg.norm(zv))))

        if p == 1:
            v1, e1 = integrate.quad(fn, -W, 0.0, epsabs=1e-13, limit=400)
            v2, e2 = integrate.quad(fn, 0.0, W, epsabs=1e-13, limit=400)
            ratio, err = v1 + v2, e1 + e2
        else:
            ratio, err = integrate.nquad(fn, [(-W, W), (-W, W)], opts={"epsabs": 1e-11, "limit": 100})
        meta["quad_error"] = err
    elif method == "mc":
        rng = np.random.default_rng(seed_sequence(seed))
        y = x0 + prop.increment_sampler(rng, n_mc)
        w = np.exp(np.asarray(t.logpdf(y)) - lp)
        ratio = float(w.mean())
        meta["se"] = float(w.std(ddof=1) / math.sqrt(n_mc))
        meta["n_mc"] = n_mc
    else:
        raise ValueError(f"unknown mode-bound method {method!r}")
    v, vac = _floor(1.0 - ratio)
    return LowerBound("mode", v, vac, meta)


def spectral_lower(mode, m, m1, L, p, V_dagger_0, J_tilde=None) -> float:
    """Spectral lower bounds on rho.

    ``mode="dirichlet"``: ``1 - (1/2) L p exp(-V(0)) / J^(p/2 + 1)``.
    ``mode="conductance"``: ``1 - (2 pi)^(p/2) exp(-V(0)) / (m + m1)^(p/2)``,
    valid only when the subtracted term is below 1.

    Both are floored at 0.  ``m + m1 <= 0`` is rejected for either mode.
    """
    if not (m + m1 > 0):
        raise ValueError(f"spectral bound needs m + m1 > 0 (got m={m!r}, m1={m1!r})")
    if mode == "dirichlet":
        if not (L > 0 and J_tilde is not None and J_tilde > 0):
            raise ValueError("Dirichlet bound needs L > 0 and J_tilde > 0")
        log_term = math.log(0.5 * L * p) - V_dagger_0 - (0.5 * p + 1.0) * math.log(J_tilde)
        return max(0.0, 1.0 - math.exp(log_term))
    if mode == "conductance":
        log_term = 0.5 * p * math.log(2 * math.pi) - V_dagger_0 - 0.5 * p * math.log(m + m1)
        if not log_term < 0.0:
            raise SpectralAssumptionError(
                "conductance validity condition violated: (2 pi)^(p/2) exp(-V(0)) / (m + m1)^(p/2)"
                f" = {math.exp(log_term):.6g} is not below 1")
        return max(0.0, 1.0 - math.exp(log_term))
    raise ValueError(f"unknown spectral mode {mode!r}")


def spectral_lower_bounds(bundle, prop) -> list:
    """Both spectral bounds when the bundle and proposal carry m, L and m1."""
    out = []
    m, L, m1 = bundle.strong_convexity, bundle.grad_lipschitz, prop.m1
    if m1 is None:
        return out
    p = bundle.dim
    meta = {"m": m, "m1": m1, "L": L, "V_dagger_0": prop.v_dagger_0}
    if L is not None:
        v = spectral_lower("dirichlet", m or 0.0, m1, L, p, prop.v_dagger_0, J_tilde=m1)
        out.append(LowerBound("spectral_dirichlet", v, not v > 0, dict(meta, J_tilde=m1)))
    if m is not None:
        try:
            v = spectral_lower("conductance", m, m1, L, p, prop.v_dagger_0)
            out.append(LowerBound("spectral_conductance", v, not v > 0, dict(meta)))
        except SpectralAssumptionError as exc:
            out.append(LowerBound("spectral_conductance", 0.0, True, dict(meta, skipped=str(exc))))
    return out


def lower_bounds(bundle, prop, candidates=None, n_mc=100_000, seed=0, include_spectral=True,
                 mode_method="auto") -> list:
    """All applicable lower bounds as a list of :class:`LowerBound`.

    The automatic candidate set (mode and axis shifts of the mode) is always
    added to the user's candidates.
    """
    if n_mc < 10_000:
        raise ValueError("n_mc must be at least 1e4")
    cands = default_candidates(bundle, prop)
    if candidates is not None:
        cands = [np.atleast_1d(np.asarray(c, dtype=float)) for c in candidates] + cands
    ss = seed_sequence(seed).spawn(2)
    out = [acceptance_lower(bundle, prop, cands, n_mc, ss[0]),
           bounded_proposal_lower(bundle, prop, cands)]
    if bundle.mode is None:
        out.append(LowerBound("mode", 0.0, True, {"skipped": "bundle has no mode"}))
    else:
        out.append(mode_lower(bundle, prop, n_mc, ss[1], mode_method))
    if include_spectral:
        out.extend(spectral_lower_bounds(bundle, prop))
    return out


# ---------------------------------------------------------------------------
# report


@dataclass
class RateReport:
    upper_t_R: float
    r_star: float
    A: float
    alpha_tilde: float
    upper_vacuous: bool
    log_upper_t_R: float
    log_A: float
    log_alpha_tilde: float
    lower_bounds: list
    M_coefficient: float
    log_M_coefficient: float
    norm_quality: str

    def lower(self, method):
        for lb in self.lower_bounds:
            if lb.method == method:
                return lb
        raise KeyError(method)

    def to_dict(self):
        d = asdict(self)
        d["lower_bounds"] = [lb.to_dict() for lb in self.lower_bounds]
        return d


def rate_report(cert: DriftMinCert, lower: list) -> RateReport:
    """Combine a certificate's upper bound with computed lower bounds."""
    ub = rosenthal_upper(cert.eta_tilde, cert.lambda_tilde, cert.b, cert.eps_alpha,
                         log_b=cert.log_b, log_eta_tilde=cert.log_eta_tilde)
    # M coefficient without the state-dependent term, in log form for huge b
    log_M = float(np.logaddexp(math.log(2.0), cert.log_b - math.log1p(-cert.lambda_tilde)))
    return RateReport(upper_t_R=ub.t_R, r_star=ub.r_star, A=ub.A, alpha_tilde=ub.alpha_tilde,
                      upper_vacuous=ub.vacuous, log_upper_t_R=ub.log_t_R, log_A=ub.log_A,
                      log_alpha_tilde=ub.log_alpha_tilde, lower_bounds=list(lower),
                      M_coefficient=math.exp(log_M) if log_M < 709 else math.inf,
                      log_M_coefficient=log_M, norm_quality=cert.norm_quality)
