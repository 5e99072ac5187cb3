"""Drift and minorization constants, and numerical verifiers for them.

The certificate establishes, with ``V(x) = f(x)^(-1/2)``,

    PV(x) <= lambda_tilde V(x) + b          for all x,
    P(x, .) >= eta_tilde nu(.)              for x in B(0, R_max),

with ``nu`` uniform on the closed ball ``B(0, R_max)``.

Every constant that can overflow (``b``) or underflow (``eta_tilde``) is
carried in log form as well.  A certificate whose ``log eta_tilde`` is below
-700 is flagged vacuous.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from ._math import log_unit_ball_volume, seed_sequence
from .geometry import ConeParams, cone_box_mass, cone_radius, drift_factor, epsilon_delta
from .grid import Grid1D, Grid2D
from .proposal import RadialProposal, support_radius
from .target import TargetBundle

LOG_VACUOUS = -700.0

DRIFT_FN_DESCR = "V(x)=f(x)^{-1/2}"
NU_DESCR = "uniform on closed ball B(0,R_max)"


class DegenerateBracketError(RuntimeError):
    pass


def _exp(v):
    return math.exp(v) if v < 709.0 else math.inf


@dataclass(frozen=True)
class DriftMinCert:
    """Full constant set of the drift and minorization certificate."""

    p: int
    eps_alpha: float
    K: float
    R_alpha: float
    box_mass: float
    lambda_tilde: float
    eps: float
    delta: float
    K_eps: float
    R_eps: float
    R_eps_terms: dict
    log_b: float
    b: float
    R_max: float
    log_eta_tilde: float
    eta_tilde: float
    vacuous: bool
    p_star: float
    M_star: float
    norm_quality: str
    small_set_radius: float
    drift_fn_descr: str = DRIFT_FN_DESCR
    nu_descr: str = NU_DESCR
    notes: tuple = ()

    def to_dict(self):
        return asdict(self)


def drift_certificate(bundle: TargetBundle, prop: RadialProposal, params: ConeParams | None = None,
                      eps: float | None = None, delta: float | None = None) -> DriftMinCert:
    """Compute lambda_tilde, eps, delta, K_eps, R_eps, b, R_max and eta_tilde.

    Parameters
    ----------
    bundle : TargetBundle
        Must carry envelope, superexponential and curvature certificates.
    prop : RadialProposal
    params : ConeParams, optional
        Defaults to ``ConeParams.from_eta(bundle.curvature.eta)``.
    eps, delta : float, optional
        Overrides of the default choices (largest admissible ``eps``, half of
        the strict upper limit for ``delta``).

    Notes
    -----
    ``R_eps`` is the largest of

    1. ``f_s^-1(C1 - log(eps) / delta) + K_eps``;
    2. ``2 K_eps^2 / ((eps / (q(0) C_B(p) delta))^(1/(p-1)) - K_eps) + K_eps``
       (omitted when p = 1, where the exponent is undefined);
    3. ``f_s^-1(C1 - log(min(exp(-f_tilde(max(f_s^-1(C1), M*))) / p*, 1))) + 1``;
    4. ``max(M* + K_eps, 1)``.
    """
    bundle.require_certificates()
    p = bundle.dim
    if prop.dim != p:
        raise ValueError(f"proposal dim {prop.dim} does not match target dim {p}")
    if params is None:
        params = ConeParams.from_eta(bundle.curvature.eta)
    sup, env = bundle.superexp, bundle.envelope
    C1, M_star = sup.C1, bundle.M_star
    notes = []

    Q = cone_box_mass(prop, params)
    lam = drift_factor(prop, p, params, box_mass=Q)
    eps, delta_default, K_eps = epsilon_delta(prop, p, params, box_mass=Q, eps=eps)
    if delta is None:
        delta = delta_default
    elif not delta > 0:
        raise ValueError(f"delta must be positive, got {delta!r}")
    log_cb = log_unit_ball_volume(p)

    terms = {}
    terms["rate"] = sup.inverse(C1 - math.log(eps) / delta) + K_eps
    if p >= 2:
        log_ratio = math.log(eps) - prop.log_q0 - log_cb - math.log(delta)
        bracket = math.exp(log_ratio / (p - 1)) - K_eps
        if not bracket > 0:
            raise DegenerateBracketError(
                f"R_eps bracket degenerate; shrink delta (bracket={bracket!r}, K_eps={K_eps!r})")
        terms["shell"] = 2.0 * K_eps**2 / bracket + K_eps
    else:
        warnings.warn("second R_eps term needs p >= 2; omitted at p = 1", stacklevel=2)
        notes.append("R_eps shell term omitted at p=1")
    r0 = max(sup.inverse(C1), M_star)
    log_inner = min(-float(env(r0)) - math.log(bundle.p_star), 0.0)
    terms["level"] = sup.inverse(C1 - log_inner) + 1.0
    terms["floor"] = max(M_star + K_eps, 1.0)
    R_eps = max(terms.values())

    half_env = 0.5 * float(env(R_eps))
    log_b = math.log(3.0) + half_env
    b = 3.0 * _exp(half_env)

    # log((1 - lam)^2 / (2 p* (2b + eps_alpha)^2))
    log_2b_ea = np.logaddexp(math.log(2.0) + log_b, math.log(params.eps_alpha))
    log_arg = 2.0 * math.log1p(-lam) - math.log(2.0) - math.log(bundle.p_star) - 2.0 * float(log_2b_ea)
    R_max = max(sup.inverse(C1 - min(log_arg, 0.0)), M_star)

    if R_max > 0:
        log_eta = (-2.0 * float(env(R_max)) + float(prop.radial_log_density(R_max))
                   + log_cb + p * math.log(R_max))
    else:
        log_eta = -math.inf
    vacuous = not (log_eta >= LOG_VACUOUS)
    if log_eta > 0:
        notes.append("eta_tilde above 1 capped at 1")
        log_eta = 0.0
    eta_tilde = math.exp(log_eta) if log_eta > -math.inf else 0.0
    if vacuous:
        notes.append("eta_tilde underflows (log eta_tilde < -700); certificate vacuous")

    return DriftMinCert(
        p=p, eps_alpha=params.eps_alpha, K=params.K, R_alpha=cone_radius(params), box_mass=Q,
        lambda_tilde=lam, eps=eps, delta=delta, K_eps=K_eps, R_eps=R_eps,
        R_eps_terms=terms, log_b=log_b, b=b, R_max=R_max, log_eta_tilde=log_eta,
        eta_tilde=eta_tilde, vacuous=vacuous, p_star=bundle.p_star, M_star=M_star,
        norm_quality=bundle.norm_quality.value, small_set_radius=R_max, notes=tuple(notes))


# ---------------------------------------------------------------------------
# drift verification


@dataclass
class DriftReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["drift_pass"] and (r["tail_pass"] is not False) for r in self.rows)

    @property
    def max_violation_se(self) -> float:
        """Largest violation of the drift inequality in standard errors (<= 0 when none)."""
        return max((r["violation_se"] for r in self.rows), default=-math.inf)

    def to_dict(self):
        return {"passed": self.passed, "max_violation_se": self.max_violation_se, "rows": self.rows}


def _drift_ratio(log_h):
    # PV/V per draw: sqrt(h) + 1 - h on rejection side, h^(-1/2) when h >= 1
    lo = log_h < 0
    out = np.empty_like(log_h)
    hl = log_h[lo]
    out[lo] = np.exp(0.5 * hl) - np.expm1(hl)
    out[~lo] = np.exp(-0.5 * log_h[~lo])
    return out


def verify_drift_mc(cert: DriftMinCert, bundle: TargetBundle, prop: RadialProposal, points,
                    n: int = 100_000, seed: int = 0, n_se: float = 3.0) -> DriftReport:
    """Monte Carlo check of ``PV <= lambda_tilde V + b`` at the given points.

    Everything is computed relative to ``V(x)``: the estimate is of
    ``PV(x)/V(x)`` and the test is
    ``ratio <= lambda_tilde + b/V(x) + n_se * SE``.  For ``|x| > R_eps`` the
    tail form ``ratio <= lambda_tilde + n_se * SE`` is also tested; inside
    ``R_eps`` that form is not required and the row says so.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != bundle.dim:
        pts = pts.reshape(-1, bundle.dim)
    seeds = seed_sequence(seed).spawn(len(pts))
    rep = DriftReport()
    t = bundle.target
    for x, ss in zip(pts, seeds):
        rng = np.random.default_rng(ss)
        y = x + prop.increment_sampler(rng, n)
        lfx = float(t.logpdf(x))
        log_h = np.asarray(t.logpdf(y), dtype=float) - lfx
        log_h = np.where(np.isfinite(log_h), log_h, -np.inf)
        r = _drift_ratio(log_h)
        mean = float(r.mean())
        se = float(r.std(ddof=1) / math.sqrt(n))
        log_V = -0.5 * lfx
        b_over_V = _exp(cert.log_b - log_V)
        bound = cert.lambda_tilde + b_over_V
        norm = float(np.linalg.norm(x))
        tail_app = norm > cert.R_eps
        tail_pass = (mean <= cert.lambda_tilde + n_se * se) if tail_app else None
        viol = (mean - bound) / se if se > 0 else (math.inf if mean > bound else -math.inf)
        rep.rows.append({
            "point": [float(v) for v in x], "norm": norm, "log_V": log_V, "ratio_hat": mean,
            "se": se, "log_PV_hat": (math.log(mean) + log_V) if mean > 0 else -math.inf,
            "bound_ratio": bound, "drift_pass": bool(mean <= bound + n_se * se),
            "violation_se": float(viol) if math.isfinite(viol) else (-1e300 if viol < 0 else 1e300),
            "tail_applicable": tail_app, "tail_pass": tail_pass,
            "note": "" if tail_app else "inside R_eps: tail contraction not required",
        })
    return rep


# ---------------------------------------------------------------------------
# minorization verification


@dataclass
class MinorReport:
    eta_tilde: float
    log_eta_tilde: float
    R_max: float
    tol: float
    n_points: int
    n_sets: int
    worst_margin: float
    worst: dict
    failures: list
    max_quad_error: float
    ball_checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures and all(c["pass"] for c in self.ball_checks)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _alpha_q(t: TargetBundle, prop, lfx, x):
    def fn(*y):
        yv = np.array(y, dtype=float)
        la = min(0.0, float(t.target.logpdf(yv)) - lfx)
        r = math.sqrt(float(np.sum((yv - x) ** 2)))
        return math.exp(la + float(prop.radial_log_density(r)))
    return fn


def _ball_fraction_1d(lo, hi, R):
    a, b = max(lo[0], -R), min(hi[0], R)
    return max(b - a, 0.0)


def _ball_fraction_2d(lo, hi, R):
    corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]], [hi[0], lo[1]], [hi[0], hi[1]]])
    if np.all(np.linalg.norm(corners, axis=1) <= R):
        return float(np.prod(hi - lo))
    nearest = np.clip(0.0, lo, hi)
    if np.linalg.norm(nearest) > R:
        return 0.0

    def chord(u):
        if abs(u) >= R:
            return 0.0
        h = math.sqrt(R * R - u * u)
        return max(min(hi[1], h) - max(lo[1], -h), 0.0)

    v, _ = integrate.quad(chord, max(lo[0], -R), min(hi[0], R), epsabs=1e-13, limit=200)
    return v


def verify_minorization_grid(cert: DriftMinCert, bundle: TargetBundle, prop: RadialProposal,
                             grid, n_points: int = 50, n_sets: int = 200, seed: int = 0,
                             tol: float = 1e-8, eta_tilde: float | None = None,
                             R_max: float | None = None) -> MinorReport:
    """Quadrature check of ``P(x, A) >= eta_tilde nu(A) - tol``.

    ``x`` runs over up to ``n_points`` grid centers inside ``B(0, R_max)``;
    ``A`` runs over every single cell and ``n_sets`` seeded random unions of
    cells.  ``P(x, A)`` is the integral of ``alpha q`` over ``A`` plus the
    rejection mass when ``x`` lies in ``A``.  When ``B(0, R_max)`` fits
    inside the grid the whole-ball inequality ``P(x, B) >= eta_tilde`` is
    also checked.

    ``eta_tilde`` and ``R_max`` override the certificate values, which lets
    a candidate constant be tested directly.
    """
    p = bundle.dim
    if p > 2 or grid.dim != p:
        raise ValueError("oracle restricted to p <= 2 (grid and target dims must agree)")
    eta = cert.eta_tilde if eta_tilde is None else float(eta_tilde)
    R = cert.R_max if R_max is None else float(R_max)
    log_eta = math.log(eta) if eta > 0 else -math.inf
    vol_B = math.exp(log_unit_ball_volume(p) + p * math.log(R))
    W = support_radius(prop, min(tol * 1e-3, 1e-12))
    centers = grid.centers
    n_cells = grid.n_total
    bounds = [grid.cell_bounds(j) for j in range(n_cells)]
    frac = _ball_fraction_1d if p == 1 else _ball_fraction_2d
    nu = np.array([frac(lo, hi, R) for lo, hi in bounds]) / vol_B

    inside = np.flatnonzero(np.linalg.norm(centers, axis=1) <= R)
    notes = []
    if inside.size == 0:
        notes.append("no grid center lies inside B(0, R_max)")
    pick = inside[np.unique(np.linspace(0, inside.size - 1, min(n_points, inside.size)).round().astype(int))] \
        if inside.size else inside

    rng = np.random.default_rng(seed)
    sets = [np.array([j]) for j in range(n_cells)]
    for _ in range(n_sets):
        k = int(rng.integers(1, max(2, n_cells // 2) + 1))
        sets.append(np.sort(rng.choice(n_cells, size=k, replace=False)))

    failures, ball_checks = [], []
    worst = {"margin": -math.inf}
    max_err = 0.0
    for ix in pick:
        x = centers[ix]
        lfx = float(bundle.target.logpdf(x))
        fn = _alpha_q(bundle, prop, lfx, x)
        m = np.zeros(n_cells)
        for j, (lo, hi) in enumerate(bounds):
            if np.any(hi < x - W) or np.any(lo > x + W):
                continue
            lo_c, hi_c = np.maximum(lo, x - W), np.minimum(hi, x + W)
            if p == 1:
                pts = [x[0]] if lo_c[0] < x[0] < hi_c[0] else None
                v, e = integrate.quad(fn, lo_c[0], hi_c[0], points=pts, epsabs=tol * 1e-3,
                                      epsrel=1e-10, limit=200)
            else:
                v, e = integrate.nquad(fn, [(lo_c[0], hi_c[0]), (lo_c[1], hi_c[1])],
                                       opts={"epsabs": tol * 1e-3, "epsrel": 1e-10, "limit": 100})
            m[j] = v
            max_err = max(max_err, e)
        # rejection mass: 1 minus the full move probability over the window
        if p == 1:
            a1, e1 = integrate.quad(fn, x[0] - W, x[0], epsabs=tol * 1e-3, epsrel=1e-12, limit=400)
            a2, e2 = integrate.quad(fn, x[0], x[0] + W, epsabs=tol * 1e-3, epsrel=1e-12, limit=400)
            accept, err = a1 + a2, e1 + e2
        else:
            accept, err = integrate.nquad(fn, [(x[0] - W, x[0] + W), (x[1] - W, x[1] + W)],
                                          opts={"epsabs": tol * 1e-3, "epsrel": 1e-10, "limit": 100})
        max_err = max(max_err, err)
        reject = max(1.0 - accept, 0.0)
        for s in sets:
            PA = float(m[s].sum()) + (reject if ix in s else 0.0)
            nuA = float(nu[s].sum())
            rhs = math.exp(log_eta + math.log(nuA)) if nuA > 0 and eta > 0 else 0.0
            margin = rhs - tol - PA
            if margin > worst["margin"]:
                worst = {"margin": margin, "x": x.tolist(), "set_size": int(s.size),
                         "P_xA": PA, "nu_A": nuA}
            if margin > 0:
                failures.append({"x": x.tolist(), "cells": s.tolist()[:20], "P_xA": PA,
                                 "nu_A": nuA, "margin": margin})
        if grid.covers(R):
            # P(x, B) over the whole ball
            if p == 1:
                lo_b, hi_b = max(-R, x[0] - W), min(R, x[0] + W)
                v, e = integrate.quad(fn, lo_b, hi_b, points=[x[0]] if lo_b < x[0] < hi_b else None,
                                      epsabs=tol * 1e-3, limit=400)
                PB = v + reject
                ball_checks.append({"x": x.tolist(), "P_xB": PB, "eta_tilde": eta,
                                    "pass": bool(PB >= eta - tol)})
            elif np.linalg.norm(x) + W <= R:
                ball_checks.append({"x": x.tolist(), "P_xB": 1.0, "eta_tilde": eta,
                                    "pass": bool(1.0 >= eta - tol)})
    if cert.vacuous and eta_tilde is None:
        notes.append("certificate eta_tilde is vacuous; right-hand side is numerically zero")
    return MinorReport(eta_tilde=eta, log_eta_tilde=log_eta, R_max=R, tol=tol,
                       n_points=int(len(pick)), n_sets=len(sets), worst_margin=float(worst["margin"]),
                       worst=worst, failures=failures[:100], max_quad_error=float(max_err),
                       ball_checks=ball_checks, notes=notes)
