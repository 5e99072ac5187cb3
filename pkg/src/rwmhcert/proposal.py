"""Symmetric, strictly radially decreasing random-walk proposals.

Two families are built in:

``gaussian``
    ``q(r) = (2 pi s^2)^(-p/2) exp(-r^2 / (2 s^2))``.  Separable, so box
    probabilities are products of scalar CDF differences.
``laplace``
    ``q(r) proportional to exp(-r / s)``.  The radius of an increment is
    Gamma(p, s) distributed, which gives the normalizer
    ``p C_B(p) Gamma(p) s^p``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from ._math import log_unit_ball_volume
from .roots import invert_monotone

FAMILIES = ("gaussian", "laplace")


class CubatureError(RuntimeError):
    """Raised when a box probability misses its tolerance.

    ``best_estimate`` and ``error`` carry the value that was obtained.
    """

    def __init__(self, msg, best_estimate, error):
        super().__init__(f"{msg} (best estimate {best_estimate!r}, error {error!r})")
        self.best_estimate = best_estimate
        self.error = error


@dataclass(frozen=True)
class RadialProposal:
    """Isotropic random-walk increment law on R^p.

    Parameters
    ----------
    dim : int
        Dimension p.
    family : {"gaussian", "laplace"}
        Radial profile.
    scale : float
        Standard deviation per axis (gaussian) or decay length (laplace).
    """

    dim: int
    family: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"proposal dim must be a positive integer, got {self.dim!r}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown proposal family {self.family!r}; expected one of {FAMILIES}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"proposal scale must be positive and finite, got {self.scale!r}")

    # --- density -----------------------------------------------------------
    @property
    def log_q0(self) -> float:
        p, s = self.dim, self.scale
        if self.family == "gaussian":
            return -0.5 * p * math.log(2.0 * math.pi * s * s)
        return -(math.log(p) + log_unit_ball_volume(p) + float(gammaln(p)) + p * math.log(s))

    @property
    def q0(self) -> float:
        return math.exp(self.log_q0)

    @property
    def logq_coeffs(self):
        """``(log q(0), c1, c2)`` with ``log q(r) = log q(0) - c1 r - c2 r^2``."""
        if self.family == "gaussian":
            return self.log_q0, 0.0, 0.5 / self.scale**2
        return self.log_q0, 1.0 / self.scale, 0.0

    def radial_log_density(self, r):
        a, c1, c2 = self.logq_coeffs
        r = np.asarray(r, dtype=float)
        return a - c1 * r - c2 * r * r

    def radial_density(self, r):
        return np.exp(self.radial_log_density(r))

    @property
    def v_dagger_0(self) -> float:
        """V_dagger(0) = -log q(0)."""
        return -self.log_q0

    @property
    def m1(self):
        """Strong-convexity modulus of -log q, or None when it is not strongly convex."""
        return 1.0 / self.scale**2 if self.family == "gaussian" else None

    # --- radial law --------------------------------------------------------
    @property
    def radius_law(self):
        """Frozen scipy distribution of the increment norm."""
        if self.family == "gaussian":
            return stats.chi(df=self.dim, scale=self.scale)
        return stats.gamma(a=self.dim, scale=self.scale)

    def tail_mass(self, K) -> float:
        """Q(0, B(0, K)^c)."""
        if K <= 0:
            return 1.0
        if self.family == "gaussian":
            return float(stats.chi2.sf((K / self.scale) ** 2, self.dim))
        return float(stats.gamma.sf(K / self.scale, a=self.dim))

    @property
    def separable(self) -> bool:
        return self.family == "gaussian" or self.dim == 1

    def marginal_cdf(self, t):
        """One-coordinate CDF; only meaningful when ``separable``."""
        if self.family == "gaussian":
            return stats.norm.cdf(t, scale=self.scale)
        if self.dim == 1:
            return stats.laplace.cdf(t, scale=self.scale)
        raise ValueError("marginal_cdf requires a separable proposal")

    def _marginal_mass(self, lo, hi):
        law = stats.norm(scale=self.scale) if self.family == "gaussian" else stats.laplace(scale=self.scale)
        # evaluate on the side away from the bulk for tail accuracy
        if lo >= 0:
            return float(law.sf(lo) - law.sf(hi))
        return float(law.cdf(hi) - law.cdf(lo))

    # --- sampling ----------------------------------------------------------
    def increment_sampler(self, rng, size=None):
        """Draw increments; shape ``(p,)`` or ``(size, p)``."""
        shape = (self.dim,) if size is None else (int(size), self.dim)
        if self.family == "gaussian":
            return self.scale * rng.standard_normal(shape)
        z = rng.standard_normal(shape)
        z /= np.linalg.norm(z, axis=-1, keepdims=True)
        r = rng.gamma(self.dim, self.scale, size=None if size is None else int(size))
        return z * (r if size is None else r[:, None])


def gaussian_proposal(scale: float = 1.0, dim: int = 1) -> RadialProposal:
    return RadialProposal(dim=dim, family="gaussian", scale=scale)


def laplace_proposal(scale: float = 1.0, dim: int = 1) -> RadialProposal:
    return RadialProposal(dim=dim, family="laplace", scale=scale)


def density_at(prop: RadialProposal, x, y) -> float:
    """q(x, y) = q(|x - y|)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (prop.dim,) or y.shape != (prop.dim,):
        raise ValueError(f"points must have shape ({prop.dim},), got {x.shape} and {y.shape}")
    return float(prop.radial_density(np.linalg.norm(x - y)))


def sample_increment(prop: RadialProposal, rng) -> np.ndarray:
    return prop.increment_sampler(rng)


def box_probability(prop: RadialProposal, lower, upper, tol=1e-10, qmc_points=2**14,
                    qmc_reps=16, qmc_rtol=1e-2, seed=0, return_error=False):
    """Q(0, box) for the axis-aligned box ``[lower, upper]``.

    Separable proposals use exact products of scalar CDF differences.  For
    the others, adaptive cubature is used up to p = 3 (absolute tolerance
    ``tol``) and randomized Sobol quasi-Monte Carlo beyond, in which case the
    standard error across ``qmc_reps`` scrambles is reported.

    Returns
    -------
    float, or (float, float) when ``return_error`` is set.
    """
    lo = np.atleast_1d(np.asarray(lower, dtype=float))
    hi = np.atleast_1d(np.asarray(upper, dtype=float))
    p = prop.dim
    if lo.shape != (p,) or hi.shape != (p,):
        raise ValueError(f"box bounds must have shape ({p},)")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("box bounds must be finite")
    if np.any(hi < lo):
        raise ValueError("box lower bound exceeds upper bound")

    def out(v, e):
        v = float(min(max(v, 0.0), 1.0))
        return (v, float(e)) if return_error else v

    if np.any(hi == lo):
        return out(0.0, 0.0)

    if prop.separable:
        val = 1.0
        for a, b in zip(lo, hi):
            val *= prop._marginal_mass(a, b)
        return out(val, 0.0)

    logq = prop.radial_log_density

    if p <= 3:
        def integrand(*z):
            return math.exp(float(logq(math.sqrt(sum(t * t for t in z)))))

        opts = []
        for a, b in zip(lo, hi):
            o = {"epsabs": tol, "epsrel": 0.0, "limit": 200}
            if a < 0 < b:
                o["points"] = [0.0]
            opts.append(o)
        val, err = integrate.nquad(integrand, list(zip(lo, hi)), opts=opts)
        if err > 10 * tol:
            raise CubatureError("box probability cubature missed tolerance", val, err)
        return out(val, err)

    vol = float(np.prod(hi - lo))
    m = int(2 ** math.ceil(math.log2(qmc_points)))
    ests = np.empty(qmc_reps)
    seeds = np.random.SeedSequence(seed).spawn(qmc_reps)
    for k in range(qmc_reps):
        eng = stats.qmc.Sobol(d=p, scramble=True, seed=np.random.default_rng(seeds[k]))
        u = eng.random(m)
        z = lo + u * (hi - lo)
        ests[k] = vol * np.mean(np.exp(logq(np.linalg.norm(z, axis=1))))
    val = float(ests.mean())
    se = float(ests.std(ddof=1) / math.sqrt(qmc_reps))
    if se > qmc_rtol * abs(val) + 1e-15:
        raise CubatureError("quasi-Monte Carlo box probability missed tolerance", val, se)
    return out(val, se)


def tail_radius(prop: RadialProposal, eps: float) -> float:
    """Smallest K with Q(0, B(0, K)^c) <= eps."""
    if not (0.0 < eps < 1.0):
        raise ValueError(f"tail_radius needs 0 < eps < 1, got {eps!r}")
    return invert_monotone(prop.tail_mass, eps, lo=0.0, hi=prop.scale,
                           increasing=False, xtol=1e-12)


def support_radius(prop: RadialProposal, mass: float = 1e-16) -> float:
    """Radius outside which the proposal carries less than ``mass``."""
    return tail_radius(prop, mass)
