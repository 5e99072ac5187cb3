"""Cone-condition constants: R_alpha, the drift factor, eps and delta."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._math import log_unit_ball_volume, unit_ball_volume
from .proposal import RadialProposal, box_probability, tail_radius

__all__ = [
    "ConeParams",
    "ConeParamError",
    "DegenerateConeError",
    "cone_radius",
    "cone_box",
    "cone_box_mass",
    "drift_factor",
    "epsilon_delta",
    "unit_ball_volume",
]

_ALPHA_MAX = math.acos(7.0 / 8.0)


class ConeParamError(ValueError):
    pass


class DegenerateConeError(RuntimeError):
    pass


@dataclass(frozen=True)
class ConeParams:
    """Cone geometry.

    Parameters
    ----------
    eps_alpha : float
        Cone margin, 0 < eps_alpha < min(eps_alpha_tilde, 1/3).
    K : float
        Cone height, 0 < K <= 1/3.
    alpha : float, optional
        Cone half-angle, below arccos(7/8).  Defaults to just under that
        limit, which makes ``eps_alpha_tilde`` just under 1.
    """

    eps_alpha: float
    K: float = 1.0 / 3.0
    alpha: float | None = None

    def __post_init__(self):
        a = self.alpha
        if a is None:
            object.__setattr__(self, "alpha", _ALPHA_MAX * (1.0 - 1e-12))
        elif not (0.0 < a < _ALPHA_MAX):
            raise ConeParamError(f"cone angle alpha={a!r} must lie in (0, arccos(7/8)={_ALPHA_MAX:.6f})")
        if not (0.0 < self.K <= 1.0 / 3.0):
            raise ConeParamError(f"cone height K={self.K!r} violates 0 < K <= 1/3")
        lim = min(self.eps_alpha_tilde, 1.0 / 3.0)
        if not (0.0 < self.eps_alpha < lim):
            raise ConeParamError(
                f"eps_alpha={self.eps_alpha!r} violates 0 < eps_alpha < min(eps_alpha_tilde, 1/3)"
                f" = {lim:.6g} (cone-volume lemma constraint eps_alpha < 1/3)")

    @property
    def eps_alpha_tilde(self) -> float:
        return math.sqrt(8.0 - 8.0 * math.cos(self.alpha))

    @classmethod
    def from_eta(cls, eta: float, K: float = 1.0 / 3.0, alpha=None) -> "ConeParams":
        """Default margin min(eta, 0.3) shrunk by a relative 1e-9."""
        return cls(eps_alpha=min(eta, 0.3) * (1.0 - 1e-9), K=K, alpha=alpha)


def cone_radius(params: ConeParams) -> float:
    """R_alpha = K c sqrt(1 - c^2) / (1 + sqrt(1 - c^2)) with c = 1 - eps_alpha^2 / 8."""
    c = 1.0 - params.eps_alpha**2 / 8.0
    # 1 - c^2 computed without cancellation
    s = math.sqrt((1.0 - c) * (1.0 + c))
    return params.K * c * s / (1.0 + s)


def cone_box(R_alpha: float, p: int):
    """Lower and upper corners of the box used in the drift factor."""
    w = R_alpha / math.sqrt(p)
    lo = np.full(p, -w)
    hi = np.full(p, w)
    lo[0] -= 1.0
    hi[0] -= 1.0
    return lo, hi


def cone_box_mass(prop: RadialProposal, params: ConeParams, **kw) -> float:
    lo, hi = cone_box(cone_radius(params), prop.dim)
    return box_probability(prop, lo, hi, **kw)


def drift_factor(prop: RadialProposal, p: int, params: ConeParams, box_mass=None) -> float:
    """lambda_tilde = 1 - Q(box) / (1 + eps_alpha)."""
    if p != prop.dim:
        raise ValueError(f"proposal dim {prop.dim} does not match p={p}")
    Q = cone_box_mass(prop, params) if box_mass is None else box_mass
    if not Q > 0.0:
        raise DegenerateConeError("degenerate cone volume: box probability is 0; drift factor undefined")
    return 1.0 - Q / (1.0 + params.eps_alpha)


def epsilon_delta(prop: RadialProposal, p: int, params: ConeParams, box_mass=None, eps=None):
    """Return ``(eps, delta, K_eps)``.

    ``eps`` defaults to its largest admissible value
    ``(1/8) (eps_alpha / (1 + eps_alpha)) Q(box)``; ``delta`` takes half of
    its strict upper limit ``eps / (q(0) C_B(p) K_eps^(p-1))``.
    """
    if p != prop.dim:
        raise ValueError(f"proposal dim {prop.dim} does not match p={p}")
    Q = cone_box_mass(prop, params) if box_mass is None else box_mass
    if not Q > 0.0:
        raise DegenerateConeError("degenerate cone volume: box probability is 0")
    eps_max = params.eps_alpha / (1.0 + params.eps_alpha) * Q / 8.0
    if eps is None:
        eps = eps_max
    elif not (0.0 < eps <= eps_max):
        raise ConeParamError(f"eps={eps!r} must lie in (0, {eps_max!r}]")
    K_eps = tail_radius(prop, eps)
    log_den = math.log(2.0) + prop.log_q0 + log_unit_ball_volume(p) + (p - 1) * math.log(K_eps)
    delta = math.exp(math.log(eps) - log_den)
    return eps, delta, K_eps
