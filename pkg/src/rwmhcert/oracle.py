"""Grid discretization of the RWMH kernel as a ground-truth oracle (p <= 2).

The discrete chain's second-largest eigenvalue modulus (SLEM) stands in for
the continuous rate.  There is no theorem tying the two together; the
sandwich test is a consistency check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import Grid1D, Grid2D, symmetric_grid
from .proposal import RadialProposal


class GridTooCoarseError(RuntimeError):
    pass


class OracleConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiscreteKernel:
    matrix: np.ndarray
    centers: np.ndarray
    cell_volume: float
    log_f: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def discretize(bundle, prop: RadialProposal, grid, use_numba=None) -> DiscreteKernel:
    """Row-stochastic matrix ``P_ij = alpha(x_i, x_j) q(|x_i - x_j|) dV`` with rejection on the diagonal."""
    t = getattr(bundle, "target", bundle)
    if t.dim > 2 or grid.dim != t.dim or prop.dim != t.dim:
        raise ValueError("oracle restricted to p <= 2 with matching grid, target and proposal dims")
    centers = grid.centers
    logf = np.asarray(t.logpdf(centers), dtype=float).reshape(-1)
    P = kernels.assemble_kernel_matrix(centers, logf, grid.cell_volume, prop.logq_coeffs,
                                       use_numba=use_numba)
    d = np.diag(P)
    if np.any(d < -1e-12):
        i = int(np.argmin(d))
        raise GridTooCoarseError(
            f"negative diagonal {d[i]:.3g} at cell {i}: refine grid or shrink extent")
    np.fill_diagonal(P, np.maximum(d, 0.0))
    return DiscreteKernel(matrix=P, centers=centers, cell_volume=grid.cell_volume, log_f=logf)


def default_grid(bundle, prop: RadialProposal):
    """Extent 8 effective standard deviations; 161 cells in 1-D, 61x61 in 2-D."""
    t = getattr(bundle, "target", bundle)
    if t.gaussian is not None:
        sd = math.sqrt(float(np.max(np.linalg.eigvalsh(t.gaussian[1]))))
    elif getattr(bundle, "strong_convexity", None):
        sd = 1.0 / math.sqrt(bundle.strong_convexity)
    else:
        sd = 1.0
    center = float(np.max(np.abs(getattr(bundle, "mode", np.zeros(t.dim)))))
    return symmetric_grid(t.dim, center + 8.0 * sd)


def stationary_and_slem(k: DiscreteKernel, tol: float = 1e-12, max_iter: int = 100_000):
    """Stationary vector by power iteration and the SLEM of the symmetrized kernel.

    Returns ``(pi_hat, slem)``.  A reducible or periodic kernel (slem = 1)
    raises ``OracleConvergenceError``.
    """
    P = k.matrix
    # start from the grid-normalized density, which is already close
    w = np.exp(k.log_f - k.log_f.max())
    pi = w / w.sum()
    for it in range(max_iter):
        nxt = pi @ P
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            pi = nxt
            break
        pi = nxt
    else:
        raise OracleConvergenceError(f"power iteration did not reach {tol} in {max_iter} steps")
    if np.any(pi <= 0):
        raise OracleConvergenceError("stationary vector has non-positive entries")
    ev = spectrum(k, pi)
    # the top eigenvalue is 1 (eigvector sqrt(pi)); the SLEM is the largest modulus of the rest
    order = np.argsort(np.abs(ev - 1.0))
    rest = np.delete(ev, order[0])
    slem = float(np.max(np.abs(rest))) if rest.size else 0.0
    if slem >= 1.0 - 1e-12:
        raise OracleConvergenceError(f"slem = {slem:.15g} is not below 1: the discrete chain does not mix")
    return pi, slem


def spectrum(k: DiscreteKernel, pi) -> np.ndarray:
    """Ascending eigenvalues of ``D^(1/2) P D^(-1/2)``, ``D = diag(pi)``, symmetrized."""
    s = np.sqrt(pi)
    S = (s[:, None] * k.matrix) / s[None, :]
    return np.linalg.eigvalsh(0.5 * (S + S.T))


def reversibility_residual(k: DiscreteKernel, pi) -> float:
    F = pi[:, None] * k.matrix
    return float(np.max(np.abs(F - F.T)))


def tv_decay(k: DiscreteKernel, start_index: int, n_steps: int, pi=None):
    """``TV_n = 0.5 |e_start P^n - pi|_1`` for n = 0..n_steps."""
    if not (0 <= start_index < k.n):
        raise IndexError(f"start index {start_index} outside grid of {k.n} cells")
    if pi is None:
        pi, _ = stationary_and_slem(k)
    mu = np.zeros(k.n)
    mu[start_index] = 1.0
    out = np.empty(n_steps + 1)
    for n in range(n_steps + 1):
        out[n] = 0.5 * np.abs(mu - pi).sum()
        mu = mu @ k.matrix
    return out


@dataclass
class SandwichVerdict:
    passed: bool
    slem: float
    slack: float
    rows: list = field(default_factory=list)
    upper_checked: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"passed": self.passed, "slem": self.slem, "slack": self.slack,
                "upper_checked": self.upper_checked, "rows": self.rows, "notes": self.notes}


def sandwich_check(report, slem: float, slack: float = 1e-3) -> SandwichVerdict:
    """Check ``lower <= slem + slack`` for every non-vacuous lower bound and
    ``slem <= upper + slack`` unless the upper bound is vacuous."""
    if not (0.0 <= slem < 1.0):
        raise ValueError(f"slem must lie in [0, 1), got {slem!r}")
    rows, notes = [], []
    ok = True
    for lb in report.lower_bounds:
        if lb.vacuous:
            rows.append({"bound": lb.method, "side": "lower", "value": lb.value,
                         "margin": None, "passed": None, "note": "vacuous; not checked"})
            continue
        margin = slem + slack - lb.value
        good = margin >= 0
        ok &= good
        rows.append({"bound": lb.method, "side": "lower", "value": lb.value,
                     "margin": margin, "passed": bool(good), "note": ""})
    upper_checked = not report.upper_vacuous
    if upper_checked:
        margin = report.upper_t_R + slack - slem
        good = margin >= 0
        ok &= good
        rows.append({"bound": "rosenthal", "side": "upper", "value": report.upper_t_R,
                     "margin": margin, "passed": bool(good), "note": ""})
    else:
        notes.append("upper bound vacuous; only the lower half of the sandwich was checked")
        rows.append({"bound": "rosenthal", "side": "upper", "value": report.upper_t_R,
                     "margin": None, "passed": None, "note": "vacuous; skipped"})
    return SandwichVerdict(passed=bool(ok), slem=slem, slack=slack, rows=rows,
                           upper_checked=upper_checked, notes=notes)
