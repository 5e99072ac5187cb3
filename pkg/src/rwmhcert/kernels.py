"""Hot loops with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``RWMHCERT_DISABLE_NUMBA`` is unset (or "0").  Both paths take the
same arguments and produce the same numbers up to floating-point rounding, so
callers never branch on which one is active.

Two kernels live here:

* ``assemble_kernel_matrix``: the grid discretization of the RWMH transition
  (off-diagonal mass ``alpha * q * cell_volume``, rejection mass on the
  diagonal).
* ``mh_chain``: the sequential accept/reject loop for targets that expose a
  compiled log-density (Gaussian, logistic, Poisson).
"""
from __future__ import annotations

import math
import os
from typing import NamedTuple

import numpy as np

_FLAG = "RWMHCERT_DISABLE_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(_FLAG, "0").strip().lower() not in ("", "0", "false", "no")


try:
    if _numba_disabled():
        raise ImportError("numba disabled by " + _FLAG)
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if HAVE_NUMBA else "numpy"


# target kinds understood by the compiled log-density
KIND_GAUSSIAN = 0
KIND_LOGISTIC = 1
KIND_POISSON = 2


class KernelSpec(NamedTuple):
    """Flat description of a log-density the compiled chain loop can evaluate.

    ``KIND_GAUSSIAN``: ``const - 0.5 * sum(prec * (x - vec_a)**2)``.
    ``KIND_LOGISTIC``: ``const + sum(vec_a * eta - log1p(exp(eta))) - 0.5*vec_b[0]*|x|^2``
    with ``eta = mat @ x``.
    ``KIND_POISSON``: as logistic with ``exp(eta)`` as the cumulant.
    """

    kind: int
    vec_a: np.ndarray
    vec_b: np.ndarray
    mat: np.ndarray
    const: float


# ---------------------------------------------------------------------------
# compiled log-density


@njit(cache=True)
def _log1pexp(t):
    if t > 0.0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


@njit(cache=True)
def _spec_logpdf(kind, x, vec_a, vec_b, mat, const):
    p = x.shape[0]
    if kind == 0:
        acc = 0.0
        for j in range(p):
            d = x[j] - vec_a[j]
            acc += vec_b[j] * d * d
        return const - 0.5 * acc
    sq = 0.0
    for j in range(p):
        sq += x[j] * x[j]
    acc = -0.5 * vec_b[0] * sq
    n = mat.shape[0]
    for i in range(n):
        eta = 0.0
        for j in range(p):
            eta += mat[i, j] * x[j]
        if kind == 1:
            acc += vec_a[i] * eta - _log1pexp(eta)
        else:
            acc += vec_a[i] * eta - math.exp(eta)
    return const + acc


def _mh_chain_impl(kind, vec_a, vec_b, mat, const, x0, increments, log_u, record_every):
    steps = increments.shape[0]
    p = x0.shape[0]
    n_rec = steps // record_every
    states = np.empty((n_rec + 1, p))
    flags = np.zeros(n_rec + 1, dtype=np.bool_)
    x = x0.copy()
    y = np.empty(p)
    lx = _spec_logpdf(kind, x, vec_a, vec_b, mat, const)
    for j in range(p):
        states[0, j] = x[j]
    accepted = 0
    nonfinite = 0
    rec = 1
    for t in range(steps):
        for j in range(p):
            y[j] = x[j] + increments[t, j]
        ly = _spec_logpdf(kind, y, vec_a, vec_b, mat, const)
        acc = False
        if not math.isfinite(ly):
            nonfinite += 1
        elif log_u[t] < ly - lx:
            acc = True
        if acc:
            for j in range(p):
                x[j] = y[j]
            lx = ly
            accepted += 1
        if (t + 1) % record_every == 0:
            for j in range(p):
                states[rec, j] = x[j]
            flags[rec] = acc
            rec += 1
    return states, flags, accepted, nonfinite


_mh_chain_numba = njit(cache=True)(_mh_chain_impl) if HAVE_NUMBA else None


def _py_logpdf(kind, x, vec_a, vec_b, mat, const):
    fn = getattr(_spec_logpdf, "py_func", _spec_logpdf)
    return fn(kind, x, vec_a, vec_b, mat, const)


def _mh_chain_numpy(kind, vec_a, vec_b, mat, const, x0, increments, log_u, record_every):
    # same loop with a numpy-vectorized log-density per step
    steps, p = increments.shape
    n_rec = steps // record_every
    states = np.empty((n_rec + 1, p))
    flags = np.zeros(n_rec + 1, dtype=bool)
    spec = KernelSpec(kind, vec_a, vec_b, mat, const)
    x = np.array(x0, dtype=float)
    lx = spec_logpdf_numpy(spec, x)
    states[0] = x
    accepted = nonfinite = 0
    rec = 1
    for t in range(steps):
        y = x + increments[t]
        ly = spec_logpdf_numpy(spec, y)
        acc = False
        if not np.isfinite(ly):
            nonfinite += 1
        elif log_u[t] < ly - lx:
            acc = True
        if acc:
            x, lx = y, ly
            accepted += 1
        if (t + 1) % record_every == 0:
            states[rec] = x
            flags[rec] = acc
            rec += 1
    return states, flags, accepted, nonfinite


def spec_logpdf_numpy(spec: KernelSpec, x):
    """Vectorized numpy evaluation of a :class:`KernelSpec` at ``x`` (..., p)."""
    x = np.asarray(x, dtype=float)
    if spec.kind == KIND_GAUSSIAN:
        d = x - spec.vec_a
        return spec.const - 0.5 * np.sum(spec.vec_b * d * d, axis=-1)
    eta = x @ spec.mat.T
    if spec.kind == KIND_LOGISTIC:
        lik = np.sum(spec.vec_a * eta - np.logaddexp(0.0, eta), axis=-1)
    else:
        lik = np.sum(spec.vec_a * eta - np.exp(eta), axis=-1)
    return spec.const + lik - 0.5 * spec.vec_b[0] * np.sum(x * x, axis=-1)


def mh_chain(spec: KernelSpec, x0, increments, log_u, record_every=1, use_numba=None):
    """Run the accept/reject loop on pre-drawn increments and log-uniforms.

    Returns ``(states, flags, accepted, nonfinite)`` where ``states[0]`` is the
    initial point and ``flags[k]`` says whether the step that produced
    ``states[k]`` was an acceptance.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    args = (
        int(spec.kind),
        np.ascontiguousarray(spec.vec_a, dtype=float),
        np.ascontiguousarray(spec.vec_b, dtype=float),
        np.ascontiguousarray(spec.mat, dtype=float),
        float(spec.const),
        np.ascontiguousarray(x0, dtype=float),
        np.ascontiguousarray(increments, dtype=float),
        np.ascontiguousarray(log_u, dtype=float),
        int(record_every),
    )
    if use_numba and _mh_chain_numba is not None:
        return _mh_chain_numba(*args)
    return _mh_chain_numpy(*args)


# ---------------------------------------------------------------------------
# grid discretization


@njit(cache=True)
def _assemble_numba(centers, logf, cell_volume, logq0, c1, c2):
    n, p = centers.shape
    P = np.zeros((n, n))
    for i in range(n):
        row = 0.0
        for j in range(n):
            if j == i:
                continue
            d2 = 0.0
            for k in range(p):
                t = centers[i, k] - centers[j, k]
                d2 += t * t
            r = math.sqrt(d2)
            la = logf[j] - logf[i]
            if la > 0.0:
                la = 0.0
            v = math.exp(la + logq0 - c1 * r - c2 * d2) * cell_volume
            P[i, j] = v
            row += v
        P[i, i] = 1.0 - row
    return P


def _assemble_numpy(centers, logf, cell_volume, logq0, c1, c2):
    diff = centers[:, None, :] - centers[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    r = np.sqrt(d2)
    la = np.minimum(logf[None, :] - logf[:, None], 0.0)
    P = np.exp(la + logq0 - c1 * r - c2 * d2) * cell_volume
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def assemble_kernel_matrix(centers, logf, cell_volume, logq_coeffs, use_numba=None):
    """Discretized RWMH matrix for a proposal with ``log q(r) = a - c1 r - c2 r^2``.

    Parameters
    ----------
    centers : ndarray (N, p)
        Cell centers.
    logf : ndarray (N,)
        Log target density at the centers.
    cell_volume : float
        Lebesgue volume of one cell.
    logq_coeffs : tuple of float
        ``(log q(0), c1, c2)``.
    """
    if use_numba is None:
        use_numba = HAVE_NUMBA
    centers = np.ascontiguousarray(centers, dtype=float)
    logf = np.ascontiguousarray(logf, dtype=float)
    a, c1, c2 = (float(v) for v in logq_coeffs)
    if use_numba and HAVE_NUMBA:
        return _assemble_numba(centers, logf, float(cell_volume), a, c1, c2)
    return _assemble_numpy(centers, logf, float(cell_volume), a, c1, c2)
