"""Random walk Metropolis-Hastings: single steps, chains and acceptance estimates."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._math import seed_sequence
from .proposal import RadialProposal


@dataclass(frozen=True)
class ChainConfig:
    """Chain settings.

    The random stream of chain ``chain_index`` is
    ``SeedSequence(seed, spawn_key=(chain_index,))``.
    """

    initial: np.ndarray
    steps: int
    seed: int = 0
    record_every: int = 1
    chain_index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "initial", np.atleast_1d(np.asarray(self.initial, dtype=float)))
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be a positive integer, got {self.record_every!r}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")

    def rng(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.chain_index),))
        return np.random.default_rng(ss)


@dataclass
class ChainOutput:
    """Recorded trajectory.

    ``states[0]`` is the initial point; ``states[k]`` is the state after step
    ``k * record_every``.
    """

    states: np.ndarray
    accepted: int
    acceptance_rate: float
    steps: int
    record_every: int
    accepted_flags: np.ndarray = field(repr=False, default=None)
    n_nonfinite: int = 0
    backend: str = "numpy"


def mh_accept(log_h: float, u: float) -> bool:
    """Accept iff ``u < min(1, h)``, compared in log space."""
    lu = math.log(u) if u > 0.0 else -math.inf
    return bool(lu < log_h)


def _target_of(bundle):
    return getattr(bundle, "target", bundle)


def rwmh_step(bundle, prop: RadialProposal, x, rng):
    """One RWMH transition from ``x``.

    Draws one increment and then exactly one uniform.  A proposal with a
    non-finite log-density is rejected.
    """
    t = _target_of(bundle)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = x + prop.increment_sampler(rng)
    u = rng.random()
    ly = float(t.logpdf(y))
    if not math.isfinite(ly):
        return x, False
    if mh_accept(ly - float(t.logpdf(x)), u):
        return y, True
    return x, False


def run_chain(bundle, prop: RadialProposal, cfg: ChainConfig, use_numba=None) -> ChainOutput:
    """Run a reproducible chain.

    Increments for all steps are drawn first, then one uniform per step, so
    the trajectory is a pure function of ``(seed, chain_index, cfg)`` and
    does not depend on the backend.
    """
    t = _target_of(bundle)
    x0 = cfg.initial.reshape(t.dim)
    rng = cfg.rng()
    inc = prop.increment_sampler(rng, cfg.steps)
    u = rng.random(cfg.steps)
    with np.errstate(divide="ignore"):
        log_u = np.log(u)
    if t.kernel is not None:
        if use_numba is None:
            use_numba = kernels.HAVE_NUMBA
        states, flags, acc, nonfin = kernels.mh_chain(t.kernel, x0, inc, log_u, cfg.record_every,
                                                      use_numba=use_numba)
        backend = "numba" if (use_numba and kernels.HAVE_NUMBA) else "numpy"
    else:
        states, flags, acc, nonfin = _generic_chain(t, x0, inc, log_u, cfg.record_every)
        backend = "python"
    return ChainOutput(states=states, accepted=int(acc), acceptance_rate=acc / cfg.steps,
                       steps=cfg.steps, record_every=cfg.record_every,
                       accepted_flags=np.asarray(flags, dtype=bool), n_nonfinite=int(nonfin),
                       backend=backend)


def _generic_chain(t, x0, inc, log_u, record_every):
    steps, p = inc.shape
    states = np.empty((steps // record_every + 1, p))
    flags = np.zeros(len(states), dtype=bool)
    x = x0.copy()
    lx = float(t.logpdf(x))
    states[0] = x
    acc = nonfin = 0
    rec = 1
    for k in range(steps):
        y = x + inc[k]
        ly = float(t.logpdf(y))
        ok = False
        if not math.isfinite(ly):
            nonfin += 1
        elif log_u[k] < ly - lx:
            ok = True
            x, lx = y, ly
            acc += 1
        if (k + 1) % record_every == 0:
            states[rec] = x
            flags[rec] = ok
            rec += 1
    return states, flags, acc, nonfin


def estimate_acceptance(bundle, prop: RadialProposal, x, n: int = 100_000, seed=0):
    """Monte Carlo estimate of the acceptance probability at ``x``.

    Returns ``(alpha_hat, se)``.
    """
    if n < 1000:
        raise ValueError("n must be at least 1000")
    t = _target_of(bundle)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rng = np.random.default_rng(seed_sequence(seed))
    y = x + prop.increment_sampler(rng, n)
    log_h = np.asarray(t.logpdf(y), dtype=float) - float(t.logpdf(x))
    log_h = np.where(np.isnan(log_h), -np.inf, log_h)
    a = np.exp(np.minimum(log_h, 0.0))
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(n))


def detailed_balance_residual(bundle, prop: RadialProposal, xs, ys):
    """Max relative gap between ``f(x) a(x,y) q(x,y)`` and ``f(y) a(y,x) q(y,x)``."""
    t = _target_of(bundle)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    lx = np.asarray(t.logpdf(xs), dtype=float)
    ly = np.asarray(t.logpdf(ys), dtype=float)
    lq = prop.radial_log_density(np.linalg.norm(xs - ys, axis=1))
    left = lx + np.minimum(ly - lx, 0.0) + lq
    right = ly + np.minimum(lx - ly, 0.0) + lq
    return float(np.max(np.abs(np.expm1(left - right))))


def write_chain_csv(path, out: ChainOutput):
    """Write ``step, x1..xp, accepted``; step 0 is the initial point."""
    p = out.states.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step"] + [f"x{j + 1}" for j in range(p)] + ["accepted"])
        for k, (s, a) in enumerate(zip(out.states, out.accepted_flags)):
            w.writerow([k * out.record_every] + [repr(float(v)) for v in s] + [int(a)])
