import math

import numpy as np
from scipy.special import gammaln


def log_unit_ball_volume(p: int) -> float:
    """log of C_B(p) = pi^(p/2) / Gamma(p/2 + 1)."""
    return 0.5 * p * math.log(math.pi) - float(gammaln(0.5 * p + 1.0))


def unit_ball_volume(p: int) -> float:
    """Lebesgue volume of the unit ball in R^p."""
    return math.exp(log_unit_ball_volume(p))


def uniform_directions(rng, n, p):
    z = rng.standard_normal((n, p))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def seed_sequence(seed):
    """Accept an int or an existing SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))
