"""Physical parameters of the nondimensional water-wave problem."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

log = logging.getLogger(__name__)

EPSILON_CAP = 0.3


@dataclass(frozen=True)
class Params:
    """Amplitude parameter ``epsilon`` and Bond number ``beta`` (> 1/3).

    The Froude parameter is alpha = 1 + epsilon**2.
    """

    epsilon: float
    beta: float

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ParameterError("epsilon must be positive")
        if not self.beta > 1.0 / 3.0:
            raise ParameterError("beta must exceed 1/3")
        if self.epsilon > EPSILON_CAP:
            log.warning("epsilon=%g is above the tested range (<= %g)", self.epsilon, EPSILON_CAP)

    @property
    def alpha(self) -> float:
        return 1.0 + self.epsilon**2

    @property
    def width(self) -> float:
        """sqrt(beta - 1/3), the KdV length scale factor."""
        return float(np.sqrt(self.beta - 1.0 / 3.0))


def default_half_length(params: Params, safety: float = 30.0) -> float:
    """Half period ``safety / epsilon * sqrt(beta - 1/3)``.

    With the default factor the sech^2 profile has decayed to about
    epsilon^2 * 4 exp(-30) < 1e-12 at the box edge.
    """
    return safety / params.epsilon * params.width
