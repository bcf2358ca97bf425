"""Fitted logical-error model for remote lattice surgery and the distance solver.

The logical error rate per syndrome round of a distance-``d`` rotated surface
code whose seam consumes Bell pairs with error ``p_bell`` and whose local
operations fail at rate ``p_local`` is modelled as::

    p_L = kappa (d+1)^eta [ A^((d+1)/2) + B^((d+1)/2)
                            + sum_{g=1}^{d} (A M^2)^(g/2) B^((d+1-g)/2) ]

with ``A = p_bell / p_th_bell``, ``B = p_local / p_th_local`` and
``M = 1 + alpha_c p_local p_th_bell / (1 - sqrt(B))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError, InvariantViolation, ModelDomainError

# Fitted distances beyond this are extrapolation; callers may flag it.
CALIBRATED_MAX_DISTANCE = 401
DEFAULT_D_MAX = 1001


@dataclass(frozen=True)
class FittedModelParams:
    """Constants of the fitted logical-error model."""

    kappa: float = 5.44e-2
    eta: float = 5.34e-1
    alpha_c: float = 3.15e2
    p_th_bell: float = 0.153
    p_th_local: float = 0.0102

    def __post_init__(self):
        for name in ("kappa", "eta", "alpha_c", "p_th_bell", "p_th_local"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be strictly positive")
        for name in ("p_th_bell", "p_th_local"):
            if not getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must lie in (0, 1)")


DEFAULT_PARAMS = FittedModelParams()


@dataclass(frozen=True)
class NoisePoint:
    """Bell-pair and local error rates at which the model is evaluated."""

    p_bell: float
    p_local: float

    def __post_init__(self):
        for name in ("p_bell", "p_local"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0) or math.isnan(v):
                raise InvalidInputError(f"{name}={v!r} must lie in [0, 1)")

    @classmethod
    def from_fidelity(cls, fidelity: float, p_local: float = 1e-3) -> NoisePoint:
        return cls(1.0 - fidelity, p_local)

    def ratios(self, params: FittedModelParams = DEFAULT_PARAMS) -> tuple[float, float, float]:
        """Return ``(A, B, M)``; raises if ``B >= 1``."""
        a = self.p_bell / params.p_th_bell
        b = self.p_local / params.p_th_local
        if b >= 1.0:
            raise ModelDomainError(
                f"p_local={self.p_local} is at or above the local threshold {params.p_th_local}"
            )
        m = 1.0 + params.alpha_c * self.p_local * params.p_th_bell / (1.0 - math.sqrt(b))
        return a, b, m


@dataclass(frozen=True)
class DistanceResult:
    """Outcome of :func:`min_distance`.

    ``distance`` is ``None`` when no odd distance up to ``d_max`` meets the
    target; ``achieved_p_l`` is then the rate at ``d_max`` (or 1.0 above the
    effective threshold).
    """

    distance: int | None
    achieved_p_l: float
    d_max: int = DEFAULT_D_MAX
    reason: str = ""

    @property
    def feasible(self) -> bool:
        return self.distance is not None

    @property
    def extrapolated(self) -> bool:
        return self.distance is not None and self.distance > CALIBRATED_MAX_DISTANCE


def _check_distance(d: int) -> None:
    if isinstance(d, bool) or int(d) != d or d < 3 or d % 2 == 0:
        raise InvalidInputError(f"code distance must be an odd integer >= 3, got {d!r}")


def _pow_half(base: float, twice_exp: int) -> float:
    # base ** (twice_exp / 2) in log space; 0 ** positive is 0
    if base == 0.0:
        return 0.0
    return math.exp(0.5 * twice_exp * math.log(base))


def logical_error_rate(d: int, noise: NoisePoint, params: FittedModelParams = DEFAULT_PARAMS) -> float:
    """Logical error rate per syndrome round at odd distance ``d``.

    The cross-term sum is evaluated term by term. Values the fit pushes
    above 1 are clamped.
    """
    _check_distance(d)
    a, b, m = noise.ratios(params)
    am2 = a * m * m
    bracket = _pow_half(a, d + 1) + _pow_half(b, d + 1)
    if a > 0.0 and b > 0.0:
        for g in range(1, d + 1):
            bracket += _pow_half(am2, g) * _pow_half(b, d + 1 - g)
    p_l = params.kappa * (d + 1) ** params.eta * bracket
    return min(max(p_l, 0.0), 1.0)


def effective_bell_threshold(p_local: float, params: FittedModelParams = DEFAULT_PARAMS) -> float:
    """Largest Bell error rate at which the dominant cross term still decays: ``p_th_bell / M**2``."""
    if not 0.0 <= p_local:
        raise InvalidInputError("p_local must be non-negative")
    _, _, m = NoisePoint(0.0, p_local).ratios(params)
    return params.p_th_bell / (m * m)


def min_distance(
    noise: NoisePoint,
    p_l_target: float,
    params: FittedModelParams = DEFAULT_PARAMS,
    d_max: int = DEFAULT_D_MAX,
) -> DistanceResult:
    """Smallest odd distance in ``[3, d_max]`` whose logical error rate meets ``p_l_target``.

    An upper bracket is found by doubling from ``d = 3``; the bracket is then
    bisected over odd values. At or above the effective Bell threshold the
    rate does not fall with distance and the result is reported infeasible
    without searching.
    """
    if not 0.0 < p_l_target < 1.0:
        raise InvalidInputError(f"p_l_target must lie in (0, 1), got {p_l_target!r}")
    _check_distance(d_max)

    def rate(d: int) -> float:
        return logical_error_rate(d, noise, params)

    if noise.p_bell >= effective_bell_threshold(noise.p_local, params):
        return DistanceResult(None, 1.0, d_max, "p_bell at or above the effective threshold")

    p3 = rate(3)
    if p3 <= p_l_target:
        return DistanceResult(3, p3, d_max)

    lo, hi = 3, 5
    p_hi = rate(hi) if hi <= d_max else math.inf
    while hi < d_max and p_hi > p_l_target:
        lo = hi
        hi = min(2 * hi - 1, d_max)
        p_hi = rate(hi)
    if hi > d_max or p_hi > p_l_target:
        return DistanceResult(None, rate(d_max), d_max, f"target not met for any d <= {d_max}")

    # invariant: rate(lo) > target >= rate(hi), both odd
    while hi - lo > 2:
        mid = (lo + hi) // 2
        if mid % 2 == 0:
            mid += 1
        p_mid = rate(mid)
        if p_mid <= p_l_target:
            hi, p_hi = mid, p_mid
        else:
            lo = mid
    return DistanceResult(hi, p_hi, d_max)


def distance_ratio(d_dist: int, d_raw: int) -> float:
    """Ratio ``d_dist / d_raw`` of distilled to raw code distance."""
    _check_distance(d_dist)
    _check_distance(d_raw)
    if d_dist > d_raw:
        raise InvariantViolation(f"distilled distance {d_dist} exceeds raw distance {d_raw}")
    return d_dist / d_raw
