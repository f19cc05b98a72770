"""Closed-form bounds for the multi-hop model."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError
from .radio import (
    RadioParams,
    expected_min_power,
    interfering_radius_expected,
    interfering_radius_for_power,
)
from .topology import Region


@dataclass(frozen=True)
class BoundsReport:
    k_star: int
    capacity_upper: float
    power_sum_expected: float
    normalized_capacity_upper: float

    def comment_lines(self, lam: float | None = None) -> list[str]:
        head = "# bounds" if lam is None else f"# bounds lambda={lam!r}"
        return [
            f"{head} k_star={self.k_star} capacity_upper={self.capacity_upper!r} "
            f"power_sum_expected={self.power_sum_expected!r} "
            f"normalized_capacity_upper={self.normalized_capacity_upper!r}"
        ]


def k_star(params: RadioParams) -> int:
    """Channels needed so every SBS in the expected interfering disc gets its own."""
    ratio = params.gamma_min / (params.zeta * params.gain)
    # guard against 14.0000000001 style round-up from the cube root
    return max(1, math.ceil((math.pi / 4.0) * ratio ** (2.0 / 3.0) - 1e-12))


def channels_required(params: RadioParams, lam: float) -> int:
    """Channel count rebuilt step by step at density ``lam``.

    Expected nearest-neighbour power fixes the interfering radius; the
    expected SBS population of that disc is the channel count. The density
    cancels, which is what ``scalability_check`` exercises.
    """
    p_hat = expected_min_power(params, lam)
    mu = interfering_radius_for_power(params, p_hat)
    if not math.isclose(mu, interfering_radius_expected(params, lam), rel_tol=1e-9):
        raise AssertionError("interfering radius formulas disagree")
    population = lam * math.pi * mu * mu
    return max(1, math.ceil(population - 1e-12))


@dataclass(frozen=True)
class ScalabilityResult:
    ok: bool
    k_star: int
    base_channels: int
    dense_channels: int
    lam: float
    m_factor: float


def scalability_check(params: RadioParams, lam: float, m_factor: float) -> ScalabilityResult:
    if not lam > 0:
        raise ParameterError(f"density must be positive, got {lam}")
    if not m_factor >= 1:
        raise ParameterError(f"m_factor must be >= 1, got {m_factor}")
    ks = k_star(params)
    base = channels_required(params, lam)
    dense = channels_required(params, m_factor * lam)
    return ScalabilityResult(base == ks == dense, ks, base, dense, lam, m_factor)


def capacity_upper_bound(params: RadioParams, region: Region) -> float:
    """min(density bound as a count over the cell, K * floor(C/R))."""
    return min(params.lambda_hat * region.enclosed_area(), float(params.k_channels * params.flows_per_link))


def power_sum_bound(params: RadioParams, region: Region, lam: float) -> float:
    """Expected total transmit power of a fully supported nearest-neighbour network; O(1/sqrt(lam))."""
    if not lam > 0:
        raise ParameterError(f"density must be positive, got {lam}")
    return region.enclosed_area() * params.gamma_min * params.noise / (8.0 * params.gain * params.theta * math.sqrt(lam))


def bounds_report(params: RadioParams, region: Region, lam: float) -> BoundsReport:
    cap = capacity_upper_bound(params, region)
    return BoundsReport(
        k_star=k_star(params),
        capacity_upper=cap,
        power_sum_expected=power_sum_bound(params, region, lam),
        normalized_capacity_upper=cap / region.enclosed_area(),
    )
