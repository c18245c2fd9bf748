"""Fibre length versus the best reachable teleportation fidelity under loss."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import optimize

from . import metrics
from .channels import HALF_LOSS_KM, eta_from_distance, eta_from_gamma

A_MIN = 1e-3
A_MAX = 50.0
SEARCH_TOL = 1e-6
SCAN_POINTS = 2001


class BestFidelity(NamedTuple):
    mean_photons: float
    fidelity: float


def best_over_alpha(eta: float, a_min: float = A_MIN, a_max: float = A_MAX,
                    tol: float = SEARCH_TOL) -> BestFidelity:
    """Maximize the lossy closed form over the mean photon number.

    For ``eta < 1/2`` the curve has an interior peak and then creeps back up
    toward 2/3 at large photon number, so a coarse scan picks the bracket and
    golden-section search refines it.
    """
    grid = np.linspace(a_min, a_max, SCAN_POINTS)
    values = np.array([metrics.closed_form_eta(A, eta) for A in grid])
    # last maximizer, so a saturated curve reports the cap
    i = len(values) - 1 - int(np.argmax(values[::-1]))
    if i == 0 or i == len(grid) - 1 or not values[i - 1] < values[i] > values[i + 1]:
        # edge or flat-topped (saturated in double precision)
        return BestFidelity(float(grid[i]), float(values[i]))
    xmin = optimize.golden(lambda A: -metrics.closed_form_eta(A, eta),
                           brack=(grid[i - 1], grid[i], grid[i + 1]), tol=tol)
    best = metrics.closed_form_eta(xmin, eta)
    if best < values[i]:
        return BestFidelity(float(grid[i]), float(values[i]))
    return BestFidelity(float(xmin), float(best))


def length_to_eta(length_km: float, mapping: str = "half-loss", gamma: float | None = None,
                  half_loss_km: float = HALF_LOSS_KM) -> float:
    if mapping == "half-loss":
        return eta_from_distance(length_km, half_loss_km)
    if mapping == "gamma":
        if gamma is None:
            raise ValueError("the gamma mapping needs a damping rate")
        return eta_from_gamma(gamma, length_km)
    raise ValueError(f"unknown distance mapping {mapping!r}")


def eta_to_length(eta: float, half_loss_km: float = HALF_LOSS_KM) -> float:
    if not 0.0 < eta <= 1.0:
        return float("inf")
    return float(-half_loss_km * np.log2(eta))


def threshold_distance(level: float = metrics.CLASSICAL_LIMIT, max_km: float = 200.0,
                       half_loss_km: float = HALF_LOSS_KM) -> float:
    """Longest fibre for which some photon number still reaches ``level``."""

    def gap(length):
        return best_over_alpha(eta_from_distance(length, half_loss_km)).fidelity - level

    if gap(0.0) < 0:
        return 0.0
    if gap(max_km) >= 0:
        return float("inf")
    return float(optimize.brentq(gap, 0.0, max_km, xtol=1e-9))
