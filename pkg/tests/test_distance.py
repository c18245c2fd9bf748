import numpy as np
import pytest

from qmirror.channels import HALF_LOSS_KM
from qmirror.distance import (
    A_MAX,
    best_over_alpha,
    eta_to_length,
    length_to_eta,
    threshold_distance,
)
from qmirror.metrics import closed_form_eta


def test_lossless_best_is_the_cap():
    best = best_over_alpha(1.0)
    assert best.mean_photons == A_MAX and best.fidelity == 1.0


def test_best_beats_dense_scan():
    for eta in (0.9, 0.6, 0.45, 0.3):
        best = best_over_alpha(eta)
        scan = max(closed_form_eta(A, eta) for A in np.linspace(1e-3, 50, 20001))
        assert best.fidelity >= scan - 1e-9


def test_interior_peak_is_stationary():
    best = best_over_alpha(0.5)
    h = 1e-3
    assert closed_form_eta(best.mean_photons + h, 0.5) <= best.fidelity
    assert closed_form_eta(best.mean_photons - h, 0.5) <= best.fidelity


def test_length_mappings():
    assert length_to_eta(HALF_LOSS_KM) == 0.5
    assert abs(length_to_eta(HALF_LOSS_KM, "gamma", gamma=6.3e3) - 0.5) < 1e-3
    assert abs(eta_to_length(length_to_eta(17.0)) - 17.0) < 1e-12
    assert eta_to_length(0.0) == float("inf")
    with pytest.raises(ValueError):
        length_to_eta(1.0, "gamma")
    with pytest.raises(ValueError):
        length_to_eta(1.0, "parsecs")


def test_threshold_is_a_crossing():
    L = threshold_distance(0.8)
    assert best_over_alpha(length_to_eta(L - 0.01)).fidelity > 0.8
    assert best_over_alpha(length_to_eta(L + 0.01)).fidelity < 0.8


def test_threshold_ordering():
    assert threshold_distance(0.95) < threshold_distance(0.8) < threshold_distance(2 / 3)


def test_unreachable_level():
    assert threshold_distance(1.5) == 0.0
