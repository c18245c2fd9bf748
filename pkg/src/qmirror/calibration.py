"""Choice of the both-click rule for imperfect mirrors.

Each rule is scored by the max deviation between the engine's exact average
teleportation fidelity and :func:`qmirror.metrics.closed_form_mirror` over a
grid of mirror errors.  The rule with the smallest deviation wins; ties go to
the rule listed first in :data:`PREFERENCE`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import metrics
from .mirror import MirrorParams
from .protocols import ConflictRule, NoiseConfig

GRID_MEAN_PHOTONS = (1.75, 4.0)
GRID_ERRORS = tuple(np.linspace(0.0, 0.5, 4))
TIE_TOL = 1e-12

# AsFailure first: it never heralds success on an ambiguous record.
PREFERENCE = (
    ConflictRule.AS_FAILURE,
    ConflictRule.AS_PORT1,
    ConflictRule.AS_PORT2,
    ConflictRule.RANDOMIZED,
)


@dataclass(frozen=True)
class CalibrationReport:
    chosen: ConflictRule
    deviations: dict[ConflictRule, float]
    worst_points: dict[ConflictRule, tuple]

    @property
    def residual(self) -> float:
        return self.deviations[self.chosen]

    def to_dict(self) -> dict:
        return {
            "chosen": self.chosen.value,
            "residual": self.residual,
            "deviations": {rule.value: dev for rule, dev in self.deviations.items()},
            "worst_points": {rule.value: list(pt) for rule, pt in self.worst_points.items()},
        }


def mirror_deviation(rule: ConflictRule, mean_photons: float,
                     bob: MirrorParams, alice: MirrorParams,
                     protocol: str = "teleport") -> float:
    noise = NoiseConfig(mirror_bob=bob, mirror_alice=alice, conflict_rule=rule)
    engine = metrics.average_fidelity_2design(protocol, np.sqrt(mean_photons), noise)
    closed = metrics.closed_form_mirror(mean_photons, bob.r, bob.t, alice.r, alice.t)
    return abs(engine - closed)


def calibrate_conflict_rule(mean_photons: Sequence[float] = GRID_MEAN_PHOTONS,
                            errors: Sequence[float] = GRID_ERRORS) -> CalibrationReport:
    deviations, worst = {}, {}
    for rule in PREFERENCE:
        worst_dev, worst_pt = -1.0, ()
        for A, e1, p1, e2, p2 in itertools.product(mean_photons, errors, errors, errors, errors):
            dev = mirror_deviation(rule, A, MirrorParams(e1, p1), MirrorParams(e2, p2))
            if dev > worst_dev:
                worst_dev, worst_pt = dev, tuple(float(v) for v in (A, e1, p1, e2, p2))
        deviations[rule], worst[rule] = worst_dev, worst_pt
    lowest = min(deviations.values())
    chosen = next(rule for rule in PREFERENCE if deviations[rule] <= lowest + TIE_TOL)
    return CalibrationReport(chosen, deviations, worst)
