"""Shared label sets: surgical actions, instrument classes and skill levels."""
from enum import IntEnum

ACTION_NAMES = (
    "No",
    "vessel_cutting",
    "needle_handling",
    "needle_touch_vessel",
    "needle_withdrawing",
    "knot_tying",
    "knot_cutting",
)
NUM_ACTIONS = len(ACTION_NAMES)


class Action(IntEnum):
    NO = 0
    VESSEL_CUTTING = 1
    NEEDLE_HANDLING = 2
    NEEDLE_TOUCH_VESSEL = 3
    NEEDLE_WITHDRAWING = 4
    KNOT_TYING = 5
    KNOT_CUTTING = 6


INSTRUMENT_NAMES = (
    "straight_needle_driver",
    "curved_needle_driver",
    "straight_scissors",
    "curved_scissors",
)


class SkillLevel(IntEnum):
    POOR = 0
    MODERATE = 1
    GOOD = 2


SKILL_NAMES = ("Poor", "Moderate", "Good")

# NOMAT aspects graded by the classifier, in report order.
ASPECTS = (
    "instrument_handling",
    "needle_driving_motion",
    "knot_tying_motion",
    "needle_driving_action",
    "knot_tying_action",
)
