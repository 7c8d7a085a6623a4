"""Activity taxonomy and sensor-source vocabulary.

Eighteen single-letter activity codes (A..S, no N) grouped into three
categories, and the four wearable sensor sources with their fixed fusion
order.
"""
from __future__ import annotations

from dataclasses import dataclass

NON_HAND = "non-hand"
HAND = "hand"
HAND_EATING = "hand-eating"


@dataclass(frozen=True)
class Activity:
    code: str
    name: str
    category: str


_TABLE = [
    ("A", "walking", NON_HAND),
    ("B", "jogging", NON_HAND),
    ("C", "stairs", NON_HAND),
    ("D", "sitting", NON_HAND),
    ("E", "standing", NON_HAND),
    ("F", "typing", HAND),
    ("G", "teeth", HAND),
    ("H", "soup", HAND_EATING),
    ("I", "chips", HAND_EATING),
    ("J", "pasta", HAND_EATING),
    ("K", "drinking", HAND_EATING),
    ("L", "sandwich", HAND_EATING),
    ("M", "kicking", NON_HAND),
    ("O", "catch", HAND),
    ("P", "dribbling", HAND),
    ("Q", "writing", HAND),
    ("R", "clapping", HAND),
    ("S", "folding", HAND),
]

ACTIVITIES: dict[str, Activity] = {c: Activity(c, n, g) for c, n, g in _TABLE}
ALL_ACTIVITY_CODES: tuple[str, ...] = tuple(a[0] for a in _TABLE)

# Headline activities for reporting: the two strongest performers from each
# category (walking, jogging, typing, clapping, drinking, sandwich).
DISCUSSION_ACTIVITIES: tuple[str, ...] = ("A", "B", "F", "R", "K", "L")


def activity(code: str) -> Activity:
    try:
        return ACTIVITIES[code]
    except KeyError:
        raise ValueError(f"unknown activity code {code!r}") from None


def is_activity_code(code: str) -> bool:
    return code in ACTIVITIES


# Sensor sources in canonical fusion order.
PHONE_ACCEL = "phone-accel"
PHONE_GYRO = "phone-gyro"
WATCH_ACCEL = "watch-accel"
WATCH_GYRO = "watch-gyro"
SOURCES: tuple[str, ...] = (PHONE_ACCEL, PHONE_GYRO, WATCH_ACCEL, WATCH_GYRO)
_SOURCE_RANK = {s: i for i, s in enumerate(SOURCES)}

# CLI-facing mask aliases mirroring the three headline sensor combinations.
MASK_ALIASES: dict[str, tuple[str, ...]] = {
    "phone-accel": (PHONE_ACCEL,),
    "all-accel": (PHONE_ACCEL, WATCH_ACCEL),
    "all": SOURCES,
}


def normalize_mask(sources) -> tuple[str, ...]:
    """Canonical mask: unique sources sorted into fusion order."""
    seen = set()
    for s in sources:
        if s not in _SOURCE_RANK:
            raise ValueError(f"unknown sensor source {s!r}")
        seen.add(s)
    if not seen:
        raise ValueError("sensor mask must name at least one source")
    return tuple(sorted(seen, key=_SOURCE_RANK.__getitem__))


def mask_to_str(mask) -> str:
    return "+".join(normalize_mask(mask))


def parse_mask(text: str) -> tuple[str, ...]:
    """Parse an alias ('all-accel') or an explicit 'a+b' source list."""
    text = text.strip()
    if text in MASK_ALIASES:
        return MASK_ALIASES[text]
    return normalize_mask(part.strip() for part in text.split("+"))
