"""Scoring for the four self-report instruments and label derivation.

PHQ-9 totals map to five severity bands; the binary screening label calls
a participant depressed iff the total is 10 or more (moderate and up).
GAD-7, PANAS, and STAI-T are scored for the corpus statistics.
"""

from dataclasses import dataclass
from typing import Sequence

from .errors import BadItemCount, ItemOutOfRange

PHQ9_BANDS = ("none", "mild", "moderate", "moderately_severe", "severe")
GAD7_BANDS = ("minimal", "mild", "moderate", "severe")
STAI_BANDS = ("low", "medium", "high")

# Four-class modeling target: the severe band never occurs in practice at
# screening scale, so classifiers default to the first four bands.
MODEL_CLASSES = ("none", "mild", "moderate", "moderately_severe")

# Standard PANAS item split (1-based positions of Positive Affect items).
PANAS_PA_ITEMS = frozenset({1, 3, 5, 9, 10, 12, 14, 16, 17, 19})

# Standard reverse-keyed trait-anxiety items (1-based within the 20).
STAI_T_REVERSED = frozenset({1, 3, 6, 7, 10, 13, 14, 16, 19})

_ITEM_SPECS = {
    "phq9": (9, 0, 3),
    "gad7": (7, 0, 3),
    "panas": (20, 1, 5),
    "stai_t": (20, 1, 4),
}


@dataclass(frozen=True)
class SurveyResponse:
    instrument: str
    items: tuple

    def __post_init__(self):
        if self.instrument not in _ITEM_SPECS:
            raise BadItemCount(f"unknown instrument {self.instrument!r}")
        object.__setattr__(self, "items", tuple(int(v) for v in self.items))


@dataclass(frozen=True)
class DepressionLabel:
    band: str
    binary: str          # depressed | non_depressed
    phq9_total: int


@dataclass(frozen=True)
class MoodLabel:
    pa_total: int
    na_total: int
    polarity: str        # positive | negative | neutral


@dataclass(frozen=True)
class AnxietyLabel:
    gad7_total: int | None = None
    gad_band: str | None = None
    stai_total: int | None = None
    stai_band: str | None = None


def _check_items(items: Sequence[int], instrument: str) -> list[int]:
    count, lo, hi = _ITEM_SPECS[instrument]
    vals = [int(v) for v in items]
    if len(vals) != count:
        raise BadItemCount(f"{instrument} needs {count} items, got {len(vals)}")
    for i, v in enumerate(vals):
        if not lo <= v <= hi:
            raise ItemOutOfRange(f"{instrument} item {i + 1} = {v}, allowed {lo}..{hi}")
    return vals


def phq9_band(total: int) -> str:
    """Severity band for a PHQ-9 total: 0-4 / 5-9 / 10-14 / 15-19 / 20-27."""
    if not 0 <= total <= 27:
        raise ItemOutOfRange(f"PHQ-9 total {total} outside 0..27")
    if total <= 4:
        return "none"
    if total <= 9:
        return "mild"
    if total <= 14:
        return "moderate"
    if total <= 19:
        return "moderately_severe"
    return "severe"


def phq9_binary(total: int) -> str:
    """Depressed iff the band is moderate or worse (total >= 10)."""
    return "non_depressed" if phq9_band(total) in ("none", "mild") else "depressed"


def score_phq9(items: Sequence[int]) -> DepressionLabel:
    total = sum(_check_items(items, "phq9"))
    return DepressionLabel(band=phq9_band(total), binary=phq9_binary(total),
                           phq9_total=total)


def gad7_band(total: int) -> str:
    """Band for a GAD-7 total: 0-4 / 5-9 / 10-14 / 15-21."""
    if not 0 <= total <= 21:
        raise ItemOutOfRange(f"GAD-7 total {total} outside 0..21")
    if total <= 4:
        return "minimal"
    if total <= 9:
        return "mild"
    if total <= 14:
        return "moderate"
    return "severe"


def score_gad7(items: Sequence[int]) -> AnxietyLabel:
    total = sum(_check_items(items, "gad7"))
    return AnxietyLabel(gad7_total=total, gad_band=gad7_band(total))


def panas_polarity(pa_total: int, na_total: int) -> str:
    if pa_total > na_total:
        return "positive"
    if na_total > pa_total:
        return "negative"
    return "neutral"


def score_panas(items: Sequence[int],
                pa_items: frozenset = PANAS_PA_ITEMS) -> MoodLabel:
    vals = _check_items(items, "panas")
    pa = sum(v for i, v in enumerate(vals, start=1) if i in pa_items)
    na = sum(v for i, v in enumerate(vals, start=1) if i not in pa_items)
    return MoodLabel(pa_total=pa, na_total=na, polarity=panas_polarity(pa, na))


def stai_band(total: int) -> str:
    """Band for a trait-anxiety total: below 38 / 38-44 / above 44."""
    if not 20 <= total <= 80:
        raise ItemOutOfRange(f"STAI-T total {total} outside 20..80")
    if total < 38:
        return "low"
    if total <= 44:
        return "medium"
    return "high"


def score_stai_t(items: Sequence[int],
                 reversed_items: frozenset = STAI_T_REVERSED) -> AnxietyLabel:
    vals = _check_items(items, "stai_t")
    total = sum(5 - v if i in reversed_items else v
                for i, v in enumerate(vals, start=1))
    return AnxietyLabel(stai_total=total, stai_band=stai_band(total))


def score(response: SurveyResponse):
    """Dispatch a SurveyResponse to its instrument's scorer."""
    fn = {
        "phq9": score_phq9,
        "gad7": score_gad7,
        "panas": score_panas,
        "stai_t": score_stai_t,
    }[response.instrument]
    return fn(response.items)
