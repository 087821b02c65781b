import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depscreen.errors import BadItemCount, ItemOutOfRange
from depscreen import surveys as S


# --- PHQ-9 -------------------------------------------------------------------

def test_phq9_all_zeros():
    label = S.score_phq9([0] * 9)
    assert (label.phq9_total, label.band, label.binary) == (0, "none", "non_depressed")


def test_phq9_all_threes():
    label = S.score_phq9([3] * 9)
    assert (label.phq9_total, label.band, label.binary) == (27, "severe", "depressed")


def test_phq9_mild_example():
    label = S.score_phq9([1, 1, 1, 0, 0, 1, 0, 0, 1])
    assert (label.phq9_total, label.band, label.binary) == (5, "mild", "non_depressed")


def test_phq9_moderate_is_depressed():
    label = S.score_phq9([2, 2, 2, 2, 2, 0, 0, 0, 0])
    assert (label.phq9_total, label.band, label.binary) == (10, "moderate", "depressed")


def test_phq9_band_boundaries():
    expected = {4: "none", 5: "mild", 9: "mild", 10: "moderate",
                14: "moderate", 15: "moderately_severe",
                19: "moderately_severe", 20: "severe", 27: "severe"}
    for total, band in expected.items():
        assert S.phq9_band(total) == band


def test_phq9_exhaustive_partition_and_binary_rule():
    bands = [S.phq9_band(t) for t in range(28)]
    assert bands.count("none") == 5
    assert bands.count("mild") == 5
    assert bands.count("moderate") == 5
    assert bands.count("moderately_severe") == 5
    assert bands.count("severe") == 8
    for t in range(28):
        assert (S.phq9_binary(t) == "depressed") == (t >= 10)


def test_phq9_errors():
    with pytest.raises(BadItemCount):
        S.score_phq9([0] * 8)
    with pytest.raises(ItemOutOfRange):
        S.score_phq9([0] * 8 + [4])
    with pytest.raises(ItemOutOfRange):
        S.score_phq9([-1] + [0] * 8)


# --- GAD-7 -------------------------------------------------------------------

def test_gad7_examples():
    assert S.score_gad7([0] * 7).gad_band == "minimal"
    assert S.score_gad7([3] * 7) == S.AnxietyLabel(gad7_total=21, gad_band="severe")
    assert S.score_gad7([2, 2, 2, 2, 2, 0, 0]).gad_band == "moderate"


def test_gad7_boundaries():
    for total, band in [(0, "minimal"), (4, "minimal"), (5, "mild"),
                        (9, "mild"), (10, "moderate"), (14, "moderate"),
                        (15, "severe"), (21, "severe")]:
        assert S.gad7_band(total) == band


# --- PANAS -------------------------------------------------------------------

def test_panas_extremes():
    items = [5 if i in S.PANAS_PA_ITEMS else 1 for i in range(1, 21)]
    label = S.score_panas(items)
    assert (label.pa_total, label.na_total, label.polarity) == (50, 10, "positive")


def test_panas_tie_is_neutral():
    label = S.score_panas([3] * 20)
    assert label.pa_total == label.na_total == 30
    assert label.polarity == "neutral"


def test_panas_negative():
    items = [1 if i in S.PANAS_PA_ITEMS else 5 for i in range(1, 21)]
    assert S.score_panas(items).polarity == "negative"


def test_panas_matches_sum_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        items = [int(v) for v in rng.integers(1, 6, 20)]
        label = S.score_panas(items)
        pa = sum(v for i, v in enumerate(items, 1) if i in S.PANAS_PA_ITEMS)
        na = sum(v for i, v in enumerate(items, 1) if i not in S.PANAS_PA_ITEMS)
        assert (label.pa_total, label.na_total) == (pa, na)


# --- STAI-T ------------------------------------------------------------------

def test_stai_min_no_reversals():
    label = S.score_stai_t([1] * 20, reversed_items=frozenset())
    assert (label.stai_total, label.stai_band) == (20, "low")


def test_stai_reversal_mapping():
    # all-1 answers with the default 9 reversed items -> 11*1 + 9*4 = 47
    label = S.score_stai_t([1] * 20)
    assert label.stai_total == 11 + 9 * 4
    assert label.stai_band == "high"


def test_stai_bands():
    for total, band in [(20, "low"), (37, "low"), (38, "medium"),
                        (40, "medium"), (44, "medium"), (45, "high"),
                        (80, "high")]:
        assert S.stai_band(total) == band


# --- generic ----------------------------------------------------------------

def test_response_dispatch():
    r = S.SurveyResponse("phq9", (0, 0, 0, 0, 0, 0, 0, 0, 0))
    assert S.score(r).band == "none"
    with pytest.raises(BadItemCount):
        S.SurveyResponse("nope", (1,))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=3), min_size=9, max_size=9),
       st.integers(min_value=0, max_value=8))
def test_phq9_monotonicity(items, idx):
    base = S.score_phq9(items)
    if items[idx] < 3:
        bumped = list(items)
        bumped[idx] += 1
        higher = S.score_phq9(bumped)
        assert higher.phq9_total == base.phq9_total + 1
        order = list(S.PHQ9_BANDS)
        assert order.index(higher.band) >= order.index(base.band)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=3), min_size=7, max_size=7))
def test_gad7_total_matches_oracle(items):
    total = 0
    for v in items:
        total += v
    assert S.score_gad7(items).gad7_total == total
