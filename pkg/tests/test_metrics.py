from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from valuenav.episode import EpisodeResult
from valuenav.errors import InputError
from valuenav.metrics import compute_metrics, spl_term


def _result(success, oracle, ne, tl, l, eid="e"):
    return EpisodeResult(eid, success, oracle, ne, tl, l, 0, 0, "DconFlag", [])


FOUR = [
    _result(True, True, 0.5, 10.0, 8.0),  # SPL term 0.8
    _result(False, True, 3.0, 20.0, 12.0),
    _result(True, True, 0.2, 5.0, 5.0),  # 1.0
    _result(False, False, 6.3, 7.0, 9.0),
]


def test_hand_computed_table():
    m = compute_metrics(FOUR)
    assert m.episodes == 4
    assert m.sr == pytest.approx(50.0)
    assert m.osr == pytest.approx(75.0)
    assert m.spl == pytest.approx(100 * (0.8 + 1.0) / 4)
    assert m.ne == pytest.approx((0.5 + 3.0 + 0.2 + 6.3) / 4)
    assert m.tl == pytest.approx(10.5)


def test_spl_shortest_route_is_100():
    assert compute_metrics([_result(True, True, 0.1, 4.0, 4.0)]).spl == pytest.approx(100.0)


def test_spl_twice_shortest_is_50():
    assert compute_metrics([_result(True, True, 0.1, 8.0, 4.0)]).spl == pytest.approx(50.0)


def test_spl_shorter_than_geodesic_is_capped():
    # Euclidean success radius lets a path end before the geodesic region
    assert spl_term(True, 4.0, 3.5) == 1.0


def test_spl_zero_length_cases():
    assert spl_term(True, 0.0, 0.0) == 1.0
    assert spl_term(True, 0.0, 2.0) == 0.0
    assert spl_term(False, None, 2.0) == 0.0
    with pytest.raises(InputError):
        spl_term(True, None, 2.0)


def test_empty_results_rejected():
    with pytest.raises(InputError):
        compute_metrics([])


def test_format_has_all_columns():
    text = compute_metrics(FOUR).format()
    for col in ("SR", "OSR", "SPL", "NE", "TL"):
        assert col in text.splitlines()[0]


results = st.builds(
    _result,
    st.booleans(),
    st.booleans(),
    st.floats(0, 50),
    st.floats(0, 100),
    st.floats(0, 100),
)


@given(st.lists(results, min_size=1, max_size=20))
def test_metrics_bounds(rs):
    m = compute_metrics(rs)
    for v in (m.sr, m.osr, m.spl):
        assert 0.0 <= v <= 100.0 + 1e-9
    assert m.spl <= m.sr + 1e-9
    assert m.ne >= 0 and m.tl >= 0
