import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fcgprobe.errors import ParseError, ValidationError
from fcgprobe.metrics import (
    MetricsReport,
    SampleRow,
    attack_success_rate,
    average_surviving_genes,
    check_report,
    perturbation_rate,
)


def test_examples():
    rows = [SampleRow(f"s{i}", "Success" if i < 5 else "Exhausted", 0.0, 1) for i in range(10)]
    assert attack_success_rate(rows) == 0.5
    assert perturbation_rate([SampleRow("a", "Success", 10 / 100, 3)]) == 0.1
    assert average_surviving_genes([SampleRow("a", "Exhausted", 0.0, 2, [10, 20])]) == 15
    assert perturbation_rate(rows[5:]) is None
    assert attack_success_rate([]) == 0.0


rows_st = st.lists(
    st.builds(
        SampleRow,
        seed=st.text("abc", min_size=1, max_size=4),
        outcome=st.sampled_from(["Success", "Exhausted"]),
        delta=st.floats(0, 5, allow_nan=False),
        generations=st.integers(1, 40),
        genes=st.lists(st.integers(0, 30000), min_size=1, max_size=40),
        wall_time=st.floats(0, 100),
    ),
    max_size=25,
)


@given(rows_st, st.integers(0, 1000))
def test_recompute_is_exact_and_order_free(rows, seed):
    rep = MetricsReport.from_rows("ga", rows)
    check_report(rep)
    shuffled = rows[:]
    random.Random(seed).shuffle(shuffled)
    again = MetricsReport.from_rows("ga", shuffled)
    assert (again.asr, again.pr, again.asgg) == (rep.asr, rep.pr, rep.asgg)
    back = MetricsReport.loads(rep.dumps())
    check_report(back)
    assert back.dumps() == rep.dumps()


def test_tampered_report_rejected():
    rep = MetricsReport.from_rows("ga", [SampleRow("a", "Success", 0.2, 1, [5])])
    rep.asr = 0.9
    with pytest.raises(ValidationError):
        check_report(rep)


def test_wall_time_only_on_request():
    rep = MetricsReport.from_rows("ga", [SampleRow("a", "Success", 0.2, 1, [5], 3.5)])
    assert "wall_time" not in rep.dumps()
    assert "wall_time" in rep.dumps(include_time=True)


def test_bad_documents():
    for text in ("", "{}", '{"samples": [{"x": 1}]}'):
        with pytest.raises(ParseError):
            MetricsReport.loads(text)
