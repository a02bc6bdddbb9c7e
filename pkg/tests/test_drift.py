"""Weekly aggregation and Shewhart drift rules."""

from datetime import date, datetime, timedelta, timezone

import numpy as np
import pytest

from gearwatch.drift import (
    RULE_LIMIT,
    RULE_RUN,
    DriftMonitor,
    WeeklyResidual,
    build_chart,
    detect_drift,
    weekly_series,
)
from gearwatch.errors import MonitoringError

UTC = timezone.utc


def wk(iso_year, iso_week, value, count=100, tid="T01"):
    return WeeklyResidual(tid, iso_year, iso_week, value, count)


def consecutive_weeks(start=(2017, 1), n=10, value=1.0):
    """n observed weeks in a row starting at the given ISO week."""
    monday = date.fromisocalendar(start[0], start[1], 1)
    out = []
    for i in range(n):
        d = monday + timedelta(weeks=i)
        y, w, _ = d.isocalendar()
        v = value(i) if callable(value) else value
        out.append(wk(y, w, v))
    return out


class TestWeekIndex:
    def test_monday_start_axis(self):
        # 2021-01-04 is the Monday of ISO 2021-W1
        assert wk(2021, 1, 0.0).week_index() == 105399
        assert wk(2021, 2, 0.0).week_index() == 105400

    def test_consecutive_across_year_boundary(self):
        assert wk(2021, 52, 0.0).week_index() == 105450
        assert wk(2022, 1, 0.0).week_index() == 105451


class TestWeeklySeries:
    def test_means_and_counts(self):
        stamps = [
            datetime(2017, 1, 2, 0, 0, tzinfo=UTC),   # Monday, W1
            datetime(2017, 1, 4, 12, 0, tzinfo=UTC),  # W1
            datetime(2017, 1, 8, 23, 50, tzinfo=UTC),  # Sunday, still W1
            datetime(2017, 1, 9, 0, 0, tzinfo=UTC),   # Monday, W2
            datetime(2017, 1, 10, 0, 0, tzinfo=UTC),  # W2
        ]
        values = [1.0, 2.0, 4.0, 10.0, -10.0]
        weeks = weekly_series(stamps, values, "T07")
        assert len(weeks) == 2
        assert weeks[0] == wk(2017, 1, 2.3333333333333335, count=3, tid="T07")
        assert weeks[1] == wk(2017, 2, 0.0, count=2, tid="T07")

    def test_order_independent(self):
        rng = np.random.default_rng(0)
        stamps = [
            datetime(2017, 1, 2, tzinfo=UTC) + timedelta(hours=7 * i)
            for i in range(60)
        ]
        values = rng.normal(size=60)
        perm = rng.permutation(60)
        a = weekly_series(stamps, values, "T01")
        b = weekly_series([stamps[i] for i in perm], values[perm], "T01")
        assert a == b

    def test_numpy_datetime64_and_python_datetimes_agree(self):
        py = [datetime(2016, 3, 1, tzinfo=UTC) + timedelta(hours=13 * i)
              for i in range(40)]
        np64 = np.array([np.datetime64(t.replace(tzinfo=None)) for t in py])
        values = np.arange(40.0)
        assert weekly_series(py, values, "x") == weekly_series(np64, values, "x")

    def test_missing_weeks_are_absent(self):
        stamps = [datetime(2017, 1, 2, tzinfo=UTC),
                  datetime(2017, 1, 23, tzinfo=UTC)]
        weeks = weekly_series(stamps, [1.0, 2.0], "T01")
        assert [(w.iso_year, w.iso_week) for w in weeks] == [(2017, 1), (2017, 4)]

    def test_length_mismatch(self):
        with pytest.raises(MonitoringError):
            weekly_series([datetime(2017, 1, 2, tzinfo=UTC)], [1.0, 2.0], "T01")


class TestChartFit:
    def test_baseline_from_known_means(self):
        # means 1..8: center 4.5, sample sd sqrt(6)
        chart = build_chart(consecutive_weeks(n=8, value=lambda i: float(i + 1)))
        assert chart.center_ == 4.5
        assert chart.sigma_ == 2.449489742783178
        assert chart.ucl_ == 11.848469228349533
        assert chart.lcl_ == -2.8484692283495336

    def test_too_few_baseline_weeks(self):
        with pytest.raises(MonitoringError, match="insufficient baseline"):
            build_chart(consecutive_weeks(n=7))

    def test_constant_baseline_is_degenerate(self):
        with pytest.raises(MonitoringError, match="zero variance"):
            build_chart(consecutive_weeks(n=8, value=0.25))

    def test_detect_requires_fit(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            DriftMonitor().detect([wk(2017, 1, 0.0)])


def fitted_chart(center=0.0, sigma=1.0):
    """Monitor with hand-set parameters, bypassing baseline estimation."""
    m = DriftMonitor()
    m.center_ = center
    m.sigma_ = sigma
    m.ucl_ = center + 3 * sigma
    m.lcl_ = center - 3 * sigma
    return m


class TestRules:
    def test_limit_rule_is_strict(self):
        chart = fitted_chart()
        flags = chart.detect([wk(2017, 1, 3.0001), wk(2017, 2, 2.9999),
                              wk(2017, 3, -3.0001)])
        assert [(f.iso_week, f.rule) for f in flags] == [
            (1, RULE_LIMIT), (3, RULE_LIMIT),
        ]
        assert flags[0].value == 3.0001

    def test_run_of_eight_flags_once_at_the_eighth_week(self):
        chart = fitted_chart()
        flags = chart.detect(consecutive_weeks(n=16, value=0.5))
        assert len(flags) == 1
        f = flags[0]
        assert f.rule == RULE_RUN
        eighth = consecutive_weeks(n=16)[7]
        assert (f.iso_year, f.iso_week) == (eighth.iso_year, eighth.iso_week)

    def test_seven_weeks_do_not_flag(self):
        chart = fitted_chart()
        assert chart.detect(consecutive_weeks(n=7, value=0.5)) == []

    def test_gap_resets_the_run(self):
        chart = fitted_chart()
        weeks = consecutive_weeks(n=12, value=0.5)
        del weeks[5]  # one missing week splits 12 into runs of 5 and 6
        assert chart.detect(weeks) == []

    def test_side_change_resets_the_run(self):
        chart = fitted_chart()
        values = [0.5] * 7 + [-0.5] + [0.5] * 7
        weeks = consecutive_weeks(n=15, value=lambda i: values[i])
        assert chart.detect(weeks) == []

    def test_center_value_resets_the_run(self):
        chart = fitted_chart()
        values = [0.5] * 7 + [0.0] + [0.5] * 7
        weeks = consecutive_weeks(n=15, value=lambda i: values[i])
        assert chart.detect(weeks) == []

    def test_two_maximal_runs_flag_twice(self):
        chart = fitted_chart()
        values = [0.5] * 8 + [-0.5] + [0.5] * 8
        weeks = consecutive_weeks(n=17, value=lambda i: values[i])
        flags = chart.detect(weeks)
        assert [f.rule for f in flags] == [RULE_RUN, RULE_RUN]
        assert flags[0].iso_week != flags[1].iso_week

    def test_below_center_runs_flag_too(self):
        chart = fitted_chart()
        flags = chart.detect(consecutive_weeks(n=8, value=-0.25))
        assert [f.rule for f in flags] == [RULE_RUN]

    def test_both_rules_can_fire_on_one_week(self):
        chart = fitted_chart()
        values = [0.5] * 7 + [4.0]
        flags = chart.detect(consecutive_weeks(n=8, value=lambda i: values[i]))
        assert sorted(f.rule for f in flags) == [RULE_LIMIT, RULE_RUN]

    def test_translation_invariance_of_flag_weeks(self):
        rng = np.random.default_rng(3)
        values = rng.normal(scale=1.0, size=40)
        values[20] = 5.0  # clear outlier
        base = consecutive_weeks(n=40, value=lambda i: values[i])
        shifted = consecutive_weeks(n=40, value=lambda i: values[i] + 100.0)
        fa = build_chart(base[:10]).detect(base)
        fb = build_chart([wk(w.iso_year, w.iso_week, w.mean_residual)
                          for w in shifted[:10]]).detect(shifted)
        assert [(f.iso_year, f.iso_week, f.rule) for f in fa] == \
               [(f.iso_year, f.iso_week, f.rule) for f in fb]

    def test_unsorted_input_is_sorted_before_detection(self):
        chart = fitted_chart()
        weeks = consecutive_weeks(n=9, value=0.5)
        flags = chart.detect(list(reversed(weeks)))
        assert [f.rule for f in flags] == [RULE_RUN]


def test_detect_drift_wrapper():
    chart = build_chart(consecutive_weeks(n=10, value=lambda i: float(i % 3)))
    weeks = consecutive_weeks(start=(2018, 1), n=5, value=50.0)
    flags = detect_drift(chart, weeks)
    assert all(f.rule == RULE_LIMIT for f in flags)
    assert len(flags) == 5
