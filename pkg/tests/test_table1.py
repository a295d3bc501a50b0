import csv

import pytest

from ghostsim.errors import ConfigError
from ghostsim.table1 import DEFAULT_ROWS, FleetRow, check_row, reproduce_table1, write_table1_csv

HOUR = 3600.0


def row(label):
    return next(r for r in DEFAULT_ROWS if r.label == label)


def test_2023_row_flap_every_three_hours_exactly():
    res = check_row(row("2023"))
    assert res.analytic_flap_s == 3 * HOUR
    assert res.analytic_hard_s == pytest.approx(100 * HOUR)
    assert res.consistent


def test_2025_row_48_seconds_at_implied_link_count():
    res = check_row(row("2025"))
    assert res.analytic_flap_s == pytest.approx(48.0, rel=1e-12)
    assert res.implied_n_flap == pytest.approx(2.25e7)
    assert res.consistent


def test_2024_hard_figure_flagged_not_matched():
    res = check_row(row("2024"))
    assert not res.consistent
    assert any("hard" in f for f in res.flags)
    assert res.analytic_hard_s == pytest.approx(10 * HOUR)
    assert res.analytic_hard_s != res.stated_hard_s


def test_empirical_flap_gap_within_five_percent():
    results = reproduce_table1(seed=0, min_flaps=10_000)
    for r in results:
        assert r.sim_flaps >= 10_000
        assert r.sim_relative_error() < 0.05
        lo, hi = r.sim_flap_ci_s
        assert lo < r.sim_flap_mean_s < hi


def test_analytic_only_skips_sampling(tmp_path):
    results = reproduce_table1(simulate=False)
    assert all(r.sim_flap_mean_s is None for r in results)
    write_table1_csv(results, tmp_path / "t.csv")
    rows = list(csv.DictReader(open(tmp_path / "t.csv")))
    assert [r["label"] for r in rows] == ["2023", "2024", "2025"]
    assert rows[1]["flags"] and not rows[0]["flags"]


def test_row_needs_links():
    with pytest.raises(ConfigError):
        check_row(FleetRow("x", 0, 0))
