import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mtmm_audit.pplot import (
    count_bars_csv, pplot_points, read_pvalue_csv, render, uniformity_diagnostics,
)

FIXTURES = Path(__file__).parent / "fixtures"
SVG = "{http://www.w3.org/2000/svg}"

pvals = st.lists(st.floats(1e-12, 1.0), min_size=1, max_size=60)


def test_single_point():
    s = pplot_points([0.7])
    assert s.points == ((1, 0.7),)
    assert s.reference_slope == 0.5


def test_sorting_contract():
    assert pplot_points([0.04, 0.01, 0.9]).points == ((1, 0.01), (2, 0.04), (3, 0.9))


@pytest.mark.parametrize("bad", [[], [0.0], [1.2], [0.5, -0.1]])
def test_invalid_input(bad):
    with pytest.raises(ValueError):
        pplot_points(bad)


@given(pvals)
def test_idempotent_and_multiset_preserving(ps):
    s = pplot_points(ps)
    again = pplot_points([p for _, p in s.points])
    assert again == s
    assert sorted(ps) == [p for _, p in s.points]
    assert [r for r, _ in s.points] == list(range(1, len(ps) + 1))


def test_uniform_slope_near_expected():
    ps = np.random.default_rng(12).uniform(size=500)
    d = uniformity_diagnostics(pplot_points(ps))
    assert abs(d.fitted_slope - 1 / 501) <= 0.1 / 501


def test_linear_ps_are_near_null():
    m = 99
    d = uniformity_diagnostics(pplot_points([i / (m + 1) for i in range(1, m + 1)]))
    assert d.ks_stat <= 0.01 + 1e-12  # sup |i/99 - i/100| = 0.01 exactly
    assert d.near_null is True
    assert d.fitted_slope == pytest.approx(1 / 100)


def test_spike_of_small_ps_is_not_null():
    rng = np.random.default_rng(21)
    ps = list(rng.uniform(size=90)) + [1e-6] * 10
    d = uniformity_diagnostics(pplot_points(ps))
    assert d.ks_stat > 1.358 / math.sqrt(100)
    assert d.near_null is False


def test_small_m_has_no_verdict():
    d = uniformity_diagnostics(pplot_points([0.2, 0.5, 0.9]))
    assert d.near_null is None
    assert d.ks_stat == pytest.approx(max(1 / 3 - 0.2, 0.5 - 1 / 3, 2 / 3 - 0.5, 0.9 - 2 / 3, 1 - 0.9))
    assert d.fitted_slope > 0


def test_ks_matches_scipy():
    from scipy.stats import kstest
    ps = np.random.default_rng(3).uniform(size=200)
    assert uniformity_diagnostics(pplot_points(ps)).ks_stat == pytest.approx(kstest(ps, "uniform").statistic)


def test_csv_fixture():
    assert render(pplot_points([0.01]), "csv") == b"rank,p\n1,0.01\n"
    assert render(pplot_points([0.04, 0.01, 0.9]), "csv") == (FIXTURES / "pplot_three.csv").read_bytes()


def test_csv_precision():
    assert render(pplot_points([1 / 3]), "csv") == b"rank,p\n1,0.3333333333\n"


def test_svg_fixture():
    assert render(pplot_points([0.04, 0.01, 0.9]), "svg") == (FIXTURES / "pplot_three.svg").read_bytes()


@given(pvals)
def test_svg_structure(ps):
    s = pplot_points(ps)
    root = ET.fromstring(render(s, "svg"))
    assert root.get("viewBox") == "0 0 640 480"
    assert len(root.findall(f"{SVG}circle")) == s.m
    (ref,) = [e for e in root.findall(f"{SVG}line") if e.get("class") == "reference"]
    x1, y1, x2, y2 = (float(ref.get(k)) for k in ("x1", "y1", "x2", "y2"))
    # origin at the axis corner, ends where rank m + 1 meets p = 1
    assert (x1, y1, x2, y2) == (48.0, 432.0, 592.0, 48.0)


def test_unknown_format():
    with pytest.raises(ValueError):
        render(pplot_points([0.5]), "png")


def test_n_tests_bar_sidecar(malik):
    data = count_bars_csv([s.id for s in malik], [s.n_tests for s in malik])
    lines = data.decode().splitlines()
    assert lines[0] == "label,count"
    assert [int(l.split(",")[1]) for l in lines[1:]] == [88, 85, 101, 63, 60, 54, 87, 114, 50, 84]
    assert data == (FIXTURES / "n_tests_bars.csv").read_bytes()


def test_read_pvalue_csv():
    assert read_pvalue_csv("p\n0.1\n0.2\n") == [0.1, 0.2]
    assert read_pvalue_csv("rank,p\n1,0.3\n") == [0.3]
    assert read_pvalue_csv("0.5\n0.25\n") == [0.5, 0.25]
