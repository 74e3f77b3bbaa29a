"""
Tests for spec parsing, file IO, number formatting and plots
"""

import re

import numpy as np
import pytest

from core.errors import ConfigError, InvalidDomain, InvalidSpec, NonPositiveMean, SupportViolation, TooFewRows
from core.families import Binomial, Gamma, GaussianLocation, NegativeBinomial, Poisson
from core.measures import make_measure
from estimation.objectives import KS, MMD, GaussianRBF, Laplace, Moments
from experiments.studies import SlopeFit, StudyRow
from utils.file_io import read_config, read_data, read_measure, write_data, write_measure
from utils.formatting import format_measure, format_number
from utils.spec_validator import (
    clean_spec,
    looks_inline,
    parse_domain,
    parse_family,
    parse_inline_measure,
    parse_phi,
)
from utils.visualizer import create_report_figure, render_html_report, render_svg_plot, slope_label


# -----------------------------------------------------------------------------
# Spec parsing
# -----------------------------------------------------------------------------

def test_clean_spec():
    assert clean_spec("  Gaussian( sigma = 2 ) ") == "gaussian(sigma=2)"
    with pytest.raises(InvalidSpec):
        clean_spec("   ")


@pytest.mark.parametrize("text, expected", [
    ("gaussian", GaussianLocation()),
    ("gaussian(sigma=2.0,d=2)", GaussianLocation(sigma=2.0, d=2)),
    ("poisson", Poisson()),
    ("gamma(alpha=3)", Gamma(alpha=3.0)),
    ("Binomial(m=10)", Binomial(m=10)),
    ("negbinomial(r=2.5)", NegativeBinomial(r=2.5)),
])
def test_parse_family(text, expected):
    assert parse_family(text).spec() == expected.spec()


@pytest.mark.parametrize("text, token", [
    ("cauchy", "cauchy"),
    ("gaussian(tau=1)", "tau"),
    ("binomial(m=2.5)", "2.5"),
    ("gamma(alpha=x)", "x"),
    ("gaussian(sigma=1,sigma=2)", "sigma"),
    ("gaussian(sigma)", "sigma"),
])
def test_parse_family_errors_name_the_token(text, token):
    with pytest.raises(InvalidSpec, match=re.escape(token)):
        parse_family(text)


@pytest.mark.parametrize("text, expected", [
    ("ks", KS()),
    ("mmd", MMD(GaussianRBF(1.0))),
    ("mmd(rbf,gamma=0.5)", MMD(GaussianRBF(0.5))),
    ("mmd(laplace,scale=2)", MMD(Laplace(2.0))),
    ("moments(order=5,theta0=1)", Moments(5, 1.0)),
])
def test_parse_phi(text, expected):
    assert parse_phi(text) == expected


@pytest.mark.parametrize("text", ["ks(1)", "mmd(matern)", "wasserstein", "moments(order=-1)"])
def test_parse_phi_errors(text):
    with pytest.raises((InvalidSpec, ValueError)):
        parse_phi(text)


def test_parse_domain():
    domain = parse_domain("-5:5, 0:2")
    assert domain.lower == (-5.0, 0.0)
    assert domain.upper == (5.0, 2.0)
    with pytest.raises(InvalidSpec, match="1:2:3"):
        parse_domain("1:2:3")
    with pytest.raises(InvalidSpec):
        parse_domain("a:b")
    with pytest.raises(InvalidDomain):
        parse_domain("3:1")


def test_inline_measures():
    G = parse_inline_measure("0.25 -1; 0.75 1")
    np.testing.assert_allclose(G.weights, [0.25, 0.75])
    np.testing.assert_allclose(G.atoms[:, 0], [-1.0, 1.0])
    assert looks_inline("1 0")
    assert looks_inline("0.5 0 0; 0.5 1 1")
    assert not looks_inline("truth.txt")
    with pytest.raises(InvalidSpec):
        parse_inline_measure("0.5 1 2; 0.5 1")
    with pytest.raises(InvalidSpec):
        parse_inline_measure("1")


# -----------------------------------------------------------------------------
# Files
# -----------------------------------------------------------------------------

def test_measure_file_round_trip(tmp_path):
    G = make_measure([[0.1, -2.0], [1.0 / 3.0, 4.0]], [0.3, 0.7])
    path = tmp_path / "measure.txt"
    write_measure(G, path)
    H = read_measure(str(path))
    np.testing.assert_array_equal(H.atoms, G.atoms)
    np.testing.assert_array_equal(H.weights, G.weights)


def test_measure_file_with_comments(tmp_path):
    path = tmp_path / "truth.txt"
    path.write_text("# weight atom\n0.5 -1\n\n0.5 1  # right\n")
    assert read_measure(str(path)).k == 2


def test_missing_measure_file():
    with pytest.raises(OSError):
        read_measure("/nonexistent/measure.txt")


def test_data_files(tmp_path):
    path = tmp_path / "data.txt"
    write_data(np.array([1.5, -0.25, 3.0]), path, GaussianLocation())
    np.testing.assert_array_equal(read_data(path, GaussianLocation()), [1.5, -0.25, 3.0])

    write_data(np.array([3.0, 0.0, 7.0]), path, Poisson())
    assert path.read_text() == "3\n0\n7\n"
    np.testing.assert_array_equal(read_data(path, Poisson()), [3.0, 0.0, 7.0])


def test_two_column_data(tmp_path):
    path = tmp_path / "data2.txt"
    path.write_text("0 1\n2 3\n")
    assert read_data(path, GaussianLocation(d=2)).shape == (2, 2)
    with pytest.raises(InvalidSpec):
        read_data(path, GaussianLocation())


def test_data_outside_the_support(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1\n2.5\n")
    with pytest.raises(SupportViolation):
        read_data(path, Poisson())


def test_read_config(tmp_path):
    path = tmp_path / "study.cfg"
    path.write_text("# study\nFamily = gaussian\nn-grid = 50,100  # sizes\nseed=1\nseed=2\n")
    assert read_config(path) == {'family': 'gaussian', 'n_grid': '50,100', 'seed': '2'}
    path.write_text("family gaussian\n")
    with pytest.raises(ConfigError, match=":1:"):
        read_config(path)


# -----------------------------------------------------------------------------
# Formatting
# -----------------------------------------------------------------------------

@pytest.mark.parametrize("value, expected", [
    (0.0, "0"),
    (0.5, "0.5"),
    (2.0, "2"),
    (1.0 / 3.0, "0.333333333333"),
    (1.2345e-5, "1.23450000000e-05"),
    (-0.25, "-0.25"),
])
def test_format_number(value, expected):
    assert format_number(value) == expected


def test_format_measure_is_exact():
    G = make_measure([1.0 / 3.0], [1.0])
    assert format_measure(G) == "1 0.33333333333333331\n"


# -----------------------------------------------------------------------------
# Plots
# -----------------------------------------------------------------------------

ROWS = [StudyRow(100, 0.2, 0.01, 10), StudyRow(400, 0.1, 0.006, 10), StudyRow(1600, 0.05, 0.002, 10)]
FIT = SlopeFit(-0.5, np.log(2.0), 0.0123)


def test_svg_plot(tmp_path):
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    render_svg_plot(ROWS, FIT, first)
    render_svg_plot(ROWS, FIT, second)
    text = first.read_text(encoding="utf-8")
    assert text.startswith("<svg")
    assert "slope = -0.500 ± 0.012" in text
    assert first.read_bytes() == second.read_bytes()


def test_svg_plot_without_a_fit(tmp_path):
    path = tmp_path / "plain.svg"
    render_svg_plot(ROWS[:1], None, path)
    assert "slope" not in path.read_text(encoding="utf-8")


def test_plot_errors(tmp_path):
    with pytest.raises(TooFewRows):
        render_svg_plot([], None, tmp_path / "none.svg")
    with pytest.raises(NonPositiveMean):
        render_svg_plot([StudyRow(10, 0.0, 0.0, 1)], None, tmp_path / "zero.svg")


def test_slope_label():
    assert slope_label(FIT) == "slope = -0.500 ± 0.012"


def test_html_report(tmp_path):
    figure = create_report_figure(ROWS, FIT)
    assert len(figure.data) == 2
    path = tmp_path / "report.html"
    render_html_report(ROWS, FIT, path)
    assert "plotly" in path.read_text(encoding="utf-8").lower()
