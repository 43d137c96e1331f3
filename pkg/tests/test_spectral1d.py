import math

import numpy as np
import pytest

from loggap.measures import (Gaussian, MeasureSpec, NuP, UniformInterval,
                             build_measure)
from loggap.spectral1d import (bobkov_bracket, conditional_gap, poincare_1d,
                               solve_sturm_liouville)


def test_uniform_interval_gap():
    dens = build_measure(MeasureSpec(1, UniformInterval(-0.5, 0.5)))
    cp, err = poincare_1d(dens)
    assert cp == pytest.approx(1.0 / math.pi ** 2, rel=5e-3)


def test_laplace_gap():
    dens = build_measure(MeasureSpec(1, NuP(1.0)))
    cp, err = poincare_1d(dens, window=40.0)
    assert cp == pytest.approx(4.0, rel=0.05)


def test_gaussian_gap_scales_with_variance():
    for s2 in (1.0, 2.25):
        dens = build_measure(MeasureSpec(1, Gaussian(s2)))
        cp, _ = poincare_1d(dens)
        assert cp == pytest.approx(s2, rel=5e-3)


def test_error_bar_covers_truth():
    dens = build_measure(MeasureSpec(1, Gaussian(1.0)))
    cp, err = poincare_1d(dens)
    assert abs(cp - 1.0) <= max(err, 1e-6)


def test_two_sided_density_bracket():
    dens = build_measure(MeasureSpec(1, NuP(1.0)))
    lo, hi = bobkov_bracket(dens)
    cp, _ = poincare_1d(dens, window=40.0)
    assert lo <= cp <= hi * 1.01
    # for the symmetric exponential the upper end is attained
    assert hi == pytest.approx(4.0)


def test_discretization_consistency():
    # refining the grid moves lambda1 by no more than 4x the reported
    # Richardson error estimate
    dens = build_measure(MeasureSpec(1, Gaussian(1.0)))
    coarse = solve_sturm_liouville(dens, (-8.0, 8.0), 1024)
    fine = solve_sturm_liouville(dens, (-8.0, 8.0), 2048)
    drift = abs(fine.extrapolated_lambda1 - coarse.extrapolated_lambda1)
    assert drift <= 4.0 * max(coarse.lambda1_error, 1e-14)


def test_spectrum_report_serializes():
    dens = build_measure(MeasureSpec(1, Gaussian(1.0)))
    cp, _ = poincare_1d(dens)
    s = solve_sturm_liouville(dens, (-8.0, 8.0), 512)
    d = s.to_dict()
    assert set(d) >= {"lambda", "cp", "error", "window", "nodes"}
    assert d["cp"] == pytest.approx(cp, rel=0.01)


def test_conditional_gap_of_product_is_marginal_gap():
    dens = build_measure(MeasureSpec(2, Gaussian((1.0, 4.0))))
    # conditioning a product Gaussian on x2 leaves the x1 marginal
    gap = conditional_gap(dens, 0, np.array([0.0, 1.3]))
    assert gap == pytest.approx(1.0, rel=5e-3)
    gap = conditional_gap(dens, 1, np.array([0.4, 0.0]))
    assert gap == pytest.approx(0.25, rel=5e-3)
