import math

import numpy as np
import pytest
from scipy.integrate import quad

from loggap.errors import DensityUnderflow, FNotOdd
from loggap.measures import Gaussian, MeasureSpec, NuP, build_measure
from loggap.mixtures import (alpha_bound, alpha_bound_nu_p, alpha_profile,
                             alpha_weight, empirical_nu_p_constant,
                             from_density, gaussian_mixture, laplace_mixture,
                             nu_p_mixture, single_gaussian, tail_ratio_check,
                             weighted_variance_bound)


def test_laplace_weight_is_exact():
    d = laplace_mixture()
    t = np.linspace(0.0, 20.0, 200)
    assert np.max(np.abs(alpha_weight(d, t) - (t + 1.0))) < 1e-12


def test_gaussian_weight_is_constant_variance():
    for s in (0.7, 1.0, 2.0):
        d = single_gaussian(s)
        t = np.linspace(0.0, 10.0, 50)
        assert np.max(np.abs(alpha_weight(d, t) - s ** 2)) < 1e-9


def test_gaussian_mixture_weight_crosschecks_quadrature():
    d = gaussian_mixture([(0.8, 0.6), (1.5, 0.4)])
    e = from_density(d.phi, d.phi0)
    t = np.array([0.0, 0.5, 1.7, 4.0])
    assert np.allclose(alpha_weight(d, t), alpha_weight(e, t), rtol=1e-8)


@pytest.mark.parametrize("p", [1.0, 1.25, 1.5, 2.0])
def test_nu_p_tail_closed_form_vs_quadrature(p):
    d = nu_p_mixture(p)
    for t in (0.0, 0.7, 3.1):
        got = d.tail_first_moment(np.array([t]))[0]
        want, err = quad(lambda u: u * d.phi(np.array([u]))[0], t, 60.0,
                         epsabs=1e-13, limit=200)
        assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("p", [1.0, 1.25, 1.5, 1.75, 2.0])
def test_tail_lemma_bound(p):
    d = nu_p_mixture(p)
    t = np.linspace(0.0, 20.0, 200)
    assert np.all(alpha_weight(d, t) <= alpha_bound(d, t) + 1e-9)


def test_tail_ratio_inequality_where_applicable():
    for p in (1.25, 1.5, 1.75):
        for t in np.linspace(0.1, 12.0, 30):
            lhs, rhs, applicable, holds = tail_ratio_check(p, float(t))
            if applicable:
                assert holds, (p, t, lhs, rhs)


def test_empirical_refinement_constants_are_frozen():
    # measured once over a 400-point grid; drift means the tail model
    # changed
    assert empirical_nu_p_constant(1.25) == pytest.approx(0.7337, abs=2e-3)
    assert empirical_nu_p_constant(1.5) == pytest.approx(0.5953, abs=2e-3)
    assert empirical_nu_p_constant(1.75) == pytest.approx(0.5345, abs=2e-3)


def test_refined_bound_dominates_weight():
    for p in (1.25, 1.5, 1.75):
        d = nu_p_mixture(p)
        t = np.linspace(0.0, 20.0, 100)
        assert np.all(alpha_weight(d, t)
                      <= alpha_bound_nu_p(p, t) * (1 + 1e-9))


def test_weight_raises_deep_in_the_tail():
    d = single_gaussian(1.0)
    with pytest.raises(DensityUnderflow):
        alpha_weight(d, np.array([60.0]))


def test_alpha_profile_rows():
    d = laplace_mixture()
    rows = alpha_profile(d, np.linspace(0.0, 5.0, 11))
    assert rows.shape == (11, 3)
    assert np.all(rows[:, 1] <= rows[:, 2] + 1e-9)


def test_weighted_variance_bound_gaussian():
    dens = build_measure(MeasureSpec(2, Gaussian(1.0)))
    mixtures = [single_gaussian(1.0)] * 2
    var, bound, holds = weighted_variance_bound(
        dens, mixtures, lambda x: x[:, 0])
    assert holds
    assert var == pytest.approx(1.0, rel=1e-3)
    assert bound == pytest.approx(1.0, rel=1e-3)


def test_weighted_variance_bound_rejects_even_f():
    dens = build_measure(MeasureSpec(2, Gaussian(1.0)))
    mixtures = [single_gaussian(1.0)] * 2
    with pytest.raises(FNotOdd):
        weighted_variance_bound(dens, mixtures, lambda x: x[:, 0] ** 2)
