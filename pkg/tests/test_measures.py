import math

import numpy as np
import pytest

from loggap.errors import NonPSDQuadratic
from loggap.measures import (Gaussian, MeasureSpec, NuNQ, NuP, Perturbed,
                             PerturbationSpec, Product, UniformInterval,
                             alpha_p, build_measure, covariance_by_quadrature,
                             exact_poincare, expectation_with_error, integrate,
                             lp_ball)


def test_alpha_p_values():
    assert alpha_p(1.0) == pytest.approx(2.0, abs=1e-14)
    assert alpha_p(2.0) == pytest.approx(math.sqrt(math.pi), abs=1e-14)
    # Gamma(1 + 1/p) is minimized around p ~ 2.16; alpha is decreasing in p
    assert alpha_p(1.0) > alpha_p(1.5) > alpha_p(2.0)


def test_exact_poincare_closed_forms():
    assert exact_poincare(MeasureSpec(1, UniformInterval(-1.0, 3.0))) == \
        pytest.approx(16.0 / math.pi ** 2, rel=1e-14)
    assert exact_poincare(MeasureSpec(1, NuP(1.0))) == pytest.approx(4.0)
    cov = ((2.0, 0.5), (0.5, 1.0))
    lam_max = np.linalg.eigvalsh(np.array(cov)).max()
    assert exact_poincare(MeasureSpec(2, Gaussian(cov))) == \
        pytest.approx(lam_max, rel=1e-14)


def test_exact_poincare_tensorizes():
    comps = (MeasureSpec(1, Gaussian(2.0)),
             MeasureSpec(1, UniformInterval(-0.5, 0.5)))
    spec = MeasureSpec(2, Product(comps))
    assert exact_poincare(spec) == pytest.approx(
        max(exact_poincare(c) for c in comps))


def test_exact_poincare_scale():
    base = exact_poincare(MeasureSpec(1, Gaussian(1.0)))
    assert exact_poincare(MeasureSpec(1, Gaussian(1.0), scale=3.0)) == \
        pytest.approx(9.0 * base)


def test_spec_json_roundtrip():
    pert = PerturbationSpec(kind="indicator_body", body=lp_ball(2.0, 1.5),
                            even=True, unconditional=True, log_concave=True)
    base = MeasureSpec(2, Product((MeasureSpec(1, NuP(1.5)),
                                   MeasureSpec(1, NuP(1.5)))))
    for spec in (
        MeasureSpec(2, Gaussian(((1.0, 0.2), (0.2, 0.7)))),
        MeasureSpec(3, NuNQ(((0.5, 0.1, 0.0), (0.1, 0.4, 0.0),
                             (0.0, 0.0, 0.2)))),
        MeasureSpec(2, Perturbed(base, pert)),
        MeasureSpec(1, NuP(4.0), scale=2.0),
    ):
        again = MeasureSpec.from_json(spec.to_json())
        assert again.to_dict() == spec.to_dict()


def test_symmetry_flags():
    d = build_measure(MeasureSpec(2, Gaussian(1.0)))
    assert d.even and d.unconditional
    d = build_measure(MeasureSpec(2, NuNQ(((0.5, 0.2), (0.2, 0.5)))))
    assert d.even and not d.unconditional


def test_nonpsd_quadratic_rejected():
    with pytest.raises(NonPSDQuadratic):
        MeasureSpec(2, NuNQ(((1.0, 2.0), (2.0, 1.0))))


def test_nu_p_outside_range_is_1d_only():
    MeasureSpec(1, NuP(4.0))  # fine
    with pytest.raises(ValueError):
        MeasureSpec(2, NuP(4.0))


def test_product_dims_must_match():
    with pytest.raises(ValueError):
        MeasureSpec(3, Product((MeasureSpec(1, NuP(1.0)),
                                MeasureSpec(1, NuP(1.0)))))


def test_normalized_gaussian_integrates_to_one():
    d = build_measure(MeasureSpec(2, Gaussian(1.0)))
    assert integrate(d, resolution=256) == pytest.approx(1.0, abs=1e-6)


def test_covariance_by_quadrature_gaussian():
    cov = np.diag([1.0, 0.5])
    d = build_measure(MeasureSpec(2, Gaussian((1.0, 0.5))))
    got = covariance_by_quadrature(d, resolution=256)
    assert np.allclose(got, cov, atol=2e-4)


def test_expectation_with_error_is_calibrated():
    d = build_measure(MeasureSpec(2, Gaussian(1.0)))
    val, err = expectation_with_error(d, lambda x: np.cos(x[:, 0]),
                                      resolution=256)
    exact = math.exp(-0.5)
    assert abs(val - exact) <= max(err * 10, 1e-8)


def test_perturbation_cannot_raise_coordinate_variance():
    # restricting an even product measure to a symmetric convex body
    # shrinks every coordinate variance
    comps = (MeasureSpec(1, NuP(1.5)), MeasureSpec(1, NuP(1.5)))
    base_spec = MeasureSpec(2, Product(comps))
    pert = PerturbationSpec(kind="indicator_body", body=lp_ball(2.0, 1.2),
                            even=True, unconditional=False, log_concave=True)
    cov_base = covariance_by_quadrature(build_measure(base_spec))
    cov_rest = covariance_by_quadrature(
        build_measure(MeasureSpec(2, Perturbed(base_spec, pert))))
    assert np.all(np.diag(cov_rest) <= np.diag(cov_base) + 1e-8)
