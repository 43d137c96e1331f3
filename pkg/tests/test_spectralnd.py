import math

import numpy as np
import pytest

from loggap.errors import (GroupDoesNotPreserveGrid, InsufficientSpectrum,
                           NotCentered)
from loggap.measures import (Gaussian, MeasureSpec, NuNQ, NuP, Product,
                             build_measure)
from loggap.spectral1d import poincare_1d
from loggap.spectralnd import (assemble_generator, eigenspace_structure,
                               grid_function, hminus_norm, hminus_norm_ascent,
                               lowest_spectrum, verify_interlacing,
                               verify_variance_inequality)


@pytest.fixture(scope="module")
def gauss_op():
    dens = build_measure(MeasureSpec(2, Gaussian(1.0)))
    return assemble_generator(dens, box=[8.0, 8.0], resolution=96)


@pytest.fixture(scope="module")
def gauss_report(gauss_op):
    return lowest_spectrum(gauss_op, k=5)


def test_gaussian_spectrum(gauss_report):
    lam = gauss_report.eigenvalues
    assert lam[0] == 0.0
    assert lam[1] == pytest.approx(1.0, rel=1e-3)
    assert lam[2] == pytest.approx(1.0, rel=1e-3)
    assert lam[3] == pytest.approx(2.0, rel=2e-3)


def test_residuals_are_small(gauss_report):
    # within a near-degenerate cluster the canonical (parity-aligned)
    # basis mixes discrete eigenvalues, so the residual of a cluster
    # member is only bounded by the cluster's eigenvalue spread
    lam = gauss_report.eigenvalues
    lam_max = lam.max()
    for cluster in gauss_report.multiplicity_groups:
        spread = lam[cluster].max() - lam[cluster].min()
        for i in cluster:
            assert gauss_report.residuals[i] <= \
                1e-8 * max(lam_max, 1.0) + 1.01 * spread


def test_parity_labels(gauss_report):
    assert gauss_report.global_parity[1] == "odd"
    assert gauss_report.global_parity[2] == "odd"
    assert gauss_report.global_parity[3] == "even"
    assert np.all(gauss_report.global_parity_score[1:4] < 1e-6)


def test_multiplicity_clusters(gauss_report):
    groups = gauss_report.multiplicity_groups
    assert groups[0] == [0]
    assert groups[1] == [1, 2]


def test_report_determinism():
    dens = build_measure(MeasureSpec(2, NuNQ(((0.5, 0.2), (0.2, 0.7)))))
    op = assemble_generator(dens, resolution=64)
    r1 = lowest_spectrum(op, k=4)
    r2 = lowest_spectrum(op, k=4)
    assert np.array_equal(r1.eigenvalues, r2.eigenvalues)
    assert np.array_equal(r1.eigenvectors, r2.eigenvectors)


def test_product_consistency_with_1d():
    comp = MeasureSpec(1, NuP(1.5))
    cp_1d, _ = poincare_1d(build_measure(comp))
    dens = build_measure(MeasureSpec(2, Product((comp, comp))))
    rep = lowest_spectrum(assemble_generator(dens, resolution=128), k=3)
    assert 1.0 / rep.eigenvalues[1] == pytest.approx(cp_1d, rel=0.01)


def test_flip_permutation_is_involution(gauss_op):
    perm = gauss_op.flip_permutation([0])
    assert np.array_equal(perm[perm], np.arange(len(perm)))


def test_hminus_gaussian_coordinate(gauss_op):
    f = grid_function(gauss_op, lambda x: x[:, 0])
    assert hminus_norm(gauss_op, f) == pytest.approx(1.0, rel=1e-3)


def test_hminus_requires_centering(gauss_op):
    f = grid_function(gauss_op, lambda x: x[:, 0] ** 2)
    with pytest.raises(NotCentered):
        hminus_norm(gauss_op, f)


def test_hminus_two_routes_agree(gauss_op):
    # conjugate gradients on the resolvent vs direct subspace ascent of
    # the defining supremum: independent routes to the same value
    rng = np.random.default_rng(5)
    c = rng.standard_normal(3)
    f = grid_function(gauss_op, lambda x: c[0] * x[:, 0] + c[1] * x[:, 1]
                      + c[2] * np.sin(x[:, 0]) * np.exp(-x[:, 1] ** 2 / 9))
    f = f - gauss_op.weights @ f
    a = hminus_norm(gauss_op, f)
    b = hminus_norm_ascent(gauss_op, f)
    assert b == pytest.approx(a, rel=5e-3)
    assert b <= a * (1 + 1e-9)  # ascent is a lower bound


def test_hminus_matches_dense_solve_unnormalized():
    # brute-force dense evaluation of sup <f,u> / ||grad u|| on a measure
    # whose total mass is far from 1 (regression: the norm must be taken
    # with respect to the normalized measure)
    dens = build_measure(MeasureSpec(2, NuNQ(0.5)))
    op = assemble_generator(dens, box=[8.0, 8.0], resolution=48)
    f = grid_function(op, lambda x: np.sin(x[:, 0]) * np.exp(-x[:, 1] ** 2))
    f = f - op.weights @ f
    m = op.mass
    total = m.sum()
    a_dense = op.stiffness.toarray() + np.outer(m, m) / total
    u = np.linalg.solve(a_dense, m * f)
    want = math.sqrt(float((m * f) @ u) / total)
    assert hminus_norm(op, f) == pytest.approx(want, rel=1e-8)


def test_variance_inequality_gaussian_pair():
    dens = build_measure(MeasureSpec(2, Gaussian(1.0)))
    op = assemble_generator(dens, box=[8.0, 8.0], resolution=128)
    f = grid_function(op, lambda x: x[:, 0] ** 2 - 1.0)
    lhs, rhs, holds, _ = verify_variance_inequality(op, f)
    assert holds
    assert lhs == pytest.approx(2.0, abs=1e-3)
    assert rhs == pytest.approx(4.0, abs=2e-3)


def test_interlacing_gaussian(gauss_op):
    rep = lowest_spectrum(gauss_op, k=9)   # reaches the odd level at 3
    il = verify_interlacing(rep, n=2)
    assert il.holds
    assert il.lambda_even_first == pytest.approx(2.0, rel=2e-3)


def test_interlacing_needs_enough_spectrum(gauss_report):
    with pytest.raises(InsufficientSpectrum):
        verify_interlacing(gauss_report, n=5)


def test_lambda1_vectors_never_fully_type_one():
    # no first-cluster eigenvector is odd in every coordinate at once
    for q in (0.3, ((0.6, 0.1), (0.1, 0.2))):
        dens = build_measure(MeasureSpec(2, NuNQ(q)))
        rep = lowest_spectrum(assemble_generator(dens, resolution=64), k=4)
        full = frozenset(range(2))
        for i in rep.multiplicity_groups[1]:
            if rep.type_sets[i] is not None:
                assert rep.type_sets[i] != full


def test_eigenspace_structure_cube_symmetric():
    comp = MeasureSpec(1, NuP(4.0))
    dens = build_measure(MeasureSpec(2, Product((comp, comp))))
    rep = lowest_spectrum(assemble_generator(dens, resolution=96), k=5)
    group = []
    for perm in ([0, 1], [1, 0]):
        for s0 in (1.0, -1.0):
            for s1 in (1.0, -1.0):
                r = np.zeros((2, 2))
                r[0, perm[0]] = s0
                r[1, perm[1]] = s1
                group.append(r)
    es = eigenspace_structure(rep, group)
    assert es["multiplicity"] == 2
    assert es["span_matches_cluster"]
    assert es["swap_basis_residual"] < 1e-3
    assert es["basis_inner_product"] < 1e-6


def test_rotation_is_not_a_grid_symmetry(gauss_op):
    rep = lowest_spectrum(gauss_op, k=3)
    theta = 0.3
    rot = np.array([[math.cos(theta), -math.sin(theta)],
                    [math.sin(theta), math.cos(theta)]])
    with pytest.raises(GroupDoesNotPreserveGrid):
        eigenspace_structure(rep, [rot])
