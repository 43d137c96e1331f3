import numpy as np
import pytest

from loggap.errors import DimensionMismatch, DivergentChain, TooFewSamples
from loggap.measures import Gaussian, MeasureSpec, NuP, Product, build_measure
from loggap.sampling import (CovEstimate, SectionSpec, covariance,
                             dominance_check, effective_sample_size, run_mala,
                             run_hit_and_run)


def test_section_requires_orthonormal_basis():
    with pytest.raises(ValueError):
        SectionSpec(n=3, p=2.0, basis=np.array([[1.0, 1.0, 0.0]]))
    with pytest.raises(DimensionMismatch):
        SectionSpec(n=3, p=2.0, basis=np.eye(2))


def test_section_membership():
    sec = SectionSpec(n=2, p=1.0, basis=np.eye(2))
    assert sec.contains(np.array([0.3, 0.3]))[0]
    assert not sec.contains(np.array([0.7, 0.7]))[0]


def test_hit_and_run_square_moments():
    # the unit l_1 ball in the plane is a rotated square with coordinate
    # variance 1/6
    sec = SectionSpec(n=2, p=1.0, basis=np.eye(2))
    est = covariance(run_hit_and_run(sec, steps=40_000, seed=3))
    assert np.all(np.abs(est.matrix - np.eye(2) / 6.0) <= 3.0 * est.stderr)


def test_hit_and_run_is_deterministic():
    sec = SectionSpec(n=3, p=2.0, basis=np.eye(3))
    a = run_hit_and_run(sec, steps=4_000, seed=11)
    b = run_hit_and_run(sec, steps=4_000, seed=11)
    assert np.array_equal(a.samples, b.samples)
    c = run_hit_and_run(sec, steps=4_000, seed=12)
    assert not np.array_equal(a.samples, c.samples)


def test_hit_and_run_stays_inside():
    sec = SectionSpec(n=4, p=1.5, basis=np.eye(4)[:2])
    batch = run_hit_and_run(sec, steps=5_000, seed=0)
    assert np.all(sec.contains(batch.samples))
    assert batch.count == 5_000


def test_ess_bounds():
    rng = np.random.default_rng(0)
    iid = rng.standard_normal(4000)
    assert effective_sample_size(iid) > 2000
    slow = np.cumsum(iid)  # random walk: tiny ESS
    assert effective_sample_size(slow) < 100


def test_mala_gaussian_identity_covariance():
    dens = build_measure(MeasureSpec(3, Gaussian(1.0)))
    est = covariance(run_mala(dens, steps=40_000, seed=1))
    assert np.all(np.abs(est.matrix - np.eye(3)) <= 3.0 * est.stderr)


def test_mala_handles_kinked_density():
    dens = build_measure(MeasureSpec(2, Product((MeasureSpec(1, NuP(1.0)),
                                                 MeasureSpec(1, NuP(1.0))))))
    batch = run_mala(dens, steps=30_000, seed=4)
    var = batch.samples.var(axis=0)
    # Var of exp(-|t|)/2 is 2
    assert np.all(np.abs(var - 2.0) < 0.25)
    assert 0.3 < batch.diagnostics["acceptance_rate"] < 0.95


def test_mala_is_deterministic():
    dens = build_measure(MeasureSpec(2, Gaussian(1.0)))
    a = run_mala(dens, steps=2_000, seed=9)
    b = run_mala(dens, steps=2_000, seed=9)
    assert np.array_equal(a.samples, b.samples)


def test_mala_detects_divergence():
    from dataclasses import replace
    dens = build_measure(MeasureSpec(1, Gaussian(1.0)))
    # a steep linear "log density" pushes the chain outward forever
    bad = replace(dens, log_density=lambda x: 1e3 * np.sum(x, axis=-1),
                  smooth_log_density=None)
    with pytest.raises(DivergentChain):
        run_mala(bad, steps=20_000, seed=0, initial_step=1.0)


def test_covariance_needs_samples():
    from loggap.sampling import SampleBatch
    with pytest.raises(TooFewSamples):
        covariance(SampleBatch(samples=np.zeros((10, 2)), seed=0))


def test_dominance_plain_matrices():
    holds, margin = dominance_check(np.eye(2), 2.0 * np.eye(2))
    assert holds and margin == pytest.approx(1.0)
    holds, margin = dominance_check(2.0 * np.eye(2), np.eye(2))
    assert not holds and margin == pytest.approx(-1.0)


def test_dominance_factor():
    holds, _ = dominance_check(np.eye(2), np.eye(2) / 3.0, factor=4.0)
    assert holds


def test_dominance_inflates_by_stderr():
    a = CovEstimate(matrix=np.eye(2) * 1.01, stderr=np.full((2, 2), 0.02),
                    count=10_000)
    holds, margin = dominance_check(a, np.eye(2))
    assert margin < 0.0
    assert holds  # within 3 standard errors


def test_dominance_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        dominance_check(np.eye(2), np.eye(3))
