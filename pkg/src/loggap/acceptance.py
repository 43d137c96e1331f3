"""Self-contained verification suite.

Each criterion function runs one end-to-end check with pinned
tolerances and returns a :class:`CriterionResult`; ``run_all`` executes
the entire suite.  The same code backs ``tests/test_acceptance.py`` and
the command-line ``selftest`` subcommand, so the shipped package can
re-certify itself in place.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import bounds as bd
from . import mixtures as mx
from . import sampling as sm
from . import spectral1d as s1
from . import spectralnd as snd
from .measures import (Body, Gaussian, MeasureSpec, NuNQ, NuP, Perturbed,
                       PerturbationSpec, Product, UniformInterval,
                       build_measure, covariance_by_quadrature,
                       exact_poincare, lp_ball)

__all__ = ["CriterionResult", "run_all", "CRITERIA",
           "random_even_measures", "nu_q_sweep_instances"]


@dataclass
class CriterionResult:
    number: int
    description: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.description}" \
               f" ({self.seconds:.1f}s)"


def _cube_group_2d() -> List[np.ndarray]:
    group = []
    for perm in itertools.permutations(range(2)):
        for signs in itertools.product([1.0, -1.0], repeat=2):
            r = np.zeros((2, 2))
            for i, (j, s) in enumerate(zip(perm, signs)):
                r[i, j] = s
            group.append(r)
    return group


# ---------------------------------------------------------------------------
# shared randomized measure suites
# ---------------------------------------------------------------------------

def random_even_measures(count: int = 30, seed: int = 2024
                         ) -> List[MeasureSpec]:
    """Randomized even log-concave 2-D test measures, cycling through
    three families: anisotropic exp(-|x|_1 - <Qx,x>), ball-restricted
    exp(-|t|^p) products, and quadratically tilted exp(-|t|^p) products.
    Deterministic in the seed."""
    rng = np.random.default_rng(seed)
    specs = []
    while len(specs) < count:
        kind = len(specs) % 3
        if kind == 0:
            a = rng.standard_normal((2, 2))
            q = a @ a.T / 2.0 + 0.1 * np.eye(2)
            specs.append(MeasureSpec(dim=2, family=NuNQ(q)))
        elif kind == 1:
            p = float(rng.uniform(1.0, 2.0))
            radius = float(rng.uniform(1.5, 4.0))
            ball_p = float(rng.choice([1.0, 2.0, np.inf]))
            pert = PerturbationSpec(
                kind="indicator_body", body=lp_ball(ball_p, radius),
                even=True, unconditional=True, log_concave=True)
            base = MeasureSpec(dim=2, family=Product(
                (MeasureSpec(1, NuP(p)), MeasureSpec(1, NuP(p)))))
            specs.append(MeasureSpec(dim=2, family=Perturbed(base, pert)))
        else:
            p = float(rng.uniform(1.0, 2.0))
            a = rng.standard_normal((2, 2))
            q = a @ a.T * 0.3
            pert = PerturbationSpec(
                kind="exp_neg_quadratic", matrix=q, even=True,
                unconditional=bool(np.allclose(q, np.diag(np.diag(q)))),
                log_concave=True)
            base = MeasureSpec(dim=2, family=Product(
                (MeasureSpec(1, NuP(p)), MeasureSpec(1, NuP(p)))))
            specs.append(MeasureSpec(dim=2, family=Perturbed(base, pert)))
    return specs


def nu_q_sweep_instances(count: int = 20, seed: int = 77
                         ) -> List[MeasureSpec]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a = rng.standard_normal((2, 2))
        out.append(MeasureSpec(dim=2, family=NuNQ(a @ a.T / 2.0)))
    return out


def _spectrum_suite(specs, resolution=96, k=10):
    """Grid spectra with parity reports for a list of 2-D measures."""
    reports = []
    for spec in specs:
        dens = build_measure(spec)
        op = snd.assemble_generator(dens, resolution=resolution)
        reports.append(snd.lowest_spectrum(op, k=k))
    return reports


_SUITE_CACHE: dict = {}


def _cached_suite():
    if "reports" not in _SUITE_CACHE:
        _SUITE_CACHE["specs"] = random_even_measures()
        _SUITE_CACHE["reports"] = _spectrum_suite(_SUITE_CACHE["specs"])
    return _SUITE_CACHE["specs"], _SUITE_CACHE["reports"]


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    """Exact 1-D constants: interval, symmetric exponential, Gaussian."""
    t0 = time.time()
    details = {}
    ok = True

    t_u = time.time()
    cp_u, _ = s1.poincare_1d(
        build_measure(MeasureSpec(1, UniformInterval(-0.5, 0.5))))
    dt_u = time.time() - t_u
    target_u = 1.0 / math.pi ** 2
    ok &= abs(cp_u - target_u) <= 0.005 * target_u and dt_u <= 1.0
    details["uniform"] = {"cp": cp_u, "target": target_u, "seconds": dt_u}

    t_l = time.time()
    cp_l, _ = s1.poincare_1d(build_measure(MeasureSpec(1, NuP(1.0))),
                             window=40.0)
    dt_l = time.time() - t_l
    ok &= abs(cp_l - 4.0) <= 0.05 * 4.0 and dt_l <= 2.0
    details["laplace"] = {"cp": cp_l, "target": 4.0, "seconds": dt_l}

    sigma2 = 2.25
    cp_g, _ = s1.poincare_1d(build_measure(MeasureSpec(1, Gaussian(sigma2))))
    ok &= abs(cp_g - sigma2) <= 0.005 * sigma2
    details["gaussian"] = {"cp": cp_g, "target": sigma2}

    return CriterionResult(1, "exact 1-D constants", ok, details,
                           time.time() - t0)


def criterion_2() -> CriterionResult:
    """2-D Gaussian spectrum at 128^2: (1,1,2) with odd/even parity."""
    t0 = time.time()
    dens = build_measure(MeasureSpec(2, Gaussian(1.0)))
    op = snd.assemble_generator(dens, box=[8.0, 8.0], resolution=128)
    rep = snd.lowest_spectrum(op, k=5)
    lam = rep.eigenvalues
    ok = (abs(lam[1] - 1.0) <= 0.01 and abs(lam[2] - 1.0) <= 0.01
          and abs(lam[3] - 2.0) <= 0.02)
    ok &= rep.global_parity[1] == "odd" and rep.global_parity[2] == "odd"
    ok &= rep.global_parity[3] == "even"
    elapsed = time.time() - t0
    ok &= elapsed <= 30.0
    return CriterionResult(
        2, "2-D Gaussian spectrum (1,1,2) with parity", ok,
        {"eigenvalues": lam[:5].tolist(), "parity": rep.global_parity[:5],
         "seconds": elapsed}, elapsed)


def criterion_3() -> CriterionResult:
    """Odd-first: lambda_1 cluster is globally odd on 30 random even
    measures, parity residual < 1e-4."""
    t0 = time.time()
    _, reports = _cached_suite()
    worst = 0.0
    ok = True
    for rep in reports:
        cluster = rep.multiplicity_groups[1]
        for i in cluster:
            worst = max(worst, rep.global_parity_score[i])
            if rep.global_parity[i] != "odd" or \
                    rep.global_parity_score[i] >= 1e-4:
                ok = False
    elapsed = time.time() - t0
    ok &= elapsed <= 600.0
    return CriterionResult(3, "odd-first on 30 random even measures", ok,
                           {"worst_parity_residual": worst}, elapsed)


def criterion_4() -> CriterionResult:
    """Interlacing: first even eigenvalue <= (n+1)-th odd + 1%."""
    t0 = time.time()
    _, reports = _cached_suite()
    ok = True
    margins = []
    for rep in reports:
        il = snd.verify_interlacing(rep, n=2, tolerance=0.01)
        margins.append(il.margin)
        ok &= il.holds
    return CriterionResult(4, "even/odd interlacing on the same suite",
                           ok, {"min_margin": min(margins)},
                           time.time() - t0)


def criterion_5() -> CriterionResult:
    """Cube-symmetric eigenspace: multiplicity 2, swap-related basis."""
    t0 = time.time()
    group = _cube_group_2d()
    details = {}
    ok = True
    for p in (4.0, 1.5):
        comp = MeasureSpec(1, NuP(p))
        dens = build_measure(MeasureSpec(2, Product((comp, comp))))
        op = snd.assemble_generator(dens, resolution=128)
        rep = snd.lowest_spectrum(op, k=6)
        es = snd.eigenspace_structure(rep, group)
        ok &= es["multiplicity"] == 2
        ok &= es.get("swap_basis_residual", math.inf) <= 1e-3
        ok &= es.get("basis_inner_product", math.inf) <= 1e-6
        details[f"p={p:g}"] = es
    return CriterionResult(5, "cube-symmetric eigenspace structure", ok,
                           details, time.time() - t0)


def _bump_polynomials(rng, dim):
    """Random polynomial times a Gaussian bump, as a callable."""
    deg_terms = rng.integers(1, 4)
    coefs = rng.standard_normal(deg_terms)
    powers = rng.integers(0, 3, size=(deg_terms, dim))
    width = float(rng.uniform(2.0, 6.0))

    def f(x):
        x = np.atleast_2d(x)
        val = np.zeros(x.shape[0])
        for cterm, pw in zip(coefs, powers):
            val += cterm * np.prod(x ** pw, axis=1)
        return val * np.exp(-np.sum(x ** 2, axis=1) / (2 * width ** 2))

    return f


def criterion_6() -> CriterionResult:
    """Variance <= sum of dual-norm squares of partials; Gaussian
    quadratic gives the exact pair (2, 4)."""
    t0 = time.time()
    specs = [
        MeasureSpec(2, Gaussian(1.0)),
        MeasureSpec(2, Gaussian(((1.0, 0.3), (0.3, 0.8)))),
        MeasureSpec(2, NuNQ(0.5)),
        MeasureSpec(2, Product((MeasureSpec(1, NuP(1.5)),
                                MeasureSpec(1, NuP(1.5))))),
        MeasureSpec(2, Product((MeasureSpec(1, NuP(1.0)),
                                MeasureSpec(1, Gaussian(1.0))))),
    ]
    rng = np.random.default_rng(31)
    ok = True
    checked = 0
    for spec in specs:
        dens = build_measure(spec)
        # clamp exponential-tail boxes: the kink at the origin needs cells
        # much smaller than the 1e-14 support radius suggests
        box = np.minimum(dens.support_box, 12.0)
        op = snd.assemble_generator(dens, box=box, resolution=192)
        for _ in range(10):
            f = snd.grid_function(op, _bump_polynomials(rng, 2))
            lhs, rhs, _, _ = snd.verify_variance_inequality(op, f)
            # allow the measured second-order discretization envelope of
            # the kinked densities at this resolution
            ok &= lhs <= rhs * (1.0 + 2e-3) + 1e-9
            checked += 1
    # the exact Gaussian pair
    gop = snd.assemble_generator(build_measure(specs[0]),
                                 box=[8.0, 8.0], resolution=128)
    f = snd.grid_function(gop, lambda x: x[:, 0] ** 2 - 1.0)
    lhs, rhs, holds, _ = snd.verify_variance_inequality(gop, f)
    pair_ok = abs(lhs - 2.0) <= 1e-3 and abs(rhs - 4.0) <= 2e-3 and holds
    ok &= pair_ok
    return CriterionResult(
        6, "H^-1 variance inequality (50 random f; exact (2,4) pair)",
        ok, {"random_checked": checked, "gaussian_pair": (lhs, rhs)},
        time.time() - t0)


def criterion_7() -> CriterionResult:
    """alpha weights: exact families, tail lemma, and the refinement."""
    t0 = time.time()
    ts = np.linspace(0.0, 20.0, 200)
    details = {}
    lap = mx.laplace_mixture()
    err_lap = float(np.max(np.abs(mx.alpha_weight(lap, ts) - (ts + 1.0))))
    gau = mx.single_gaussian(1.0)
    err_gau = float(np.max(np.abs(mx.alpha_weight(gau, ts[:140]) - 1.0)))
    ok = err_lap <= 1e-9 and err_gau <= 1e-9
    details["laplace_max_err"] = err_lap
    details["gaussian_max_err"] = err_gau
    for p in (1.0, 1.25, 1.5, 1.75, 2.0):
        d = mx.nu_p_mixture(p)
        slack = float(np.max(mx.alpha_weight(d, ts)
                             - mx.alpha_bound(d, ts)))
        ok &= slack <= 1e-9
        details[f"lemma_slack_p={p:g}"] = slack
    star_fail = 0
    for p in (1.25, 1.5, 1.75):
        for t in np.linspace(0.1, 12.0, 40):
            lhs, rhs, applicable, holds = mx.tail_ratio_check(p, float(t))
            if applicable and not holds:
                star_fail += 1
    ok &= star_fail == 0
    details["star_violations"] = star_fail
    return CriterionResult(7, "alpha-weight identities and bounds", ok,
                           details, time.time() - t0)


def _perturbed_product(base_components, pert) -> MeasureSpec:
    base = MeasureSpec(dim=len(base_components),
                       family=Product(tuple(base_components)))
    return MeasureSpec(dim=base.dim, family=Perturbed(base, pert))


def criterion_8() -> CriterionResult:
    """Covariance domination by quadrature at n=2, and the parallelotope
    counterexample to factor-1 domination."""
    t0 = time.time()
    ok = True
    details = {}
    ball = PerturbationSpec(kind="indicator_body", body=lp_ball(2.0, 1.5),
                            even=True, unconditional=False,
                            log_concave=True)
    quad = PerturbationSpec(kind="exp_neg_quadratic",
                            matrix=np.array([[0.4, 0.1], [0.1, 0.3]]),
                            even=True, unconditional=False,
                            log_concave=True)
    # mixture bases: factor-1 domination
    for p in (1.0, 1.5, 2.0):
        comps = [MeasureSpec(1, NuP(p)), MeasureSpec(1, NuP(p))]
        cov_base = covariance_by_quadrature(
            build_measure(MeasureSpec(2, Product(tuple(comps)))))
        for tag, pert in (("ball", ball), ("quad", quad)):
            cov_pert = covariance_by_quadrature(
                build_measure(_perturbed_product(comps, pert)))
            holds, margin = sm.dominance_check(cov_pert, cov_base, 1.0)
            ok &= holds and margin >= -1e-8
            details[f"mixture_p={p:g}_{tag}"] = margin
            # coordinate variances never exceed the base ones
            ok &= bool(np.all(np.diag(cov_pert)
                              <= np.diag(cov_base) + 1e-8))
    # non-mixture base: factor-n domination
    comps = [MeasureSpec(1, UniformInterval(-0.5, 0.5))] * 2
    cov_base = covariance_by_quadrature(
        build_measure(MeasureSpec(2, Product(tuple(comps)))))
    for tag, pert in (("ball_small", PerturbationSpec(
            kind="indicator_body", body=lp_ball(2.0, 0.4), even=True,
            unconditional=False, log_concave=True)), ("quad", quad)):
        cov_pert = covariance_by_quadrature(
            build_measure(_perturbed_product(comps, pert)))
        holds, margin = sm.dominance_check(cov_pert, cov_base, 2.0)
        ok &= holds and margin >= -1e-8
        details[f"uniform_{tag}"] = margin
    # parallelotope: long-diagonal restriction of the cube beats factor 1
    u = np.array([1.0, 1.0]) / math.sqrt(2.0)
    v = np.array([1.0, -1.0]) / math.sqrt(2.0)
    long_half = 0.95 * math.sqrt(2.0) / 2.0
    width_half = 0.05

    def member(x):
        x = np.atleast_2d(x)
        return (np.abs(x @ u) <= long_half) & (np.abs(x @ v) <= width_half)

    slab = PerturbationSpec(
        kind="indicator_body",
        body=Body(kind="custom", member=member, radius=1.0),
        even=True, unconditional=False, log_concave=True)
    cov_slab = covariance_by_quadrature(
        build_measure(_perturbed_product(comps, slab)), resolution=768)
    holds, margin = sm.dominance_check(cov_slab, cov_base, 1.0)
    ok &= (not holds) and margin < 0.0
    details["parallelotope_margin"] = margin
    return CriterionResult(8, "covariance domination + counterexample",
                           ok, details, time.time() - t0)


def criterion_9() -> CriterionResult:
    """Closed-form counterexample constants: parallelotope formula and
    the diagonal p=4 conditioning ratio."""
    t0 = time.time()
    ok = True
    details = {}
    for n, eps in ((1, 0.3), (4, 1e-6), (16, 0.5), (100, 0.5)):
        got = bd.parallelotope_constant(n, eps)
        target = ((1.0 - eps) * math.sqrt(n)) ** 2 / math.pi ** 2
        ok &= abs(got - target) <= 1e-12 * max(1.0, target)
        details[f"parallelotope_n={n}"] = got
    cp_1, _ = s1.poincare_1d(build_measure(MeasureSpec(1, NuP(4.0))))
    for n in (4, 16):
        scaled = MeasureSpec(1, NuP(4.0), scale=n ** 0.25)
        cp_n, _ = s1.poincare_1d(build_measure(scaled))
        ratio = cp_n / cp_1
        ok &= abs(ratio - math.sqrt(n)) <= 0.02 * math.sqrt(n)
        details[f"ratio_n={n}"] = ratio
    return CriterionResult(9, "parallelotope and p=4 scaling formulas",
                           ok, details, time.time() - t0)


def criterion_10() -> CriterionResult:
    """Sampling oracles: hit-and-run moments and MALA on a Gaussian."""
    t0 = time.time()
    t_h = time.time()
    sec = sm.SectionSpec(n=2, p=1.0, basis=np.eye(2))
    est = sm.covariance(sm.run_hit_and_run(sec, steps=100_000, seed=7))
    dt_h = time.time() - t_h
    ok = bool(np.all(np.abs(est.matrix - np.eye(2) / 6.0)
                     <= 3.0 * est.stderr)) and dt_h <= 30.0
    dens = build_measure(MeasureSpec(4, Gaussian(1.0)))
    mest = sm.covariance(sm.run_mala(dens, steps=100_000, seed=11))
    ok &= bool(np.all(np.abs(mest.matrix - np.eye(4))
                      <= 3.0 * mest.stderr))
    return CriterionResult(
        10, "sampling oracles (hit-and-run B_1^2, MALA Gaussian)", ok,
        {"hit_and_run_diag": np.diag(est.matrix).tolist(),
         "hit_and_run_seconds": dt_h,
         "mala_diag": np.diag(mest.matrix).tolist()},
        time.time() - t0)


def criterion_11() -> CriterionResult:
    """Matrix-criterion bound 1/(1-eps) for the cross-term Gaussian
    dominates the grid constant."""
    t0 = time.time()
    eps = 0.5
    prec = np.array([[1.0, eps], [eps, 1.0]])
    cov = np.linalg.inv(prec)
    spec = MeasureSpec(2, Gaussian(tuple(map(tuple, cov))))
    dens = build_measure(spec)
    probes = np.array([[0.0, 0.0], [0.7, -0.4], [1.2, 0.9], [-1.5, 0.2]])
    bv = bd.helffer_bound(dens, probes)
    target = 1.0 / (1.0 - eps)
    ok = bv is not None and abs(bv.value - target) <= 0.01 * target
    op = snd.assemble_generator(dens, resolution=96)
    rep = snd.lowest_spectrum(op, k=2)
    grid_cp = 1.0 / rep.eigenvalues[1]
    ok &= grid_cp <= bv.value + 0.01 * bv.value
    return CriterionResult(
        11, "matrix-criterion bound vs grid constant", ok,
        {"bound": None if bv is None else bv.value, "grid_cp": grid_cp},
        time.time() - t0)


def criterion_12() -> CriterionResult:
    """Sweep 20 random anisotropic instances: the <= 4.05 envelope is
    reported; the asserted conditions are odd parity and interlacing."""
    t0 = time.time()
    specs = nu_q_sweep_instances()
    reports = _spectrum_suite(specs)
    ok = True
    cps = []
    over_envelope = 0
    for rep in reports:
        cp = 1.0 / rep.eigenvalues[1]
        cps.append(cp)
        if cp > 4.05:
            over_envelope += 1
        for i in rep.multiplicity_groups[1]:
            ok &= rep.global_parity[i] == "odd" and \
                rep.global_parity_score[i] < 1e-4
        ok &= snd.verify_interlacing(rep, n=2, tolerance=0.01).holds
    return CriterionResult(
        12, "anisotropic sweep: parity/interlacing asserted, C_P envelope"
        " reported", ok,
        {"max_cp": max(cps), "count_over_4.05": over_envelope,
         "cps": cps}, time.time() - t0)


CRITERIA: List[Callable[[], CriterionResult]] = [
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
    criterion_11, criterion_12,
]


def run_all(echo: Optional[Callable[[str], None]] = None
            ) -> List[CriterionResult]:
    results = []
    for fn in CRITERIA:
        res = fn()
        results.append(res)
        if echo:
            echo(res.line())
    return results
