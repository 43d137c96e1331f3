"""Registry of closed-form spectral-gap bounds with explicit constants.

Every formula is pure arithmetic: quantities that require integrating a
measure (covariances, component constants, oscillations) are taken as
parameters.  Universal constants default to 1.0 and are tagged
"nominal" in every report; they are placeholders the caller can
calibrate, never claims about their true values.

The one exception to pure arithmetic is :func:`helffer_bound`, which
assembles a matrix criterion from conditional one-dimensional gaps on a
probe grid and inverts its worst eigenvalue into an upper bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import BadParams, UnknownFormula
from .measures import Density, MeasureSpec, UniformInterval, alpha_p, \
    exact_poincare
from .spectral1d import conditional_gap

__all__ = ["BoundValue", "eval_bound", "list_formulas",
           "parallelotope_constant", "helffer_bound"]


@dataclass
class BoundValue:
    value: float
    formula_id: str
    constants_used: Dict[str, float] = field(default_factory=dict)
    provenance: str = ""

    def to_dict(self) -> dict:
        return {"value": self.value, "formula_id": self.formula_id,
                "constants_used": self.constants_used,
                "provenance": self.provenance}


def _req(params: dict, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise BadParams(f"missing parameters {missing}")
    return [params[n] for n in names]


def _f_trace(params, c):
    (cov,) = _req(params, "covariance")
    return c["c"] * float(np.trace(np.atleast_2d(cov)))


def _f_hs(params, c):
    (cov,) = _req(params, "covariance")
    return c["c"] * float(np.linalg.norm(np.atleast_2d(cov), "fro"))


def _f_tensorization(params, c):
    (cps,) = _req(params, "component_cps")
    if len(cps) == 0:
        raise BadParams("component_cps must be nonempty")
    return float(max(cps))


def _f_bounded_perturbation(params, c):
    base, osc = _req(params, "base_cp", "oscillation")
    if osc < 0:
        raise BadParams("oscillation must be nonnegative")
    return float(base) * math.exp(float(osc))


def _f_even_general(params, c):
    (variances,) = _req(params, "variances")
    return c["c"] * float(np.sum(variances))


def _f_mixture_sqrt(params, c):
    n, variances = _req(params, "n", "variances")
    return c["c"] * math.sqrt(n) * float(np.max(variances))


def _f_mixture_log(params, c):
    n, base = _req(params, "n", "base_cp")
    return (1.0 + c["C"] * math.log(n)) * float(base)


def _f_nu_p_log(params, c):
    n, p = _req(params, "n", "p")
    return (1.0 + c["C"] * math.log(n)) ** ((2.0 - p) / p)


def _f_z_e_lower(params, c):
    n, d, p = _req(params, "n", "d", "p")
    base = math.sqrt(math.pi) / (n ** (1.0 / p - 0.5) * alpha_p(p))
    log_val = d * math.log(base) + gammaln(1.0 + d / p) \
        - gammaln(1.0 + d / 2.0)
    return math.exp(log_val)


def _f_section(params, c):
    n, d, p = _req(params, "n", "d", "p")
    kappa_fn = params.get("c_kappa")
    factor = kappa_fn(d / n) if callable(kappa_fn) else c["c_kappa"]
    return factor * (n / d) ** (2.0 / p - 1.0) * math.log(n) ** (2.0 / p)


def _f_level_set(params, c):
    cp, d = _req(params, "cp", "d")
    return c["C"] * cp * math.log(math.e + cp * math.sqrt(d))


def _f_unconditional_log2(params, c):
    n, linear = _req(params, "n", "linear_cp")
    return c["c"] * math.log(1.0 + n) ** 2 * float(linear)


# formula -> (evaluator, default constants, quoted statement)
_REGISTRY = {
    "trace": (_f_trace, {"c": 1.0},
              "C_P <= c * Tr(Cov)"),
    "hilbert_schmidt": (_f_hs, {"c": 1.0},
                        "C_P <= c * ||Cov||_HS"),
    "tensorization": (_f_tensorization, {},
                      "C_P(product) = max_i C_P(mu_i)"),
    "bounded_perturbation": (_f_bounded_perturbation, {},
                             "C_P(e^{-V} d mu) <= C_P(mu) * e^{Osc(V)}"),
    "even_general": (_f_even_general, {"c": 1.0},
                     "C_P(perturbed even product) <= c * sum_i Var(mu_i)"),
    "mixture_sqrt": (_f_mixture_sqrt, {"c": 1.0},
                     "C_P <= c * n^{1/2} * max_i Var(mu_i)"),
    "mixture_log": (_f_mixture_log, {"C": 1.0},
                    "C_P(perturbed) <= (1 + C log n) * C_P(product)"),
    "nu_p_log": (_f_nu_p_log, {"C": 1.0},
                 "C_P ratio <= (1 + C log n)^{(2-p)/p}"),
    "z_e_lower": (_f_z_e_lower, {},
                  "Z_E >= (sqrt(pi) / (n^{1/p-1/2} alpha_p))^d"
                  " * Gamma(1+d/p) / Gamma(1+d/2)"),
    "section": (_f_section, {"c_kappa": 1.0},
                "C_P(section) / ||Cov||_op <= c(kappa) * (n/d)^{2/p-1}"
                " * log(n)^{2/p}"),
    "level_set": (_f_level_set, {"C": 1.0},
                  "C_P(restriction to a convex level set) <="
                  " C * C_P * log(e + C_P sqrt(d))"),
    "unconditional_log2": (_f_unconditional_log2, {"c": 1.0},
                           "C_P(unconditional convex body) <="
                           " c * log(1+n)^2 * C_P(linear)"),
}


def list_formulas():
    """(formula_id, default constants, quoted statement) rows."""
    return [(fid, dict(c), quote) for fid, (_, c, quote)
            in _REGISTRY.items()]


def eval_bound(formula_id: str, params: dict,
               constants: Optional[Dict[str, float]] = None) -> BoundValue:
    """Evaluate a registered closed-form bound.

    ``constants`` overrides the nominal (1.0) universal constants; the
    resolved values are recorded in the returned BoundValue.
    """
    if formula_id not in _REGISTRY:
        raise UnknownFormula(formula_id)
    fn, defaults, quote = _REGISTRY[formula_id]
    consts = dict(defaults)
    if constants:
        unknown = set(constants) - set(defaults)
        if unknown:
            raise BadParams(f"formula {formula_id!r} has no constants "
                            f"{sorted(unknown)}")
        consts.update(constants)
    value = fn(dict(params), consts)
    if value < 0:
        raise BadParams(f"bound came out negative ({value!r})")
    tagged = {k: v for k, v in consts.items()}
    return BoundValue(value=float(value), formula_id=formula_id,
                      constants_used=tagged, provenance=quote)


def parallelotope_constant(n: int, eps: float) -> float:
    """Spectral gap constant ((1-eps) sqrt(n))^2 / pi^2 of the thin
    parallelotope with long axis (1-eps) sqrt(n).

    Assembled through the tensorization + interval route rather than a
    direct lookup: the long axis contributes ((1-eps)sqrt(n))^2/pi^2 via
    the interval formula, the short axes strictly less, and the product
    rule takes the max.
    """
    if n < 1:
        raise BadParams("n >= 1 required")
    if not 0.0 < eps < 1.0:
        raise BadParams("eps must lie in (0, 1)")
    long_axis = (1.0 - eps) * math.sqrt(n)
    lengths = [long_axis] + [(1.0 - eps)] * (n - 1)
    cps = [exact_poincare(MeasureSpec(dim=1,
                                      family=UniformInterval(0.0, l)))
           for l in lengths]
    return eval_bound("tensorization", {"component_cps": cps}).value


def helffer_bound(dens: Density, probes: np.ndarray,
                  fd_step: float = 1e-4,
                  nodes: int = 2048) -> Optional[BoundValue]:
    """Matrix-criterion upper bound from conditional 1-D gaps.

    At each probe point x the matrix K(x) has diagonal entries equal to
    the spectral gap of the conditional measure on the line x + R e_i,
    and off-diagonal entries the mixed second derivatives of the
    potential V = -log rho.  If K(x) >= eps * Id everywhere on the probe
    grid with eps > 0, then 1/eps is an upper bound for the spectral-gap
    constant; returns None when the criterion fails (eps <= 0).
    """
    dim = dens.dim
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    logd = dens.smooth_log_density or dens.log_density

    def mixed_second(x, i, j):
        ei = np.zeros(dim)
        ej = np.zeros(dim)
        ei[i] = fd_step
        ej[j] = fd_step
        pts = np.array([x + ei + ej, x + ei - ej,
                        x - ei + ej, x - ei - ej])
        v = -logd(pts)
        return (v[0] - v[1] - v[2] + v[3]) / (4.0 * fd_step ** 2)

    eps = math.inf
    for x in probes:
        k_mat = np.zeros((dim, dim))
        for i in range(dim):
            k_mat[i, i] = conditional_gap(dens, i, x, nodes=nodes)
            for j in range(i + 1, dim):
                k_mat[i, j] = k_mat[j, i] = mixed_second(x, i, j)
        eps = min(eps, float(np.linalg.eigvalsh(k_mat).min()))
    if eps <= 0.0:
        return None
    return BoundValue(value=1.0 / eps, formula_id="helffer",
                      constants_used={},
                      provenance="K(x) >= eps Id for all x implies"
                                 " C_P <= 1/eps")
