"""Declarative measure families and their pointwise evaluators.

Every measure handled by the package is described by a :class:`MeasureSpec`
(family + optional multiplicative perturbation + symmetry flags) and turned
into a :class:`Density` evaluator bundle by :func:`build_measure`.  Densities
may be unnormalized: all downstream quantities are ratios in which the
normalization constant cancels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import (DimensionTooLarge, NonPSDQuadratic, UnboundedDensity)

__all__ = [
    "Gaussian", "LaplaceFamily", "NuP", "UniformInterval", "UniformBody",
    "NuNQ", "Product", "Perturbed", "PerturbationSpec", "MeasureSpec",
    "Density", "build_measure", "exact_poincare", "expectation",
    "expectation_with_error", "integrate", "lp_ball", "alpha_p",
]

# Per-coordinate cutoff used to truncate unbounded supports: the canonical
# box ends where the density drops below DENSITY_FLOOR times its maximum.
DENSITY_FLOOR = 1e-14
_LOG_FLOOR = math.log(DENSITY_FLOOR)


def alpha_p(p: float) -> float:
    """Normalization scale 2*Gamma(1+1/p); makes exp(-|alpha_p t|^p) a
    probability density with value 1 at the origin."""
    return 2.0 * gamma_fn(1.0 + 1.0 / p)


def _as_points(x, dim: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if dim == 1 and (pts.ndim == 0 or pts.ndim == 1):
        pts = pts.reshape(-1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.shape[-1] != dim:
        raise ValueError(f"points have dimension {pts.shape[-1]}, expected {dim}")
    return pts


# ---------------------------------------------------------------------------
# body descriptors (for uniform measures and indicator perturbations)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Body:
    """Origin-symmetric convex body given by a membership oracle.

    ``kind`` is a serializable tag; ``lp_ball`` bodies round-trip through
    JSON, callable bodies do not.
    """
    kind: str
    p: Optional[float] = None
    radius: float = 1.0
    member: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def contains(self, pts: np.ndarray) -> np.ndarray:
        if self.kind == "lp_ball":
            if np.isinf(self.p):
                return np.max(np.abs(pts), axis=-1) <= self.radius
            return np.sum(np.abs(pts) ** self.p, axis=-1) <= self.radius ** self.p
        if self.member is None:
            raise ValueError("custom body needs a membership callable")
        return np.asarray(self.member(pts), dtype=bool)

    def bounding_halfwidth(self, dim: int = 1) -> float:
        if self.kind == "lp_ball":
            return float(self.radius)
        # custom body: double an axis-aligned probe until it leaves the body
        r = 1.0
        for _ in range(40):
            probes = r * np.vstack([np.eye(dim), -np.eye(dim)])
            if not self.contains(probes).any():
                return r
            r *= 2.0
        raise ValueError("membership oracle never rejects: body unbounded?")

    def to_dict(self):
        if self.kind != "lp_ball":
            raise ValueError("only lp_ball bodies are JSON-serializable")
        return {"kind": self.kind, "p": self.p, "radius": self.radius}

    @staticmethod
    def from_dict(d):
        return Body(kind=d["kind"], p=d.get("p"), radius=d.get("radius", 1.0))


def lp_ball(p: float, radius: float = 1.0) -> Body:
    return Body(kind="lp_ball", p=float(p), radius=float(radius))


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    """Centered Gaussian with covariance matrix sigma (scalar = sigma^2*I)."""
    cov: Union[float, Tuple] = 1.0

    def cov_matrix(self, dim: int) -> np.ndarray:
        c = np.asarray(self.cov, dtype=float)
        if c.ndim == 0:
            return float(c) * np.eye(dim)
        if c.ndim == 1:
            return np.diag(c)
        return c


@dataclass(frozen=True)
class LaplaceFamily:
    """Product of symmetric exponential densities exp(-|t|)/2."""


@dataclass(frozen=True)
class NuP:
    """Density proportional to exp(-sum |t_i|^p).

    With ``calibrated=True`` the potential is |alpha_p t|^p so the density
    is a probability density equal to 1 at the origin.
    """
    p: float
    calibrated: bool = False


@dataclass(frozen=True)
class UniformInterval:
    a: float
    b: float


@dataclass(frozen=True)
class UniformBody:
    body: Body


@dataclass(frozen=True)
class NuNQ:
    """Density proportional to exp(-||x||_1 - <Qx, x>), Q PSD."""
    Q: Tuple

    def q_matrix(self, dim: int) -> np.ndarray:
        q = np.asarray(self.Q, dtype=float)
        if q.ndim == 0:
            return float(q) * np.eye(dim)
        return q


@dataclass(frozen=True)
class Product:
    components: Tuple["MeasureSpec", ...]


@dataclass(frozen=True)
class PerturbationSpec:
    """Multiplicative perturbation rho of a base measure.

    ``kind`` is one of ``indicator_body``, ``exp_neg_quadratic``,
    ``exp_neg_convex``, ``truncation_box``.
    """
    kind: str
    body: Optional[Body] = None
    matrix: Optional[Tuple] = None
    potential: Optional[Callable] = None
    half_widths: Optional[Tuple] = None
    even: bool = True
    unconditional: bool = False
    log_concave: bool = True

    def log_weight(self, dim: int) -> Callable[[np.ndarray], np.ndarray]:
        if self.kind == "indicator_body":
            body = self.body
            def lw(pts):
                out = np.where(body.contains(pts), 0.0, -np.inf)
                return out
            return lw
        if self.kind == "exp_neg_quadratic":
            q = np.asarray(self.matrix, dtype=float)
            if q.ndim == 0:
                q = float(q) * np.eye(dim)
            _check_psd(q)
            return lambda pts: -np.einsum("...i,ij,...j->...", pts, q, pts)
        if self.kind == "exp_neg_convex":
            pot = self.potential
            return lambda pts: -np.asarray(pot(pts), dtype=float)
        if self.kind == "truncation_box":
            hw = np.asarray(self.half_widths, dtype=float)
            def lw(pts):
                inside = np.all(np.abs(pts) <= hw, axis=-1)
                return np.where(inside, 0.0, -np.inf)
            return lw
        raise ValueError(f"unknown perturbation kind {self.kind!r}")

    def to_dict(self):
        d = {"kind": self.kind,
             "flags": {"even": self.even, "unconditional": self.unconditional,
                       "log_concave": self.log_concave}}
        if self.kind == "indicator_body":
            d["body"] = self.body.to_dict()
        elif self.kind == "exp_neg_quadratic":
            d["matrix"] = np.asarray(self.matrix, dtype=float).tolist()
        elif self.kind == "truncation_box":
            d["half_widths"] = list(self.half_widths)
        else:
            raise ValueError("exp_neg_convex perturbations are not serializable")
        return d

    @staticmethod
    def from_dict(d):
        flags = d.get("flags", {})
        return PerturbationSpec(
            kind=d["kind"],
            body=Body.from_dict(d["body"]) if "body" in d else None,
            matrix=tuple(map(tuple, d["matrix"])) if "matrix" in d else None,
            half_widths=tuple(d["half_widths"]) if "half_widths" in d else None,
            even=flags.get("even", True),
            unconditional=flags.get("unconditional", False),
            log_concave=flags.get("log_concave", True))


@dataclass(frozen=True)
class Perturbed:
    base: "MeasureSpec"
    perturbation: PerturbationSpec


Family = Union[Gaussian, LaplaceFamily, NuP, UniformInterval, UniformBody,
               NuNQ, Product, Perturbed]


def _check_psd(q: np.ndarray) -> None:
    q = np.asarray(q, dtype=float)
    if not np.allclose(q, q.T, atol=1e-12 * (1.0 + np.abs(q).max())):
        raise NonPSDQuadratic("matrix is not symmetric")
    w = np.linalg.eigvalsh(q)
    floor = -1e-10 * max(1.0, np.abs(w).max())
    if w.min() < floor:
        raise NonPSDQuadratic(f"eigenvalue {w.min():.3e} below PSD floor")


# ---------------------------------------------------------------------------
# measure spec
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureSpec:
    """Declarative description of a measure.

    ``scale`` stretches coordinates: the density of ``x`` is the base
    density of ``x / scale`` (Poincare constants pick up scale^2).
    """
    dim: int
    family: Family
    scale: Union[float, Tuple] = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        fam = self.family
        if isinstance(fam, NuP):
            if fam.p <= 0:
                raise ValueError("nu_p exponent must be positive")
            if self.dim > 1 and not (1.0 <= fam.p <= 2.0):
                raise ValueError("nu_p with p outside [1,2] is 1-D only")
        if isinstance(fam, NuNQ):
            _check_psd(fam.q_matrix(self.dim))
        if isinstance(fam, Product):
            if sum(c.dim for c in fam.components) != self.dim:
                raise ValueError("product components must add up to dim")
            if any(c.dim != 1 for c in fam.components):
                raise ValueError("product components must be 1-D")
        if isinstance(fam, UniformInterval) and not fam.b > fam.a:
            raise ValueError("empty interval")

    def scale_vector(self) -> np.ndarray:
        s = np.asarray(self.scale, dtype=float)
        if s.ndim == 0:
            return np.full(self.dim, float(s))
        return s

    # -- JSON round trip ----------------------------------------------------

    def to_dict(self) -> dict:
        fam = self.family
        pert = None
        if isinstance(fam, Perturbed):
            pert = fam.perturbation.to_dict()
            inner = fam.base.to_dict()
            famd = inner["family"]
        elif isinstance(fam, Gaussian):
            famd = {"kind": "gaussian",
                    "cov": np.asarray(fam.cov, dtype=float).tolist()}
        elif isinstance(fam, LaplaceFamily):
            famd = {"kind": "laplace"}
        elif isinstance(fam, NuP):
            famd = {"kind": "nu_p", "p": fam.p, "calibrated": fam.calibrated}
        elif isinstance(fam, UniformInterval):
            famd = {"kind": "uniform_interval", "a": fam.a, "b": fam.b}
        elif isinstance(fam, UniformBody):
            famd = {"kind": "uniform_body", "body": fam.body.to_dict()}
        elif isinstance(fam, NuNQ):
            famd = {"kind": "nu_n_Q",
                    "Q": np.asarray(fam.q_matrix(self.dim)).tolist()}
        elif isinstance(fam, Product):
            famd = {"kind": "product",
                    "components": [c.to_dict() for c in fam.components]}
        else:
            raise ValueError(f"unserializable family {fam!r}")
        flags = _symmetry_flags(self)
        return {"dim": self.dim, "family": famd, "perturbation": pert,
                "scale": np.asarray(self.scale, dtype=float).tolist(),
                "flags": {"even": flags[0], "unconditional": flags[1]}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_dict(d: dict) -> "MeasureSpec":
        famd = d["family"]
        kind = famd["kind"]
        dim = d["dim"]
        if kind == "gaussian":
            cov = famd["cov"]
            fam = Gaussian(cov if np.isscalar(cov)
                           else tuple(map(tuple, np.atleast_2d(cov).tolist())))
        elif kind == "laplace":
            fam = LaplaceFamily()
        elif kind == "nu_p":
            fam = NuP(famd["p"], famd.get("calibrated", False))
        elif kind == "uniform_interval":
            fam = UniformInterval(famd["a"], famd["b"])
        elif kind == "uniform_body":
            fam = UniformBody(Body.from_dict(famd["body"]))
        elif kind == "nu_n_Q":
            fam = NuNQ(tuple(map(tuple, famd["Q"])))
        elif kind == "product":
            fam = Product(tuple(MeasureSpec.from_dict(c)
                                for c in famd["components"]))
        else:
            raise ValueError(f"unknown family kind {kind!r}")
        if d.get("perturbation"):
            base = MeasureSpec(dim, fam, _scale_from(d))
            return MeasureSpec(
                dim, Perturbed(base, PerturbationSpec.from_dict(d["perturbation"])),
                _scale_from(d))
        return MeasureSpec(dim, fam, _scale_from(d))

    @staticmethod
    def from_json(s: str) -> "MeasureSpec":
        return MeasureSpec.from_dict(json.loads(s))


def _scale_from(d):
    s = d.get("scale", 1.0)
    return tuple(s) if isinstance(s, list) else float(s)


def _symmetry_flags(spec: MeasureSpec) -> Tuple[bool, bool]:
    """(even, unconditional) flags derived from the family structure."""
    fam = spec.family
    if isinstance(fam, (LaplaceFamily, NuP)):
        return True, True
    if isinstance(fam, Gaussian):
        cov = fam.cov_matrix(spec.dim)
        uncond = np.allclose(cov, np.diag(np.diag(cov)))
        return True, uncond
    if isinstance(fam, UniformInterval):
        even = math.isclose(fam.a, -fam.b)
        return even, even
    if isinstance(fam, UniformBody):
        return True, fam.body.kind == "lp_ball"
    if isinstance(fam, NuNQ):
        q = fam.q_matrix(spec.dim)
        return True, np.allclose(q, np.diag(np.diag(q)))
    if isinstance(fam, Product):
        evens, unconds = zip(*(_symmetry_flags(c) for c in fam.components))
        return all(evens), all(unconds)
    if isinstance(fam, Perturbed):
        be, bu = _symmetry_flags(fam.base)
        return (be and fam.perturbation.even,
                bu and fam.perturbation.unconditional)
    return False, False


# ---------------------------------------------------------------------------
# density bundle
# ---------------------------------------------------------------------------

@dataclass
class Density:
    """Evaluator bundle for a measure.

    ``log_density`` accepts an (m, dim) array (1-D measures also accept a
    flat array) and returns the log density, -inf outside the support.
    ``support_box`` stores per-coordinate half-widths of the canonical
    centered truncation box.
    """
    dim: int
    log_density: Callable[[np.ndarray], np.ndarray]
    support_box: np.ndarray
    normalized: bool
    density_at_origin: Optional[float]
    even: bool = True
    unconditional: bool = False
    log_concave: bool = True
    spec: Optional[MeasureSpec] = None
    # indicator factor split out for coverage-weighted quadrature:
    # log_density == smooth_log_density + log(indicator)
    indicator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    smooth_log_density: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def log_rho(self, x) -> np.ndarray:
        return self.log_density(_as_points(x, self.dim))

    def rho(self, x) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_rho(x))

    def shifted(self, offset: float) -> "Density":
        """Same measure with log density shifted by a constant (tests the
        normalization-independence of every downstream quantity)."""
        base = self.log_density
        smooth = self.smooth_log_density
        return Density(self.dim, lambda pts: base(pts) + offset,
                       self.support_box.copy(), False, None,
                       self.even, self.unconditional, self.log_concave,
                       self.spec, self.indicator,
                       None if smooth is None
                       else (lambda pts: smooth(pts) + offset))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def build_measure(spec: MeasureSpec) -> Density:
    """Turn a spec into a density evaluator; validates spec invariants."""
    dens = _build_unscaled(spec)
    svec = spec.scale_vector()
    if not np.allclose(svec, 1.0):
        base_log = dens.log_density
        log_jac = -float(np.sum(np.log(svec)))
        def scaled(pts, _s=svec, _f=base_log, _j=log_jac):
            return _f(pts / _s) + _j
        phi0 = dens.density_at_origin
        if phi0 is not None:
            phi0 = phi0 / float(np.prod(svec))
        ind = dens.indicator
        smooth = dens.smooth_log_density
        dens = Density(spec.dim, scaled, dens.support_box * svec,
                       dens.normalized, phi0, dens.even, dens.unconditional,
                       dens.log_concave, spec,
                       indicator=None if ind is None
                       else (lambda pts, _i=ind, _s=svec: _i(pts / _s)),
                       smooth_log_density=None if smooth is None
                       else (lambda pts, _f=smooth, _s=svec, _j=log_jac:
                             _f(pts / _s) + _j))
    dens.spec = spec
    _certify(dens)
    return dens


def _build_unscaled(spec: MeasureSpec) -> Density:
    fam = spec.family
    n = spec.dim

    if isinstance(fam, Gaussian):
        cov = fam.cov_matrix(n)
        _check_psd(cov)
        prec = np.linalg.inv(cov)
        log_z = -0.5 * (n * math.log(2 * math.pi)
                        + float(np.linalg.slogdet(cov)[1]))
        def logd(pts):
            return -0.5 * np.einsum("...i,ij,...j->...", pts, prec, pts) + log_z
        hw = 8.1 * np.sqrt(np.diag(cov))
        phi0 = math.exp(log_z) if n == 1 else None
        uncond = np.allclose(cov, np.diag(np.diag(cov)))
        return Density(n, logd, hw, True, phi0, True, uncond, True, spec)

    if isinstance(fam, LaplaceFamily):
        def logd(pts):
            return -np.sum(np.abs(pts), axis=-1) - n * math.log(2.0)
        hw = np.full(n, -_LOG_FLOOR)
        return Density(n, logd, hw, True, 0.5 if n == 1 else None,
                       True, True, True, spec)

    if isinstance(fam, NuP):
        p = fam.p
        if fam.calibrated:
            a = alpha_p(p)
            def logd(pts):
                return -np.sum(np.abs(a * pts) ** p, axis=-1)
            hw = np.full(n, (-_LOG_FLOOR) ** (1.0 / p) / a)
            phi0 = 1.0
        else:
            z = alpha_p(p)  # Z_p = 2*Gamma(1+1/p)
            def logd(pts):
                return -np.sum(np.abs(pts) ** p, axis=-1) - n * math.log(z)
            hw = np.full(n, (-_LOG_FLOOR) ** (1.0 / p))
            phi0 = 1.0 / z
        return Density(n, logd, hw, True, phi0 if n == 1 else None,
                       True, True, p >= 1.0, spec)

    if isinstance(fam, UniformInterval):
        a, b = fam.a, fam.b
        logv = -math.log(b - a)
        def logd(pts):
            t = pts[..., 0]
            return np.where((t >= a) & (t <= b), logv, -np.inf)
        hw = np.array([max(abs(a), abs(b))])
        even = math.isclose(a, -b)
        phi0 = 1.0 / (b - a) if a <= 0.0 <= b else 0.0
        return Density(1, logd, hw, True, phi0, even, even, True, spec,
                       indicator=lambda pts: (pts[..., 0] >= a) & (pts[..., 0] <= b),
                       smooth_log_density=lambda pts: np.full(pts.shape[:-1], logv))

    if isinstance(fam, UniformBody):
        body = fam.body
        def logd(pts):
            return np.where(body.contains(pts), 0.0, -np.inf)
        hw = np.full(n, body.bounding_halfwidth(n))
        return Density(n, logd, hw, False, None, True,
                       body.kind == "lp_ball", True, spec,
                       indicator=body.contains,
                       smooth_log_density=lambda pts: np.zeros(pts.shape[:-1]))

    if isinstance(fam, NuNQ):
        q = fam.q_matrix(n)
        def logd(pts):
            return (-np.sum(np.abs(pts), axis=-1)
                    - np.einsum("...i,ij,...j->...", pts, q, pts))
        hw = np.full(n, -_LOG_FLOOR)
        uncond = np.allclose(q, np.diag(np.diag(q)))
        return Density(n, logd, hw, False, None, True, uncond, True, spec)

    if isinstance(fam, Product):
        parts = [build_measure(c) for c in fam.components]
        def logd(pts, _parts=parts):
            return sum(p.log_density(pts[..., i:i + 1])
                       for i, p in enumerate(_parts))
        hw = np.concatenate([p.support_box for p in parts])
        return Density(n, logd, hw,
                       all(p.normalized for p in parts), None,
                       all(p.even for p in parts),
                       all(p.unconditional for p in parts),
                       all(p.log_concave for p in parts), spec)

    if isinstance(fam, Perturbed):
        base = build_measure(fam.base)
        pert = fam.perturbation
        if pert.even and not base.even:
            raise ValueError("even perturbation requires an even base")
        lw = pert.log_weight(n)
        base_log = base.log_density
        def logd(pts):
            return base_log(pts) + lw(pts)
        hw = base.support_box.copy()
        indicator = base.indicator
        smooth = base.smooth_log_density or base.log_density
        if pert.kind == "truncation_box":
            hw = np.minimum(hw, np.asarray(pert.half_widths, dtype=float))
            pw = np.asarray(pert.half_widths, dtype=float)
            pert_ind = lambda pts: np.all(np.abs(pts) <= pw, axis=-1)
        elif pert.kind == "indicator_body":
            hw = np.minimum(hw, pert.body.bounding_halfwidth(n))
            pert_ind = pert.body.contains
        else:
            pert_ind = None
            smooth_pert = lw
        if pert_ind is not None:
            prev = indicator
            indicator = (pert_ind if prev is None
                         else (lambda pts, _a=prev, _b=pert_ind: _a(pts) & _b(pts)))
            smooth_out = smooth
        else:
            smooth_out = (lambda pts, _s=smooth, _w=smooth_pert: _s(pts) + _w(pts))
        return Density(n, logd, hw, False, None,
                       base.even and pert.even,
                       base.unconditional and pert.unconditional,
                       base.log_concave and pert.log_concave, spec,
                       indicator=indicator,
                       smooth_log_density=smooth_out if indicator is not None else None)

    raise ValueError(f"unknown family {fam!r}")


def _certify(dens: Density, rng_seed: int = 7) -> None:
    """Spot-check declared symmetry/log-concavity flags and integrability."""
    rng = np.random.default_rng(rng_seed)
    pts = rng.uniform(-0.5, 0.5, size=(64, dens.dim)) * dens.support_box
    if dens.even:
        a = dens.log_density(pts)
        b = dens.log_density(-pts)
        finite = np.isfinite(a) & np.isfinite(b)
        if finite.any() and not np.allclose(a[finite], b[finite],
                                            rtol=1e-9, atol=1e-9):
            raise ValueError("density flagged even but rho(x) != rho(-x)")
    if dens.log_concave:
        q = rng.uniform(-0.5, 0.5, size=(64, dens.dim)) * dens.support_box
        mid = 0.5 * (pts + q)
        la, lb, lm = (dens.log_density(z) for z in (pts, q, mid))
        ok = np.isfinite(la) & np.isfinite(lb)
        if ok.any() and np.any(lm[ok] < 0.5 * (la[ok] + lb[ok]) - 1e-7):
            raise ValueError("density flagged log-concave but midpoint "
                             "inequality fails")
    if dens.dim <= 3:
        res = {1: 512, 2: 96, 3: 40}[dens.dim]
        mass = integrate(dens, resolution=res)
        if not np.isfinite(mass) or mass <= 0.0:
            raise UnboundedDensity("density mass is not finite and positive")


# ---------------------------------------------------------------------------
# exact constants
# ---------------------------------------------------------------------------

def exact_poincare(spec: MeasureSpec) -> Optional[float]:
    """Closed-form Poincare constant, or None when no closed form is known.

    Covers intervals, Gaussians (largest covariance eigenvalue), the
    symmetric exponential (4), the p=2 member of the nu_p family, and
    products of these via tensorization.
    """
    fam = spec.family
    svec = spec.scale_vector()
    s2 = float(np.max(svec ** 2))
    if isinstance(fam, UniformInterval):
        return s2 * (fam.b - fam.a) ** 2 / math.pi ** 2
    if isinstance(fam, Gaussian):
        cov = fam.cov_matrix(spec.dim)
        if np.allclose(svec, svec[0]):
            return s2 * float(np.linalg.eigvalsh(cov).max())
        d = np.diag(svec)
        return float(np.linalg.eigvalsh(d @ cov @ d).max())
    if isinstance(fam, LaplaceFamily):
        return s2 * 4.0
    if isinstance(fam, NuP) and math.isclose(fam.p, 2.0):
        var = 0.5 / alpha_p(2.0) ** 2 if fam.calibrated else 0.5
        return s2 * var
    if isinstance(fam, NuP) and math.isclose(fam.p, 1.0):
        # exp(-|t|) has constant 4; calibration shrinks t by alpha_1 = 2
        return s2 * (1.0 if fam.calibrated else 4.0)
    if isinstance(fam, Product):
        vals = [exact_poincare(c) for c in fam.components]
        if any(v is None for v in vals):
            return None
        svec = spec.scale_vector()
        return float(max(v * s ** 2 for v, s in zip(vals, svec)))
    return None


# ---------------------------------------------------------------------------
# tensor-grid quadrature (dimension <= 3)
# ---------------------------------------------------------------------------

def _midpoint_grid(box: np.ndarray, res: int):
    axes = []
    weights = 1.0
    for hw in box:
        h = 2.0 * hw / res
        axes.append(np.linspace(-hw + 0.5 * h, hw - 0.5 * h, res))
        weights *= h
    return axes, weights


# sub-grid factor for refining cells straddling an indicator boundary
BOUNDARY_SUBGRID = 16


def _mixed_cells(indicator, box: np.ndarray, res: int):
    """Boolean mask of cells whose 2^dim corners disagree on membership,
    together with the all-inside mask."""
    dim = len(box)
    corner_axes = [np.linspace(-hw, hw, res + 1) for hw in box]
    mesh = np.meshgrid(*corner_axes, indexing="ij")
    corner_pts = np.stack([m.ravel() for m in mesh], axis=-1)
    inside = indicator(corner_pts).reshape([res + 1] * dim)
    agree_all = np.ones([res] * dim, dtype=bool)
    agree_any = np.zeros([res] * dim, dtype=bool)
    for offs in np.ndindex(*([2] * dim)):
        sl = tuple(slice(o, o + res) for o in offs)
        agree_all &= inside[sl]
        agree_any |= inside[sl]
    return agree_all, agree_any & ~agree_all


def _tensor_sum(dens: Density, f, res: int):
    axes, cell = _midpoint_grid(dens.support_box, res)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    with np.errstate(under="ignore"):
        if dens.indicator is not None and dens.smooth_log_density is not None:
            # interior cells at the nominal resolution, boundary cells on a
            # locally refined sub-grid (midpoint discontinuity is first
            # order; refinement pushes it below the smooth-part error)
            dim = dens.dim
            full, mixed = _mixed_cells(dens.indicator, dens.support_box, res)
            w = np.exp(dens.smooth_log_density(pts)) * full.ravel()
            fv = 1.0 if f is None else np.asarray(f(pts), dtype=float)
            num = float(np.sum(fv * w)) * cell
            den = float(np.sum(w)) * cell
            idx = np.argwhere(mixed)
            if idx.size:
                h = 2.0 * dens.support_box / res
                lows = -dens.support_box + idx * h
                sub = BOUNDARY_SUBGRID
                # irrational shift keeps sub-lattice points off flat faces
                # that align with the grid (e.g. l1-ball edges)
                jit = (math.sqrt(2.0) - 1.0) / 7.0
                offsets = [(np.arange(sub) + 0.5 + jit * (d + 1)) / sub * h[d]
                           for d in range(dim)]
                omesh = np.meshgrid(*offsets, indexing="ij")
                opts = np.stack([m.ravel() for m in omesh], axis=-1)
                spts = (lows[:, None, :] + opts[None, :, :]).reshape(-1, dim)
                sw = (np.exp(dens.smooth_log_density(spts))
                      * dens.indicator(spts))
                sf = 1.0 if f is None else np.asarray(f(spts), dtype=float)
                subcell = cell / sub ** dim
                num += float(np.sum(sf * sw)) * subcell
                den += float(np.sum(sw)) * subcell
            return num, den
        w = np.exp(dens.log_density(pts))
    fv = 1.0 if f is None else np.asarray(f(pts), dtype=float)
    return float(np.sum(fv * w)) * cell, float(np.sum(w)) * cell


def expectation_with_error(dens: Density, f, resolution: int = 1024):
    """Mean of f under the (normalized) measure by midpoint quadrature.

    Returns the Richardson-extrapolated value together with an error
    estimate from the two-grid difference (second-order scheme).
    """
    if dens.dim > 3:
        raise DimensionTooLarge("quadrature supports dimension <= 3; "
                                "use the sampling module")
    resolution = int(resolution)
    if resolution % 2:
        resolution += 1
    num_c, den_c = _tensor_sum(dens, f, resolution // 2)
    num_f, den_f = _tensor_sum(dens, f, resolution)
    if den_f <= 0.0:
        raise UnboundedDensity("zero mass on the support box")
    coarse = num_c / den_c
    fine = num_f / den_f
    if dens.indicator is not None:
        # boundary error is not h^2-clean; skip extrapolation
        return fine, abs(fine - coarse)
    value = (4.0 * fine - coarse) / 3.0
    return value, abs(fine - coarse) / 3.0


def expectation(dens: Density, f, resolution: int = 1024) -> float:
    return expectation_with_error(dens, f, resolution)[0]


def integrate(dens: Density, f=None, resolution: int = 1024) -> float:
    """Raw integral of f * rho over the support box (no normalization)."""
    if dens.dim > 3:
        raise DimensionTooLarge("quadrature supports dimension <= 3")
    resolution = int(resolution)
    if resolution % 2:
        resolution += 1
    num_c, _ = _tensor_sum(dens, f, resolution // 2)
    num_f, _ = _tensor_sum(dens, f, resolution)
    return (4.0 * num_f - num_c) / 3.0


def covariance_by_quadrature(dens: Density, resolution: int = 512) -> np.ndarray:
    """Covariance matrix of a centered measure by tensor quadrature."""
    n = dens.dim
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            cov[i, j] = cov[j, i] = expectation(
                dens, lambda pts, i=i, j=j: pts[..., i] * pts[..., j],
                resolution)
    return cov
