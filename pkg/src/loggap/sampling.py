"""Samplers and covariance estimation.

Two chains are provided: Metropolis-adjusted Langevin (MALA) for
log-concave densities, with the step size tuned during burn-in and a
smoothing width for kinked potentials, and hit-and-run for uniform
measures on symmetric convex sections of l_p balls.  Covariance
estimates carry batch-means standard errors so dominance checks can
inflate their tolerance by the sampling noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (ChordNotFound, DimensionMismatch, DivergentChain,
                     TooFewSamples)
from .measures import Density

__all__ = ["SectionSpec", "SampleBatch", "CovEstimate", "run_mala",
           "run_hit_and_run", "covariance", "dominance_check",
           "effective_sample_size"]

DIVERGENCE_NORM = 1e6


@dataclass
class SectionSpec:
    """Section of the unit l_p ball by a d-dimensional subspace E.

    ``basis`` is a d x n matrix with orthonormal rows spanning E; a point
    y in R^d (coordinates in that basis) lies inside iff the ambient
    vector y @ basis has l_p norm at most 1.
    """
    n: int
    p: float
    basis: np.ndarray

    def __post_init__(self):
        self.basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if self.basis.shape[1] != self.n:
            raise DimensionMismatch("basis rows must live in R^n")
        gram = self.basis @ self.basis.T
        if not np.allclose(gram, np.eye(self.dim), atol=1e-12):
            raise ValueError("basis rows are not orthonormal")

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def contains(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=float))
        ambient = y @ self.basis
        if math.isinf(self.p):
            norms = np.max(np.abs(ambient), axis=-1)
        else:
            norms = np.sum(np.abs(ambient) ** self.p, axis=-1) ** (1 / self.p)
        return norms <= 1.0


@dataclass
class SampleBatch:
    samples: np.ndarray
    seed: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


@dataclass
class CovEstimate:
    matrix: np.ndarray
    stderr: np.ndarray
    count: int

    @property
    def operator_norm(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).max())

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))


def effective_sample_size(x: np.ndarray) -> float:
    """ESS of a scalar chain via the initial-positive-sum autocorrelation
    estimator."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    xc = x - x.mean()
    var = float(xc @ xc) / n
    if var == 0.0:
        return float(n)
    # FFT autocovariance
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    s = 1.0
    for k in range(1, n):
        if rho[k] <= 0.0:
            break
        s += 2.0 * rho[k]
    return max(1.0, n / s)


# ---------------------------------------------------------------------------
# MALA
# ---------------------------------------------------------------------------

def _smoothed_gradient(dens: Density, x: np.ndarray,
                       eta: float) -> np.ndarray:
    """Central-difference gradient of the smooth part of log rho with
    step eta; the step doubles as the smoothing width for kinks."""
    logd = dens.smooth_log_density or dens.log_density
    g = np.empty_like(x)
    for i in range(x.shape[1]):
        e = np.zeros(x.shape[1])
        e[i] = eta
        g[:, i] = (logd(x + e) - logd(x - e)) / (2.0 * eta)
    return g


def run_mala(dens: Density, steps: int, seed: int,
             eta: float = 1e-3, initial_step: Optional[float] = None,
             target_acceptance=(0.5, 0.6)) -> SampleBatch:
    """Metropolis-adjusted Langevin chain targeting ``dens``.

    Burn-in is 10% of ``steps``; during burn-in the step size is scaled
    until the windowed acceptance rate lands in ``target_acceptance``,
    then frozen.  For densities with an indicator factor, proposals
    outside the support are rejected by the Metropolis step.
    """
    rng = np.random.default_rng(seed)
    dim = dens.dim
    burn = max(steps // 10, 100)
    h = initial_step if initial_step is not None else 0.5 / math.sqrt(dim)

    x = np.zeros((1, dim))
    logp = float(dens.log_density(x)[0])
    if not np.isfinite(logp):
        raise ValueError("origin must lie in the support")
    grad = _smoothed_gradient(dens, x, eta)

    lo, hi = target_acceptance
    out = np.empty((steps, dim))
    accepted_window = 0
    window = 0
    accepted_total = 0
    for it in range(burn + steps):
        noise = rng.standard_normal((1, dim))
        prop = x + 0.5 * h * h * grad + h * noise
        logp_prop = float(dens.log_density(prop)[0])
        if np.isfinite(logp_prop):
            grad_prop = _smoothed_gradient(dens, prop, eta)
            fwd = prop - x - 0.5 * h * h * grad
            bwd = x - prop - 0.5 * h * h * grad_prop
            log_q = (float(fwd[0] @ fwd[0]) - float(bwd[0] @ bwd[0])) \
                / (2 * h * h)
            log_alpha = logp_prop - logp + log_q
        else:
            log_alpha = -math.inf
        if math.log(rng.uniform()) < log_alpha:
            x, logp = prop, logp_prop
            grad = _smoothed_gradient(dens, x, eta)
            accepted_window += 1
            if it >= burn:
                accepted_total += 1
        window += 1
        if it < burn and window == 50:
            rate = accepted_window / window
            if rate < lo:
                h *= 0.8
            elif rate > hi:
                h *= 1.25
            accepted_window = 0
            window = 0
        if float(x[0] @ x[0]) > DIVERGENCE_NORM ** 2:
            raise DivergentChain(f"position norm exceeded {DIVERGENCE_NORM:g}")
        if it >= burn:
            out[it - burn] = x[0]

    ess = [effective_sample_size(out[:, i]) for i in range(dim)]
    return SampleBatch(
        samples=out, seed=seed,
        diagnostics={"acceptance_rate": accepted_total / steps,
                     "step_size": h, "burn_in": burn,
                     "smoothing_eta": eta, "ess": ess})


# ---------------------------------------------------------------------------
# hit-and-run
# ---------------------------------------------------------------------------

def run_hit_and_run(body: SectionSpec, steps: int, seed: int,
                    n_chains: int = 16) -> SampleBatch:
    """Uniform sampling on a symmetric convex section by random chords.

    ``n_chains`` independent chains advance in lock-step (one vectorized
    update per iteration) and their draws are concatenated chain-major;
    ``steps`` is the total sample count.  Chord endpoints are located by
    bisection on the (monotone) l_p norm along the ray to ~1e-10
    relative accuracy; the norm is evaluated on ambient coordinates to
    keep the inner loop cheap, while the audit at the end re-checks a 1%
    subsample through the public membership oracle.
    """
    rng = np.random.default_rng(seed)
    d = body.dim
    p = body.p
    basis = body.basis
    n_chains = max(1, min(n_chains, steps))
    per_chain = -(-steps // n_chains)           # ceil division
    x = np.zeros((n_chains, d))
    xa = x @ basis                              # ambient coords, incremental
    if not body.contains(x[:1])[0]:
        raise ChordNotFound("origin is not inside the body")

    def pnorm(a):
        if math.isinf(p):
            return np.max(np.abs(a), axis=-1)
        return np.sum(np.abs(a) ** p, axis=-1) ** (1.0 / p)

    burn = max(per_chain // 10, 100)
    signs = np.array([1.0, -1.0])
    trace = np.empty((per_chain, n_chains, d))
    for it in range(burn + per_chain):
        u = rng.standard_normal((n_chains, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        ua = u @ basis
        # bracket both chord ends of every chain at once
        t_in = np.zeros((n_chains, 2))
        t_out = np.ones((n_chains, 2))
        for grow in range(201):
            pts = xa[:, None, :] + (signs[None, :, None] *
                                    t_out[:, :, None]) * ua[:, None, :]
            inside = pnorm(pts) <= 1.0
            if not inside.any():
                break
            t_in[inside] = t_out[inside]
            t_out[inside] *= 2.0
        else:
            raise ChordNotFound("body appears unbounded along the chord")
        for _ in range(50):
            mid = 0.5 * (t_in + t_out)
            pts = xa[:, None, :] + (signs[None, :, None] *
                                    mid[:, :, None]) * ua[:, None, :]
            inside = pnorm(pts) <= 1.0
            t_in = np.where(inside, mid, t_in)
            t_out = np.where(inside, t_out, mid)
        t = rng.uniform(-t_in[:, 1], t_in[:, 0])
        x = x + t[:, None] * u
        xa = xa + t[:, None] * ua
        if it >= burn:
            trace[it - burn] = x
    out = trace.transpose(1, 0, 2).reshape(-1, d)[:steps]
    ess = [min(float(steps),
               sum(effective_sample_size(trace[:, c, i])
                   for c in range(n_chains))) for i in range(d)]
    # audit: re-check membership on a 1% subsample
    audit_idx = rng.choice(steps, size=max(1, steps // 100), replace=False)
    if not np.all(body.contains(out[audit_idx])):
        raise ChordNotFound("audit subsample left the body")
    return SampleBatch(samples=out, seed=seed,
                       diagnostics={"burn_in": burn, "ess": ess})


# ---------------------------------------------------------------------------
# covariance and dominance
# ---------------------------------------------------------------------------

def covariance(batch: SampleBatch, n_batches: int = 0) -> CovEstimate:
    """Empirical covariance with per-entry batch-means standard errors."""
    if batch.count < 1000:
        raise TooFewSamples(f"{batch.count} < 1000 samples")
    x = batch.samples
    n, d = x.shape
    if n_batches <= 0:
        n_batches = max(10, int(math.sqrt(n)))
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / n
    size = n // n_batches
    means = np.empty((n_batches, d, d))
    for b in range(n_batches):
        blk = xc[b * size:(b + 1) * size]
        means[b] = blk.T @ blk / size
    stderr = means.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return CovEstimate(matrix=cov, stderr=stderr, count=n)


def _as_matrix(a):
    if isinstance(a, CovEstimate):
        return a.matrix, a.stderr
    return np.asarray(a, dtype=float), None


def dominance_check(a, b, factor: float = 1.0,
                    quad_tol: float = 1e-8):
    """Is ``factor * B - A`` positive semidefinite?

    ``a`` and ``b`` are CovEstimate (stderr-aware, tolerance inflated by
    3x the propagated entry errors) or plain matrices from quadrature
    (absolute tolerance ``quad_tol``).  Returns (holds, margin) with
    margin the smallest eigenvalue of factor*B - A.
    """
    mat_a, err_a = _as_matrix(a)
    mat_b, err_b = _as_matrix(b)
    if mat_a.shape != mat_b.shape:
        raise DimensionMismatch(f"{mat_a.shape} vs {mat_b.shape}")
    diff = factor * mat_b - mat_a
    margin = float(np.linalg.eigvalsh(diff).min())
    tol = quad_tol
    if err_a is not None or err_b is not None:
        err = np.zeros_like(mat_a)
        if err_a is not None:
            err = err + err_a
        if err_b is not None:
            err = err + factor * np.asarray(err_b)
        # eigenvalue perturbation is bounded by the spectral norm of the
        # entrywise error matrix
        tol = 3.0 * float(np.linalg.norm(err, 2))
    return margin >= -tol, margin
