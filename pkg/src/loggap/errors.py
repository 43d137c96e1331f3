"""Exception types shared across the package."""


class LogGapError(Exception):
    """Base class for all package errors."""


# --- measure construction ---

class NonPSDQuadratic(LogGapError):
    """Quadratic form matrix has an eigenvalue below the PSD floor."""


class UnboundedDensity(LogGapError):
    """Density does not decay: no finite box captures its mass."""


class DimensionTooLarge(LogGapError):
    """Tensor quadrature is restricted to dimension <= 3."""


# --- 1-D and n-D spectral solvers ---

class SingularWeight(LogGapError):
    """Density underflowed to zero on an interior cell of the grid."""


class NotConverged(LogGapError):
    """Window growth changed the eigenvalue by more than the tolerance."""


class NoConvergence(LogGapError):
    """Iterative eigensolver failed to reach the requested residual."""

    def __init__(self, iterations, best_residual):
        super().__init__(
            f"eigensolver stalled after {iterations} iterations "
            f"(best residual {best_residual:.3e})")
        self.iterations = iterations
        self.best_residual = best_residual


class NotNormalized(LogGapError):
    """Operation requires a probability density."""


class NotCentered(LogGapError):
    """Grid function must have zero mean with respect to the measure."""


class SolverBreakdown(LogGapError):
    """Conjugate-direction solve for the H^{-1} norm did not converge."""


class HessianNotPD(LogGapError):
    """Potential Hessian is not positive definite at a sample point."""

    def __init__(self, point):
        super().__init__(f"Hessian not positive definite at {point}")
        self.point = point


class InsufficientSpectrum(LogGapError):
    """Report does not contain enough labeled eigenpairs."""


class GroupDoesNotPreserveGrid(LogGapError):
    """Symmetry-group element does not map the grid onto itself."""


class FNotOdd(LogGapError):
    """Test function must be odd for the weighted variance bound."""


class OutOfMemory(LogGapError):
    """Requested grid would exceed the assembly budget."""

    def __init__(self, cells, stencil):
        super().__init__(
            f"grid needs ~{cells * stencil} nonzeros ({cells} cells x "
            f"{stencil} stencil); reduce the resolution")
        self.cells = cells
        self.stencil = stencil


# --- mixtures ---

class DensityUnderflow(LogGapError):
    """phi(t) underflowed; shrink the evaluation window."""

    def __init__(self, t):
        super().__init__(f"density underflow at t={t!r}")
        self.t = t


# --- sampling ---

class DivergentChain(LogGapError):
    """MCMC position norm exceeded the divergence threshold."""


class ChordNotFound(LogGapError):
    """Hit-and-run bisection failed; membership oracle is suspect."""


class TooFewSamples(LogGapError):
    """Covariance estimation requires at least 1000 samples."""


class DimensionMismatch(LogGapError):
    """Operands have different dimensions."""


# --- bounds registry ---

class UnknownFormula(LogGapError):
    """Formula identifier is not in the registry."""


class BadParams(LogGapError):
    """Parameters do not match the formula signature."""


# --- CLI ---

class ConfigInvalid(LogGapError):
    """Experiment configuration failed validation."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
