"""Exception types shared across the package."""


class ThreshresError(Exception):
    """Base class for all package-specific errors."""


class IntegrationFailure(ThreshresError):
    """Adaptive quadrature did not converge within the requested tolerance."""


class UnsupportedField(ThreshresError):
    """Operation requires a constant magnetic field (phi_tilde absent)."""


class OutOfAsymptoticRange(ThreshresError):
    """Comparator evaluated outside its asymptotic domain 0 < s < 1/e."""


class FitRangeError(ThreshresError):
    """Counting-curve fit requested on too few samples or too narrow a range."""


class ThresholdSingularity(ThreshresError):
    """Kernel or operator evaluated exactly at the threshold k = 0."""


class OutsideContinuationStrip(ThreshresError):
    """Wavenumber outside the holomorphy strip Im k > -delta of the weighted kernel."""


class OutsideDisk(ThreshresError):
    """Wavenumber outside the admissible punctured disk of the assembly."""


class TruncationError(ThreshresError):
    """Basis or level truncation too small for the requested tolerance."""


class FlavorError(ThreshresError):
    """Matrix dimension or component selector inconsistent with the operator flavor."""


class MapPole(ThreshresError):
    """Spectral map evaluated at its pole (z = -m for the Dirac map)."""


class SingularAtNode(ThreshresError):
    """Determinant exactly singular at a quadrature node."""


class ContourTooClose(ThreshresError):
    """A zero of the determinant lies too close to the integration contour."""


class SubdivisionBudget(ThreshresError):
    """Box-subdivision budget exhausted before all zeros were isolated."""


class MissingArtifact(ThreshresError):
    """Expected run artifact (CSV/JSON) not found in the run directory."""
