"""threshres: resonances of perturbed Pauli/Dirac operators near thresholds.

Pipeline: magnetic/potential data model -> lowest-Landau-band basis ->
Toeplitz counting functions -> axial resolvent kernels -> reduced
Birman-Schwinger families -> determinant zeros, contour indices and
counting checks.  The ``cli`` module wires these into batch experiments.
"""

from . import axial, birman_schwinger, charval, cli, errors, landau, model, toeplitz
from .birman_schwinger import (
    BSAssembly,
    SpectralMap,
    assemble_A,
    assemble_B,
    assemble_T,
    bs_identity_residual,
    build_assembly,
    sandwich_operator,
    spectral_map,
    sqrt_upper,
)
from .charval import (
    ResonanceSet,
    accumulation_check,
    annulus_count_check,
    contour_index,
    find_resonances,
    multiplicity,
    sector_check,
)
from .landau import build_basis, landau_dei, projection_kernel
from .model import (
    AxialProfile,
    DomainRadii,
    MagneticModel,
    PerturbationSpec,
    TransversePotential,
    effective_weight,
    validate_hypothesis,
)
from .toeplitz import (
    CountingCurve,
    assemble,
    comparator_compact,
    comparator_power,
    comparator_quasi_exponential,
    counting,
    fit_counting_law,
    schatten_check,
)

__version__ = "0.1.0"
