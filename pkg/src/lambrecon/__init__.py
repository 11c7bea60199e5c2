"""Reconstruction of real potentials from nodeless wavefunction amplitudes.

Given a strictly positive amplitude R, the package attaches the unique
constant-current phase S (with current constant C), reconstructs the real
potential for which R e^{iS} is an exact stationary state, verifies every
testable property of the construction, and simulates the pulse-kick
preparation protocol with a unitary Crank-Nicolson propagator.
"""

from .exprparse import Expr, Jet2, eval_jet, parse, to_text
from .prefactor import (
    LINE,
    RADIAL,
    NodalPrefactorError,
    Prefactor,
    PrefactorDomainError,
    builtin_families,
    family_free,
    family_gaussian,
    family_hydrogen,
    family_well,
    from_expression,
)
from .propagate import (
    LambProtocolReport,
    PropagationConfig,
    PropagationError,
    PropagationReport,
    cn_propagate,
    lamb_protocol,
    phase_kick,
    window_fidelity,
)
from .reconstruct import (
    ClipError,
    Grid1D,
    QuadratureError,
    ReconstructedState,
    ReconstructionConfig,
    clip_domain,
    current_density,
    default_grid,
    phase_at,
    potential_line,
    potential_radial,
    reconstruct,
)
from .verify import (
    VerificationReport,
    VerifyTolerances,
    check_current,
    check_recon_condition,
    norm,
    residual_split,
    verify_state,
)

__version__ = "0.1.0"
