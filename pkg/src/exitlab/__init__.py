"""Exit times, survival envelopes and spectral checks for diffusions on
Euclidean domains, the Heisenberg group and Sierpinski gasket graphs."""

import warnings

# numba probes for an optional TBB threading layer and warns when the
# installed version is too old; the OpenMP/workqueue layers are used instead.
warnings.filterwarnings("ignore", message=".*TBB.*")

from .core import (  # noqa: E402
    ContractError,
    DomainError,
    DomainSpec,
    EnvelopeParams,
    ParameterFunction,
    SpaceSpec,
    check_layercake,
    eval_F,
    eval_Phi,
    eval_Rinv,
    exponent_dprime,
    ue_envelope,
    volume,
)
from .samplers import ExitBatch, ExitRecord, SimConfig, run_batch, run_exit  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "ContractError", "DomainError", "DomainSpec", "EnvelopeParams", "ExitBatch", "ExitRecord",
    "ParameterFunction", "SimConfig", "SpaceSpec", "check_layercake", "eval_F", "eval_Phi",
    "eval_Rinv", "exponent_dprime", "run_batch", "run_exit", "ue_envelope", "volume",
]
