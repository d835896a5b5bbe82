"""Atomic-reservoir generation of two-mode squeezed (EPR-entangled) cavity fields."""

__version__ = "0.1.0"

from .dressed import DriveParams, drive_for_mu, dressed_states, mode_frequencies, squeeze_params
from .errors import ConfigError, DegenerateDriveError, NumericalError, RegimeError, RegimeWarning, TruncationWarning
from .fock import HilbertSpec, QuantumState, basis_transform, squeeze_op, tmsv_state
from .observables import epr_variance, fidelity, log_negativity, mean_photon, metrics_report
from .protocol import ProtocolConfig, run_protocol, stochastic_ensemble, stochastic_trajectory
from .reservoir import ReservoirParams, kick_map, lindblad_evolve, poisson_arrivals
from .sectors import SectorState

__all__ = [
    "ConfigError",
    "DegenerateDriveError",
    "DriveParams",
    "HilbertSpec",
    "NumericalError",
    "ProtocolConfig",
    "QuantumState",
    "RegimeError",
    "RegimeWarning",
    "ReservoirParams",
    "SectorState",
    "TruncationWarning",
    "basis_transform",
    "dressed_states",
    "drive_for_mu",
    "epr_variance",
    "fidelity",
    "kick_map",
    "lindblad_evolve",
    "log_negativity",
    "mean_photon",
    "metrics_report",
    "mode_frequencies",
    "poisson_arrivals",
    "run_protocol",
    "squeeze_op",
    "squeeze_params",
    "stochastic_ensemble",
    "stochastic_trajectory",
    "tmsv_state",
]
