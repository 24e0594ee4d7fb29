"""Simulation of GHZ-channel teleportation in a one-sender, many-receiver network,
with cavity-QED generation of the GHZ channel."""

from .qstate import (
    ForcedOutcomes,
    ModeDescriptor,
    Operator,
    SeededSampler,
    StateVector,
    apply,
    fidelity,
    measure,
    reduced_purity,
    tensor,
)
from .teleport import InfoState, NetworkConfig, correction_for, run_teleport
from .cavity import CavityParams, TimingParams, generate_ghz_multi_cavity, generate_ghz_single_cavity
from .netsim import run_session, verify_transcript

__version__ = "0.1.0"

__all__ = [
    "ForcedOutcomes", "ModeDescriptor", "Operator", "SeededSampler", "StateVector",
    "apply", "fidelity", "measure", "reduced_purity", "tensor",
    "InfoState", "NetworkConfig", "correction_for", "run_teleport",
    "CavityParams", "TimingParams", "generate_ghz_multi_cavity", "generate_ghz_single_cavity",
    "run_session", "verify_transcript",
]
