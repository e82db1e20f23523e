"""Simulation and verification of an entanglement-assisted remote z-rotation on photons."""

__version__ = "0.1.0"

from .channels import KrausChannel, NoiseParams, dephased_rotation, dephasing
from .optics import rz, u_com_from_plates
from .protocol import RunConfig, run
from .qmath import DensityMatrix, QubitState, bloch_vector, fidelity
from .tomography import ChiMatrix, avg_fidelity, max_angle_deviation, process_tomography

__all__ = [
    "ChiMatrix",
    "DensityMatrix",
    "KrausChannel",
    "NoiseParams",
    "QubitState",
    "RunConfig",
    "avg_fidelity",
    "bloch_vector",
    "dephased_rotation",
    "dephasing",
    "fidelity",
    "max_angle_deviation",
    "process_tomography",
    "run",
    "rz",
    "u_com_from_plates",
]
