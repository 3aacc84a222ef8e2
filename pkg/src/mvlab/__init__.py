"""Numerical laboratory for periodic McKean-Vlasov dynamics, phase transitions and homogenization."""

__version__ = "0.1.0"

from .density import DensityField
from .potentials import CosineSeries, Hamiltonian

__all__ = ["CosineSeries", "DensityField", "Hamiltonian", "__version__"]
