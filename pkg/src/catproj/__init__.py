"""catproj: projection measurements onto superpositions of weak coherent
states — construction, displaced-photon-counting approximation, fidelity
optimization, and detector tomography on a truncated Fock space."""

__version__ = "0.1.0"

from . import fock, povm, fidelity, tomography, experiment, serialize  # noqa: F401
