"""Single-qubit control under random telegraph noise.

Units are dimensionless throughout: energies in units of the maximal control
amplitude ``a_max`` and times in units of ``hbar / a_max``.
"""

__version__ = "0.1.0"
