"""Prandtl-Batchelor flow construction and verification on the unit disk.

Library layout:

* :mod:`pbdisk.coords`       grids, Fourier/finite-difference operators
* :mod:`pbdisk.euler`        Couette base flow and linearized Euler correctors
* :mod:`pbdisk.prandtl`      boundary-layer hierarchy on the scaled strip
* :mod:`pbdisk.assemble`     cutoff, divergence corrector, composite solution
* :mod:`pbdisk.error_solver` Newton solve of the nonlinear error system
* :mod:`pbdisk.diagnostics`  frequency split, vorticity, identities, sweeps
* :mod:`pbdisk.fieldio`      binary field dumps
* :mod:`pbdisk.pipeline`     experiment orchestration used by the CLI
"""

__version__ = "0.1.0"
