"""Numerical laboratory for damped wave equations with degenerate damping.

Modules: ``spectral`` (grids, fields, the discrete operator), ``semigroup``
(propagation, decay curves, fits), ``resolvent`` (sweeps, witnesses,
observability certificates), ``semilinear`` (nonlinear integration, energy
identity, convolution bounds), ``geometry`` (rays, Ikawa conditions,
foliations) and ``cli`` (experiment runner).
"""

__version__ = "0.1.0"
