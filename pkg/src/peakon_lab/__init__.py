"""Numerical laboratory for perturbations of the Novikov peakon.

Modules: ``kernel`` (convolutions with ``e^{-|x|}``), ``gridfn`` (peaked grid
functions and norms), ``linear`` (exact linearized dynamics), ``characteristics``
(nonlinear solver), ``diagnostics`` (growth fits, Riccati comparison, audits),
``oracle`` (direct method-of-lines solver) and ``cli``.
"""

__version__ = "0.1.0"
