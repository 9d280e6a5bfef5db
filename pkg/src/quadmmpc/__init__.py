"""Multi-model predictive attitude control toolkit for quadrotors.

Subpackages follow the processing pipeline: nonlinear plant model
(`dynamics`), linear-systems numerics (`linsys`), gap metric and bank
reduction (`gap`), operating-point bank construction (`bank`),
soft-switched constrained MPC (`mpc`), outer-loop cascade and baseline
controllers (`cascade`), the closed-loop scenario engine (`sim`), and
the command-line front end (`cli`).

Hot per-step kernels (plant integration and the QP solver) are served by
a compiled extension when available, with a pure-NumPy fallback chosen
at import time; see `quadmmpc.backend_name()`.
"""

from ._backend import backend_name

__all__ = ["backend_name"]
__version__ = "0.1.0"
