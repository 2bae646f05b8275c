"""Radiative properties of an artificial atom coupled to a junction-array cavity.

Subpackages by concern: ``circuit`` (parameters, reduced matrices),
``spectral`` (open quadratic eigenproblem, closed-chain modes, analytic
standing waves), ``tracking`` (adiabatic atomic-mode identification and
sweeps), ``coupling`` (closed-system Hamiltonian data), ``impedance``
(ladder-network baselines), ``dynamics`` (pole-residue emission dynamics and
the covariance oracle), ``nonlinear`` (classical cubic perturbation),
``config``/``cli`` (YAML-driven runs).
"""

__version__ = "0.1.0"
