"""
coneig - Constrained Eigenpairs
Finds eigenpairs of a self-adjoint operator that lie in an interval and sit
close to a closed subspace, by solving the lifted problem L + i*s*Q.
"""

__version__ = "0.1.0"
