"""Bloch eigenfunctions of elliptic Calogero-Moser type operators.

Library + CLI covering: scalar theta/Weierstrass building blocks, a
closed-form theta-monomial algebra, quasi-invariant potential checks, the
continuous and difference two-dimensional solvers with their covering
varieties, the three-body deformed operator pair, and discrete-spectrum
states.
"""

__version__ = "0.1.0"
