"""Radial Monge transport with vanishing Dirichlet penalization.

Numerical study of min |T(x)-x| transport from a quarter disk onto a polar
annulus under an eps * Dirichlet penalty: exact W1, the obstacle constant K,
ray-preserving optimal maps, energy decompositions, a Lipschitz recovery
family, and discrete minimization confirming the eps*|log eps| asymptotics.
"""

__version__ = "0.1.0"
