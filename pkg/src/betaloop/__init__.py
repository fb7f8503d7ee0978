"""Loop-equation engine for the classical beta ensembles.

Exact 1/N expansions of resolvent correlators, spectral moments and
smoothed densities for the Gaussian, Laguerre and Jacobi beta ensembles,
with a Monte Carlo verifier driven by tridiagonal/bidiagonal matrix models.
"""

__version__ = "0.1.0"
