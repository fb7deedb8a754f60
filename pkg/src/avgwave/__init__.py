"""Average wave function of the Schrodinger equation with a Gaussian random potential.

Three routes to E[phi_hat_eps(t, xi)]: split-step PDE ensembles on a torus,
Feynman-Kac path Monte Carlo, and the small-eps limit driven by the
self-intersection local time of Brownian motion.
"""
__version__ = "0.1.0"

from .covariance import ModelConstants, SchoenbergMeasure, mean_x_tau, rbar, renorm_constant, rho_d
from .ensemble import EnsembleEstimate, VarianceWarning
from .paths import BrownianPath, gamma_renormalized, sample_path, x_eps_mixture, x_tau
from .pde import TorusGrid, ensemble_average_fourier, homogenization_error, sample_potential
from .profiles import InitialProfile
from .representation import FKEnsemble, LimitEnsemble, compare_routes, fk_average, limit_average, split_average
from .duhamel import first_order_term, weak_coupling_check

__all__ = [
    "BrownianPath", "EnsembleEstimate", "FKEnsemble", "InitialProfile", "LimitEnsemble", "ModelConstants",
    "SchoenbergMeasure", "TorusGrid", "VarianceWarning", "compare_routes", "ensemble_average_fourier",
    "first_order_term", "fk_average", "gamma_renormalized", "homogenization_error", "limit_average",
    "mean_x_tau", "rbar", "renorm_constant", "rho_d", "sample_path", "sample_potential", "split_average",
    "weak_coupling_check", "x_eps_mixture", "x_tau",
]
