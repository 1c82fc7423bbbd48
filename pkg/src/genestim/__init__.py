"""Generalized-estimator information toolkit.

Model families with exact/Monte-Carlo expectation engines, estimating
functions assessed by the information they utilize (with the Fisher
bound), score-inversion confidence intervals, exact coverage
enumeration for the two-binomial log-odds-ratio problem, and a
location-estimator comparison lab.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
