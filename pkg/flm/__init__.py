"""Group-sparse Lasso estimation for the multivariate functional linear model."""

__version__ = '0.1.0'
