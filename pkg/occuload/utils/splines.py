import numpy as np
from scipy.interpolate import BSpline
from occuload.schemas.config import SplineConfig


def clamped_knots(cfg: SplineConfig) -> np.ndarray:
    """Uniform knots over the domain, repeated order times at both ends."""
    lo, hi = cfg.domain
    inner = np.linspace(lo, hi, cfg.grid_count + 1)
    return np.concatenate([np.full(cfg.order, lo), inner, np.full(cfg.order, hi)])


def bspline_basis(x, cfg: SplineConfig) -> np.ndarray:
    """
    Evaluates the grid_count + order B-spline basis functions at x.
    Inputs outside the domain are clipped to it. A scalar input returns a
    vector, an array input returns one row per value.
    """
    lo, hi = cfg.domain
    values = np.asarray(x, dtype=float)
    flat = np.clip(np.atleast_1d(values).ravel(), lo, hi)

    design = BSpline.design_matrix(flat, clamped_knots(cfg), cfg.order).toarray()
    if values.ndim == 0:
        return design[0]
    return design.reshape(values.shape + (cfg.n_basis,))


def spline_eval(x, coeffs, cfg: SplineConfig) -> np.ndarray:
    return bspline_basis(x, cfg) @ np.asarray(coeffs, dtype=float)


def fit_spline_coeffs(x, values, cfg: SplineConfig) -> np.ndarray:
    """Least-squares spline coefficients for values observed at normalized inputs x."""
    design = bspline_basis(np.asarray(x, dtype=float), cfg)
    coeffs, *_ = np.linalg.lstsq(design, np.asarray(values, dtype=float), rcond=None)
    return coeffs
