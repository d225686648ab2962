"""Recover a constrained parametric curve from a clean curve image.

Three stages: per-column pixel mapping (darkest-pixel trace back to data
coordinates), ridge-regularized polynomial fitting over the monomial basis,
and a domain-knowledge correction that locates the cut-in and rated speeds
as roots of the fitted polynomial's derivative (bisection seed + Newton
iteration, with a grid fallback) and clamps flat plateaus outside them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .curve_models import PiecewiseWpc
from .raster import RasterConfig, WpcImage, to_greyscale


class ExtractionFailure(RuntimeError):
    """Raised when an image is too faint to carry a curve trace."""


class NoSignChangeError(ValueError):
    """Bisection bracket endpoints have the same sign."""


class NonConvergenceError(RuntimeError):
    """Newton iteration failed (divergence, flat derivative, or out of bounds)."""


class NumericalRankError(np.linalg.LinAlgError):
    """Design matrix is rank deficient; a positive ridge penalty would fix it."""


@dataclass(frozen=True)
class ExtractionConfig:
    """Knobs for the pixel-map / fit / correction stages.

    The default order of 21 is what it takes for the fitted polynomial to
    track the steepest sampled S-shapes within the pixel-quantization
    budget; lower orders leave an approximation floor an order of
    magnitude above it.
    """

    poly_order: int = 21
    ridge_lambda: float = 1e-4
    c_cutin: float = 0.15
    c_rated: float = 0.85
    bisection_tol: float = 1e-6
    nrm_tol: float = 1e-10
    nrm_max_iter: int = 100
    fallback_grid_points: int = 1001
    max_skip_fraction: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.c_cutin < self.c_rated < 1.0):
            raise ValueError("need 0 < c_cutin < c_rated < 1")
        if self.poly_order < 3:
            raise ValueError("polynomial order must be >= 3")
        if self.ridge_lambda < 0:
            raise ValueError("ridge penalty must be non-negative")


def pixel_map(img: WpcImage, cfg: RasterConfig, max_skip_fraction: float = 0.1):
    """Trace the darkest pixel per valid column back to data coordinates.

    For each column the row is the mean of all row indices attaining the
    column's minimum intensity (ties averaged). Columns with no pixel
    darker than the background are skipped with a warning; if more than
    ``max_skip_fraction`` of columns skip, the image is declared too faint.

    Returns (x, y) arrays with x strictly increasing.
    """
    grey = to_greyscale(img)
    window = grey[cfg.y_lo : cfg.y_hi + 1, cfg.x_lo : cfg.x_hi + 1]
    n_cols = cfg.n_columns
    xs, ys = [], []
    skipped = 0
    for i in range(n_cols):
        column = window[:, i]
        lowest = column.min()
        if lowest >= 1.0 - 1e-9:
            skipped += 1
            continue
        row = float(np.mean(np.flatnonzero(column == lowest))) + cfg.y_lo
        xs.append(i / (cfg.x_hi - cfg.x_lo))
        ys.append(1.0 - (row - cfg.y_lo) / (cfg.y_hi - cfg.y_lo))
    if skipped > max_skip_fraction * n_cols:
        raise ExtractionFailure(
            f"{skipped}/{n_cols} columns have no trace; generated image too faint"
        )
    if skipped:
        warnings.warn(f"pixel_map skipped {skipped} all-white columns", stacklevel=2)
    return np.asarray(xs), np.asarray(ys)


def fit_polynomial(x, y, cfg: ExtractionConfig) -> np.ndarray:
    """Ridge-regularized least-squares polynomial fit.

    Solves min ||f_p(x) - y||^2 + lambda ||c||^2 with the penalty taken on
    the coefficients of an orthogonal (Chebyshev) fitting basis: the raw
    monomial Vandermonde is numerically singular beyond order ~18, so both
    the solve and the penalty live in the stable basis, and the result is
    converted back. Returns monomial coefficients a_0..a_n, low order
    first, with f_p(x) = sum a_i x^i.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n_coeff = cfg.poly_order + 1
    if len(x) < n_coeff:
        raise ValueError(f"need at least {n_coeff} points for order {cfg.poly_order}")
    basis = np.polynomial.chebyshev.chebvander(2.0 * x - 1.0, cfg.poly_order)
    if cfg.ridge_lambda > 0:
        a = np.vstack([basis, np.sqrt(cfg.ridge_lambda) * np.eye(n_coeff)])
        b = np.concatenate([y, np.zeros(n_coeff)])
        c, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    else:
        c, _, rank, _ = np.linalg.lstsq(basis, y, rcond=None)
        if rank < n_coeff:
            raise NumericalRankError(
                f"design matrix rank {rank} < {n_coeff}; "
                "degenerate x values -- use ridge_lambda > 0"
            )
    cheb = np.polynomial.Chebyshev(c, domain=[0.0, 1.0], window=[-1.0, 1.0])
    coeffs = cheb.convert(kind=np.polynomial.Polynomial).coef
    if len(coeffs) < n_coeff:
        coeffs = np.pad(coeffs, (0, n_coeff - len(coeffs)))
    return coeffs


def bisection(g, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Bracketed bisection: shrink [lo, hi] to width <= tol, return midpoint."""
    g_lo = g(lo)
    g_hi = g(hi)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if g_lo * g_hi > 0:
        raise NoSignChangeError(f"g({lo})={g_lo} and g({hi})={g_hi} have equal signs")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if g_mid == 0.0:
            return mid
        if g_lo * g_mid < 0:
            hi = mid
        else:
            lo, g_lo = mid, g_mid
    return 0.5 * (lo + hi)


def find_bracket(g, lo: float, hi: float, n_scan: int = 1000):
    """First sign-change subinterval of g on [lo, hi], scanning from lo.

    Returns (a, b) or None when g never changes sign on the scan grid.
    """
    grid = np.linspace(lo, hi, n_scan + 1)
    values = np.asarray([g(t) for t in grid])
    signs = np.sign(values)
    for i in range(n_scan):
        if signs[i] == 0:
            return grid[i], grid[i]
        if signs[i] * signs[i + 1] < 0:
            return grid[i], grid[i + 1]
    if signs[-1] == 0:
        return grid[-1], grid[-1]
    return None


def newton_raphson(
    g,
    g_prime,
    x0: float,
    tol: float = 1e-10,
    max_iter: int = 100,
    bounds: tuple[float, float] | None = None,
):
    """Newton iteration x <- x - g(x)/g'(x) until |g(x)| <= tol.

    Returns (root, iteration count). Raises :class:`NonConvergenceError`
    on a near-zero derivative, on divergence within ``max_iter``, or when
    the converged root falls outside ``bounds`` (if given).
    """

    def _accept(x: float, n: int):
        if bounds is not None and not (bounds[0] <= x <= bounds[1]):
            raise NonConvergenceError(f"root {x} outside bounds {bounds}")
        return x, n

    x = float(x0)
    if abs(g(x)) <= tol:
        return _accept(x, 0)
    for n in range(1, max_iter + 1):
        d = g_prime(x)
        if not np.isfinite(d) or abs(d) < 1e-12:
            raise NonConvergenceError(f"derivative {d} near zero at x={x}")
        x = x - g(x) / d
        if not np.isfinite(x):
            raise NonConvergenceError("iterate diverged to non-finite value")
        if abs(g(x)) <= tol:
            return _accept(x, n)
    raise NonConvergenceError(f"no convergence in {max_iter} iterations")


def _stationary_point(poly_d, poly_dd, x_init: float, side: str, cfg: ExtractionConfig):
    """Root of the fitted polynomial's derivative on the side of x_init.

    Cut-in roots are sought in [0, x_init], rated roots in [x_init, 1];
    if Newton fails (or lands on the wrong side) fall back to the grid
    argmin of |f'_p| over that subinterval. Returns (root, method).
    """
    lo, hi = (0.0, x_init) if side == "cutin" else (x_init, 1.0)
    try:
        root, _ = newton_raphson(
            poly_d, poly_dd, x_init, cfg.nrm_tol, cfg.nrm_max_iter, bounds=(lo, hi)
        )
        return root, "nrm"
    except NonConvergenceError:
        grid = np.linspace(lo, hi, cfg.fallback_grid_points)
        return float(grid[np.argmin(np.abs(poly_d(grid)))]), "grid"


def domain_knowledge_correction(coeffs, cfg: ExtractionConfig, return_info: bool = False):
    """Clamp a fitted polynomial into the flat-tail / S-rise / flat-plateau form.

    Bisection on f_p - c (c = 0.15 for cut-in, 0.85 for rated) seeds a
    Newton search for the nearby zero of f'_p. When the polynomial never
    crosses a level (insufficient-data case) the corresponding boundary
    collapses to the domain edge: x_cutin = 0 or x_rated = 1.

    With ``return_info`` also returns how each boundary was decided:
    "nrm" (Newton converged), "grid" (argmin fallback), or "edge" (no
    level crossing).
    """
    poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    poly_d = poly.deriv()
    poly_dd = poly_d.deriv()
    n_scan = cfg.fallback_grid_points - 1
    info = {}

    bracket = find_bracket(lambda t: poly(t) - cfg.c_cutin, 0.0, 1.0, n_scan)
    if bracket is None:
        x_cutin, info["cutin"] = 0.0, "edge"
    else:
        x_init = bisection(lambda t: poly(t) - cfg.c_cutin, *bracket, cfg.bisection_tol)
        x_cutin, info["cutin"] = _stationary_point(poly_d, poly_dd, x_init, "cutin", cfg)

    bracket = find_bracket(lambda t: poly(t) - cfg.c_rated, 0.0, 1.0, n_scan)
    if bracket is None:
        x_rated, info["rated"] = 1.0, "edge"
    else:
        x_init = bisection(lambda t: poly(t) - cfg.c_rated, *bracket, cfg.bisection_tol)
        x_rated, info["rated"] = _stationary_point(poly_d, poly_dd, x_init, "rated", cfg)

    x_cutin = float(np.clip(x_cutin, 0.0, 1.0))
    x_rated = float(np.clip(x_rated, 0.0, 1.0))
    if x_cutin >= x_rated:
        # Degenerate fit; fall back to the widest valid segment.
        x_cutin, x_rated = 0.0, 1.0
        info["cutin"] = info["rated"] = "edge"
    pw = PiecewiseWpc.from_polynomial(coeffs, x_cutin, x_rated)
    return (pw, info) if return_info else pw


def extract(img: WpcImage, cfg_raster: RasterConfig, cfg: ExtractionConfig | None = None) -> PiecewiseWpc:
    """Full image-to-curve pipeline: pixel mapping, ridge fit, correction."""
    cfg = cfg or ExtractionConfig()
    xs, ys = pixel_map(img, cfg_raster, cfg.max_skip_fraction)
    coeffs = fit_polynomial(xs, ys, cfg)
    return domain_knowledge_correction(coeffs, cfg)
