"""Deterministic rasterization of scatter sets and curves into fixed-size images.

The pixel frame follows a fixed convention: data coordinates (x, y) in the
unit square map into a valid pixel window (columns ``x_lo..x_hi``, rows
``y_lo..y_hi``) inside a white canvas; y grows upward in data space and
downward in pixel space. All marks are crisp black (no anti-aliasing), so
rendering is bit-exact and repeatable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

BLACK = 0.0
WHITE = 1.0


@dataclass(frozen=True)
class RasterConfig:
    """Pixel frame geometry plus marker/line drawing constants.

    ``r_s`` (the validated row resolution, ``y_hi - y_lo + 1``) is 197 for
    the default frame. ``marker_size`` is in plot-area units: the drawn disk
    radius is ``max(1, round(marker_size * pixel_scale / 2))`` pixels, so
    marker area stays proportional to ``marker_size**2`` and test-time
    sizing can follow the density-matching law in
    :func:`marker_size_for_test`. ``scaled`` produces a frame with all
    geometry multiplied by a factor; stroke width (``line_width``) is an
    independent constant and is not scaled.
    """

    width: int = 256
    height: int = 256
    x_lo: int = 32
    x_hi: int = 229
    y_lo: int = 31
    y_hi: int = 227
    marker_size: float = 6.0
    line_width: int = 2
    k_coeff: float = 0.07
    n_dit: int = 1400
    pixel_scale: float = 1.0

    def __post_init__(self):
        if not (0 <= self.x_lo < self.x_hi < self.width):
            raise ValueError("x pixel range must lie inside image bounds")
        if not (0 <= self.y_lo < self.y_hi < self.height):
            raise ValueError("y pixel range must lie inside image bounds")
        if self.line_width < 1:
            raise ValueError("line_width must be >= 1")
        if self.k_coeff <= 0:
            raise ValueError("K must be positive")

    @property
    def n_columns(self) -> int:
        return self.x_hi - self.x_lo + 1

    @property
    def r_s(self) -> int:
        return self.y_hi - self.y_lo + 1

    @property
    def marker_radius_px(self) -> int:
        return max(1, int(np.floor(self.marker_size * self.pixel_scale / 2.0 + 0.5)))

    def scaled(self, factor: float) -> "RasterConfig":
        """Frame with all geometry constants multiplied by ``factor``."""
        return replace(
            self,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
            x_lo=int(round(self.x_lo * factor)),
            x_hi=int(round(self.x_hi * factor)),
            y_lo=int(round(self.y_lo * factor)),
            y_hi=int(round(self.y_hi * factor)),
            pixel_scale=self.pixel_scale * factor,
        )


# Desk-scale frame used by the reduced training profile and CI tests.
DESK_SCALE = 0.25


def desk_raster_config() -> RasterConfig:
    return RasterConfig().scaled(DESK_SCALE)


@dataclass
class WpcImage:
    """A rendered image: float pixels in [0, 1], shape (H, W, 3), plus a role tag.

    Roles: ``scada_wpc`` (rasterized scatter), ``neat_wpc`` (rendered clean
    curve), ``generated`` (network output), ``overlay`` (diagnostic figure).
    """

    pixels: np.ndarray
    role: str = "scada_wpc"

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError("pixels must have shape (H, W, 3)")

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    def greyscale(self) -> np.ndarray:
        return to_greyscale(self)

    def save_png(self, path) -> None:
        arr = np.clip(self.pixels * 255.0 + 0.5, 0, 255).astype(np.uint8)
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")

    @classmethod
    def load_png(cls, path, role: str = "scada_wpc") -> "WpcImage":
        arr = np.asarray(Image.open(path).convert("RGB"), dtype=float) / 255.0
        return cls(pixels=arr, role=role)


def _round_half_up(v):
    """Round to nearest integer with .5 rounding up (not banker's rounding)."""
    return np.floor(np.asarray(v, dtype=float) + 0.5).astype(int)


def data_to_pixel(x, y, cfg: RasterConfig):
    """Map data coordinates in [0,1]^2 to integer (column, row) pixel centers."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((x < 0) | (x > 1) | (y < 0) | (y > 1)):
        raise ValueError("data coordinates must lie in the unit square")
    col = _round_half_up(cfg.x_lo + x * (cfg.x_hi - cfg.x_lo))
    row = _round_half_up(cfg.y_lo + (1.0 - y) * (cfg.y_hi - cfg.y_lo))
    if x.ndim == 0:
        return int(col), int(row)
    return col, row


def pixel_to_data(col, row, cfg: RasterConfig):
    """Inverse of :func:`data_to_pixel` on pixel centers."""
    col = np.asarray(col, dtype=float)
    row = np.asarray(row, dtype=float)
    x = (col - cfg.x_lo) / (cfg.x_hi - cfg.x_lo)
    y = 1.0 - (row - cfg.y_lo) / (cfg.y_hi - cfg.y_lo)
    if col.ndim == 0:
        return float(x), float(y)
    return x, y


def _disk_offsets(radius: int) -> tuple[np.ndarray, np.ndarray]:
    span = np.arange(-radius, radius + 1)
    dr, dc = np.meshgrid(span, span, indexing="ij")
    inside = dr**2 + dc**2 <= radius**2
    return dr[inside], dc[inside]


def blank_canvas(cfg: RasterConfig) -> np.ndarray:
    return np.full((cfg.height, cfg.width, 3), WHITE, dtype=float)


def render_scatter(scatter, cfg: RasterConfig, marker_size: float | None = None) -> WpcImage:
    """Render labeled or plain scatter points as filled black disks.

    ``scatter`` is anything exposing ``x`` and ``y`` arrays (a ScatterSet)
    or a tuple of arrays. Overlapping disks overwrite idempotently.
    """
    if isinstance(scatter, tuple):
        xs, ys = scatter
    else:
        xs, ys = scatter.x, scatter.y
    ms = cfg.marker_size if marker_size is None else marker_size
    radius = max(1, int(np.floor(ms * cfg.pixel_scale / 2.0 + 0.5)))
    canvas = blank_canvas(cfg)
    if len(np.atleast_1d(xs)) > 0:
        cols, rows = data_to_pixel(np.atleast_1d(xs), np.atleast_1d(ys), cfg)
        dr, dc = _disk_offsets(radius)
        all_rows = (rows[:, None] + dr[None, :]).ravel()
        all_cols = (cols[:, None] + dc[None, :]).ravel()
        keep = (
            (all_rows >= 0)
            & (all_rows < cfg.height)
            & (all_cols >= 0)
            & (all_cols < cfg.width)
        )
        canvas[all_rows[keep], all_cols[keep], :] = BLACK
    return WpcImage(pixels=canvas, role="scada_wpc")


def render_curve(curve, cfg: RasterConfig) -> WpcImage:
    """Render a curve as a connected black polyline across all valid columns.

    The curve is sampled at every valid column's data-x value. Each column
    paints the vertical span between the midpoints to its neighbors
    (guaranteeing 4-connectivity), thickened symmetrically to
    ``line_width`` pixels.
    """
    n_cols = cfg.n_columns
    xs = np.arange(n_cols) / (cfg.x_hi - cfg.x_lo)
    ys = np.asarray(curve(xs), dtype=float)
    rows = cfg.y_lo + (1.0 - ys) * (cfg.y_hi - cfg.y_lo)

    mid_left = np.empty(n_cols)
    mid_right = np.empty(n_cols)
    mid_left[0] = rows[0]
    mid_left[1:] = 0.5 * (rows[:-1] + rows[1:])
    mid_right[-1] = rows[-1]
    mid_right[:-1] = 0.5 * (rows[:-1] + rows[1:])

    span_lo = np.minimum(np.minimum(mid_left, mid_right), rows)
    span_hi = np.maximum(np.maximum(mid_left, mid_right), rows)
    half = (cfg.line_width - 1) / 2.0
    top = _round_half_up(span_lo - half)
    bot = _round_half_up(span_hi + half)

    canvas = blank_canvas(cfg)
    for i in range(n_cols):
        r0 = max(0, top[i])
        r1 = min(cfg.height - 1, bot[i])
        canvas[r0 : r1 + 1, cfg.x_lo + i, :] = BLACK
    return WpcImage(pixels=canvas, role="neat_wpc")


def marker_size_for_test(n_data: int, cfg: RasterConfig) -> float:
    """Marker size for observed data such that total marker area matches
    the synthesized-training density: K * MS_dit^2 * n_dit = MS^2 * n_data.
    """
    if n_data < 1:
        raise ValueError("n_data must be >= 1")
    return float(np.sqrt(cfg.k_coeff * cfg.n_dit * cfg.marker_size**2 / n_data))


def to_greyscale(img: WpcImage) -> np.ndarray:
    """Unweighted per-pixel channel mean, shape (H, W)."""
    return img.pixels.mean(axis=2)


def render_overlay(scatter, curve, cfg: RasterConfig, marker_size: float | None = None) -> WpcImage:
    """Scatter in black with the curve drawn over it in red."""
    base = render_scatter(scatter, cfg, marker_size=marker_size).pixels
    curve_px = render_curve(curve, cfg).pixels
    mask = curve_px[:, :, 0] == BLACK
    base[mask] = (1.0, 0.0, 0.0)
    return WpcImage(pixels=base, role="overlay")
