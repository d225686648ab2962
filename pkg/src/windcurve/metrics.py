"""Evaluation metrics for fitted power curves.

RMSE / MAE / MAPE / WMAPE plus the alpha-shooting score (the percentage of
predictions within an absolute error of alpha). MAPE is restricted to
points with wind speed above the cut-in speed and skips any remaining
zero targets instead of dividing by them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_ALPHAS = (0.05, 0.10, 0.15)


@dataclass(frozen=True)
class MetricReport:
    """Metric values for one (model, scenario, dataset) cell.

    ``mape_pct`` is None when the cut-in filter leaves no usable points.
    ``n_points_mape`` counts the points actually used in the MAPE.
    """

    rmse: float
    mae: float
    mape_pct: float | None
    wmape_pct: float | None
    alpha_ss_pct: dict[float, float] = field(default_factory=dict)
    n_points: int = 0
    n_points_mape: int = 0

    def to_row(self) -> dict:
        row = {
            "rmse": self.rmse,
            "mae": self.mae,
            "mape_pct": self.mape_pct,
            "wmape_pct": self.wmape_pct,
            "n_points": self.n_points,
            "n_points_mape": self.n_points_mape,
        }
        for alpha in sorted(self.alpha_ss_pct):
            row[f"ss_{alpha:g}_pct"] = self.alpha_ss_pct[alpha]
        return row


def evaluate(pred, truth, wind_speed, cws: float = 0.0, alphas=DEFAULT_ALPHAS) -> MetricReport:
    """Score predictions against observed power at the given wind speeds.

    ``cws`` is the cut-in wind speed used to filter the MAPE; all other
    metrics run over every point.
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    wind_speed = np.asarray(wind_speed, dtype=float)
    if not (len(pred) == len(truth) == len(wind_speed)):
        raise ValueError("pred, truth and wind_speed must have equal length")
    if len(pred) == 0:
        raise ValueError("cannot evaluate zero points")

    err = pred - truth
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))

    mape_mask = (wind_speed > cws) & (truth != 0.0)
    n_mape = int(np.sum(mape_mask))
    if n_mape == 0:
        mape_pct = None
    else:
        mape_pct = float(100.0 * np.mean(np.abs(err[mape_mask] / truth[mape_mask])))

    denom = np.sum(np.abs(truth))
    wmape_pct = float(100.0 * np.sum(np.abs(err)) / denom) if denom > 0 else None

    alpha_ss = {
        float(a): float(100.0 * np.mean(np.abs(err) <= a)) for a in alphas
    }
    return MetricReport(
        rmse=rmse,
        mae=mae,
        mape_pct=mape_pct,
        wmape_pct=wmape_pct,
        alpha_ss_pct=alpha_ss,
        n_points=len(pred),
        n_points_mape=n_mape,
    )
