"""Ground-truth wind power curve families and the piecewise extracted form.

Two S-shape families over normalized wind speed x in [0, 1]:

* DE  (double exponential):           f(x) = exp(-t1 * exp(t2 * x))
* ADE (adjusted double exponential):  f(x) = exp(-exp(a0 - a1*x - a2*x^2 - a3*x^3))

Both map into (0, 1) and, for the sampled parameter ranges, are monotone
non-decreasing. The :class:`PiecewiseWpc` type is the constrained output of
curve extraction: a polynomial on [x_cutin, x_rated] with flat plateaus
outside that interval.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Parameter sampling ranges for the DE family.
DE_T1_RANGE = (10.0, 50.0)
DE_T2_RANGE = (-15.0, -8.0)

# ADE: a0 and a3 are fixed; a1/a2 are sampled and the instance is
# rejection-tested against the shape-validity check below.
ADE_A0 = 5.0
ADE_A3 = 15.0
ADE_A1_RANGE = (-5.0, 25.0)
ADE_A2_RANGE = (-15.0, 10.0)

SHAPE_GRID_POINTS = 512
SHAPE_MAX_AT_ZERO = 0.05
SHAPE_MIN_AT_ONE = 0.95
MAX_SAMPLE_REJECTS = 1000


class SamplingError(RuntimeError):
    """Raised when rejection sampling cannot produce a valid curve."""


def _check_domain(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("normalized wind speed must lie in [0, 1]")
    return x


def _match_input(out: np.ndarray, x: np.ndarray):
    return float(out) if x.ndim == 0 else out


def de_value(x, t1: float, t2: float):
    return np.exp(-t1 * np.exp(t2 * x))


def de_slope(x, t1: float, t2: float):
    # d/dx exp(-t1 e^{t2 x}) = -t1*t2*e^{t2 x} * f(x); positive for t1>0, t2<0.
    return -t1 * t2 * np.exp(t2 * x) * de_value(x, t1, t2)


def ade_value(x, a0: float, a1: float, a2: float, a3: float):
    g = a0 - a1 * x - a2 * x**2 - a3 * x**3
    return np.exp(-np.exp(np.minimum(g, 700.0)))


def ade_slope(x, a0: float, a1: float, a2: float, a3: float):
    g = a0 - a1 * x - a2 * x**2 - a3 * x**3
    g_prime = -(a1 + 2.0 * a2 * x + 3.0 * a3 * x**2)
    return -np.exp(np.minimum(g, 700.0)) * g_prime * ade_value(x, a0, a1, a2, a3)


@dataclass(frozen=True)
class WpcFunction:
    """A ground-truth S-shape curve: family name plus parameter vector.

    DE params are (t1, t2); ADE params are (a0, a1, a2, a3). Evaluation and
    the analytic derivative accept scalars or arrays with x in [0, 1].
    """

    family: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.family == "DE":
            if len(self.params) != 2:
                raise ValueError("DE takes exactly (t1, t2)")
            t1, t2 = self.params
            if not (DE_T1_RANGE[0] <= t1 <= DE_T1_RANGE[1]):
                raise ValueError(f"t1={t1} outside {DE_T1_RANGE}")
            if not (DE_T2_RANGE[0] <= t2 <= DE_T2_RANGE[1]):
                raise ValueError(f"t2={t2} outside {DE_T2_RANGE}")
        elif self.family == "ADE":
            if len(self.params) != 4:
                raise ValueError("ADE takes exactly (a0, a1, a2, a3)")
            a0, _, _, a3 = self.params
            if a0 != ADE_A0 or a3 != ADE_A3:
                raise ValueError(f"ADE fixes a0={ADE_A0}, a3={ADE_A3}")
        else:
            raise ValueError(f"unknown family {self.family!r}")
        if not np.all(np.isfinite(self.params)):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def __call__(self, x):
        x = _check_domain(x)
        if self.family == "DE":
            return _match_input(de_value(x, *self.params), x)
        return _match_input(ade_value(x, *self.params), x)

    def derivative(self, x):
        x = _check_domain(x)
        if self.family == "DE":
            return _match_input(de_slope(x, *self.params), x)
        return _match_input(ade_slope(x, *self.params), x)

    def to_record(self) -> dict:
        return {"family": self.family, "params": list(self.params)}

    @classmethod
    def from_record(cls, record: dict) -> "WpcFunction":
        return cls(family=record["family"], params=tuple(record["params"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "WpcFunction":
        return cls.from_record(json.loads(Path(path).read_text()))


def eval_wpc_function(f: WpcFunction, x):
    """Closed-form evaluation of a curve family; value lies in (0, 1)."""
    return f(x)


def wpc_derivative(f: WpcFunction, x):
    """Analytic first derivative of the curve family."""
    return f.derivative(x)


def is_valid_shape(f: WpcFunction) -> bool:
    """Shape-validity check used by rejection sampling.

    Monotone non-decreasing on a 512-point grid, near-zero at x=0 and
    near-rated at x=1.
    """
    grid = np.linspace(0.0, 1.0, SHAPE_GRID_POINTS)
    y = f(grid)
    return bool(
        np.all(np.diff(y) >= 0.0)
        and y[0] <= SHAPE_MAX_AT_ZERO
        and y[-1] >= SHAPE_MIN_AT_ONE
    )


def sample_wpc_function(rng: np.random.Generator) -> WpcFunction:
    """Draw a random ground-truth curve, family chosen 50/50.

    DE draws are valid by construction. ADE draws are rejection-sampled
    against :func:`is_valid_shape`; raises :class:`SamplingError` after
    1000 rejections (a symptom of mis-set parameter ranges).
    """
    if rng.uniform() < 0.5:
        t1 = rng.uniform(*DE_T1_RANGE)
        t2 = rng.uniform(*DE_T2_RANGE)
        return WpcFunction("DE", (t1, t2))
    for _ in range(MAX_SAMPLE_REJECTS):
        a1 = rng.uniform(*ADE_A1_RANGE)
        a2 = rng.uniform(*ADE_A2_RANGE)
        f = WpcFunction("ADE", (ADE_A0, a1, a2, ADE_A3))
        if is_valid_shape(f):
            return f
    raise SamplingError(
        f"no valid ADE shape after {MAX_SAMPLE_REJECTS} rejections; "
        "parameter ranges are likely mis-set"
    )


@dataclass(frozen=True)
class PiecewiseWpc:
    """Extracted curve: polynomial core with flat plateaus outside it.

    ``coeffs`` are polynomial coefficients a_0..a_n (low order first).
    Evaluation returns p_cutin below x_cutin, the polynomial on
    [x_cutin, x_rated), and p_rated from x_rated on; both plateau values
    equal the boundary polynomial values, so the curve is continuous.
    """

    coeffs: tuple[float, ...]
    x_cutin: float
    x_rated: float
    p_cutin: float
    p_rated: float

    def __post_init__(self):
        if not (0.0 <= self.x_cutin < self.x_rated <= 1.0):
            raise ValueError(
                f"need 0 <= x_cutin < x_rated <= 1, got "
                f"({self.x_cutin}, {self.x_rated})"
            )
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @classmethod
    def from_polynomial(cls, coeffs, x_cutin: float, x_rated: float) -> "PiecewiseWpc":
        coeffs = tuple(float(c) for c in np.asarray(coeffs, dtype=float))
        poly = np.polynomial.Polynomial(coeffs)
        return cls(
            coeffs=coeffs,
            x_cutin=float(x_cutin),
            x_rated=float(x_rated),
            p_cutin=float(np.clip(poly(x_cutin), 0.0, 1.0)),
            p_rated=float(np.clip(poly(x_rated), 0.0, 1.0)),
        )

    def __call__(self, x):
        x = _check_domain(x)
        core = np.polynomial.polynomial.polyval(x, np.asarray(self.coeffs))
        out = np.where(x < self.x_cutin, self.p_cutin, core)
        out = np.where(x >= self.x_rated, self.p_rated, out)
        # Normalized power cannot leave the unit interval; fitted
        # polynomials occasionally overshoot it slightly.
        return _match_input(np.clip(out, 0.0, 1.0), x)

    def to_record(self) -> dict:
        return {
            "coeffs": list(self.coeffs),
            "x_cutin": self.x_cutin,
            "x_rated": self.x_rated,
            "p_cutin": self.p_cutin,
            "p_rated": self.p_rated,
        }

    @classmethod
    def from_record(cls, record: dict) -> "PiecewiseWpc":
        return cls(
            coeffs=tuple(record["coeffs"]),
            x_cutin=float(record["x_cutin"]),
            x_rated=float(record["x_rated"]),
            p_cutin=float(record["p_cutin"]),
            p_rated=float(record["p_rated"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_record(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "PiecewiseWpc":
        return cls.from_record(json.loads(Path(path).read_text()))


def eval_piecewise(f: PiecewiseWpc, x):
    """Evaluate the piecewise extracted curve (plateau / polynomial / plateau)."""
    return f(x)
