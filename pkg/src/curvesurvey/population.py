"""Finite populations of discretized curves.

A population holds ``N`` curves observed on a common time grid of ``d``
instants, optionally partitioned into strata labelled ``1..H``. Units are
addressed by 0-based row index throughout the Python API; stratum labels
keep the 1-based convention used in files and reports.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CsvParseError

# Synthetic populations cover one week, in hours.
WEEK_HOURS = 168.0
_N_FOURIER_MODES = 16


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing observation instants ``t_1 < ... < t_d``."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a time grid needs at least two points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("time grid contains non-finite values")
        if not np.all(np.diff(pts) > 0):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    @property
    def span(self) -> float:
        return float(self.points[-1] - self.points[0])

    @classmethod
    def uniform(cls, d: int, T: float = 1.0) -> "TimeGrid":
        return cls(np.linspace(0.0, T, d))


GridLike = Union[TimeGrid, Sequence[float], np.ndarray]


def _points(grid: GridLike) -> np.ndarray:
    if isinstance(grid, TimeGrid):
        return grid.points
    return TimeGrid(grid).points


@dataclass(frozen=True, eq=False)
class CurvePopulation:
    """``N`` curves on a shared grid, with optional 1-based stratum labels."""

    grid: TimeGrid
    values: np.ndarray
    strata: Optional[np.ndarray] = None
    unit_ids: Optional[tuple] = field(default=None)

    def __post_init__(self):
        grid = self.grid if isinstance(self.grid, TimeGrid) else TimeGrid(self.grid)
        object.__setattr__(self, "grid", grid)
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError("values must be an N x d matrix with N >= 1")
        if values.shape[1] != len(grid):
            raise ValueError(
                f"values have {values.shape[1]} columns but the grid has {len(grid)} points"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("population values must be finite")
        object.__setattr__(self, "values", values)

        if self.strata is not None:
            strata = np.asarray(self.strata)
            if strata.shape != (values.shape[0],):
                raise ValueError("one stratum label per unit is required")
            if not np.all(strata == np.round(strata)):
                raise ValueError("stratum labels must be integers")
            strata = _frozen(strata, dtype=np.int64)
            H = int(strata.max())
            if strata.min() < 1 or np.any(np.bincount(strata, minlength=H + 1)[1:] == 0):
                raise ValueError("stratum labels must cover 1..H with no empty stratum")
            object.__setattr__(self, "strata", strata)

        if self.unit_ids is None:
            ids = tuple(str(k + 1) for k in range(values.shape[0]))
        else:
            ids = tuple(str(u) for u in self.unit_ids)
            if len(ids) != values.shape[0]:
                raise ValueError("one unit id per row is required")
        object.__setattr__(self, "unit_ids", ids)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def H(self) -> int:
        return 1 if self.strata is None else int(self.strata.max())

    def stratum_sizes(self) -> np.ndarray:
        """Sizes ``N_h`` for ``h = 1..H`` (just ``[N]`` when unstratified)."""
        if self.strata is None:
            return np.array([self.N])
        return np.bincount(self.strata, minlength=self.H + 1)[1:]

    def with_strata(self, strata) -> "CurvePopulation":
        return CurvePopulation(self.grid, self.values, strata, self.unit_ids)

    def scaled(self, a: float, b: float = 0.0) -> "CurvePopulation":
        """Affine transform ``a * Y + b`` of every curve."""
        return CurvePopulation(self.grid, a * self.values + b, self.strata, self.unit_ids)


def interpolate(curve, grid: GridLike, t):
    """Piecewise-linear interpolant of ``curve`` at ``t``.

    ``curve`` may be a single row of length ``d`` or an ``(..., d)`` stack of
    rows; ``t`` a scalar or an array. Exact at grid points.
    """
    pts = _points(grid)
    curve = np.asarray(curve, dtype=float)
    if curve.shape[-1] != pts.size:
        raise ValueError(f"curve has length {curve.shape[-1]}, grid has {pts.size} points")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < pts[0]) or np.any(t_arr > pts[-1]) or np.any(np.isnan(t_arr)):
        raise ValueError(f"t outside the grid range [{pts[0]}, {pts[-1]}]")

    # cell i covers [t_i, t_{i+1}]; the right endpoint belongs to the last cell
    i = np.clip(np.searchsorted(pts, t_arr, side="right") - 1, 0, pts.size - 2)
    t0, t1 = pts[i], pts[i + 1]
    y0, y1 = curve[..., i], curve[..., i + 1]
    out = y0 + (y1 - y0) / (t1 - t0) * (t_arr - t0)
    # return grid values untouched, independent of rounding in the slope term
    out = np.where(t_arr == t0, y0, np.where(t_arr == t1, y1, out))
    if np.ndim(out) == 0:
        return float(out)
    return out


def trapezoid_integral(f, grid: GridLike):
    """Trapezoid rule over ``[t_1, t_d]``, along the last axis of ``f``."""
    pts = _points(grid)
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != pts.size:
        raise ValueError(f"f has length {f.shape[-1]}, grid has {pts.size} points")
    out = np.sum(np.diff(pts) * (f[..., 1:] + f[..., :-1]), axis=-1) / 2.0
    if np.ndim(out) == 0:
        return float(out)
    return out


def population_mean(pop: CurvePopulation) -> np.ndarray:
    """Mean trajectory of the whole population on its grid."""
    return pop.values.mean(axis=0)


def stratum_means(pop: CurvePopulation) -> np.ndarray:
    """``H x d`` matrix of within-stratum mean curves."""
    if pop.strata is None:
        return population_mean(pop)[None, :]
    return np.stack([pop.values[pop.strata == h].mean(axis=0) for h in range(1, pop.H + 1)])


# -- CSV -------------------------------------------------------------------


def _fmt(x) -> str:
    # shortest repr that round-trips exactly
    return repr(float(x))


def save_csv(pop: CurvePopulation, path) -> None:
    """Write ``pop`` in the population CSV format (bit-exact round trip)."""
    header = ["t"] + [_fmt(t) for t in pop.grid.points]
    if pop.strata is not None:
        header.append("stratum")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(pop.N):
            row = [pop.unit_ids[k]] + [_fmt(y) for y in pop.values[k]]
            if pop.strata is not None:
                row.append(str(int(pop.strata[k])))
            writer.writerow(row)


def _parse_float(text, line, what):
    try:
        x = float(text)
    except ValueError:
        raise CsvParseError(f"cannot parse {what} {text!r} as a number", line) from None
    if not math.isfinite(x):
        raise CsvParseError(f"non-finite {what} {text!r}", line)
    return x


def load_csv(path) -> CurvePopulation:
    """Read a population CSV written by :func:`save_csv` or by hand.

    Header ``t,<t_1>,...,<t_d>[,stratum]``, then one line per unit
    ``<unit_id>,<y_1>,...,<y_d>[,<stratum>]``.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file", 1) from None
        if not header or header[0].strip() != "t":
            raise CsvParseError("header must start with 't'", 1)
        has_strata = header[-1].strip() == "stratum"
        time_tokens = header[1:-1] if has_strata else header[1:]
        if len(time_tokens) < 2:
            raise CsvParseError("need at least two time points", 1)
        times = [_parse_float(tok, 1, "time point") for tok in time_tokens]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise CsvParseError("time points must be strictly increasing", 1)

        d = len(times)
        width = 1 + d + (1 if has_strata else 0)
        ids, rows, labels = [], [], []
        for fields in reader:
            line = reader.line_num
            if not fields or (len(fields) == 1 and not fields[0].strip()):
                continue
            if len(fields) != width:
                raise CsvParseError(f"expected {width} fields, found {len(fields)}", line)
            if any(not f.strip() for f in fields):
                raise CsvParseError("empty cell", line)
            ids.append(fields[0].strip())
            rows.append([_parse_float(f, line, "value") for f in fields[1 : 1 + d]])
            if has_strata:
                try:
                    lab = int(fields[-1])
                except ValueError:
                    raise CsvParseError(f"bad stratum label {fields[-1]!r}", line) from None
                if lab < 1:
                    raise CsvParseError("stratum labels start at 1", line)
                labels.append(lab)

    if not rows:
        raise CsvParseError("no data rows", 2)
    try:
        return CurvePopulation(
            TimeGrid(times),
            np.array(rows),
            np.array(labels) if has_strata else None,
            tuple(ids),
        )
    except ValueError as exc:
        raise CsvParseError(str(exc)) from exc


# -- synthetic populations -------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic load-curve generator.

    Curves span one week (``t`` in hours). Each unit gets a log-normal
    amplitude ``exp(amplitude_spread * z_k)`` and a multiplicative smooth
    perturbation whose correlation length is ``noise_smoothness`` hours.
    Strata are the ``H`` quantile bins of ``z_k``, so higher strata hold
    larger and more dispersed consumers.
    """

    N: int = 2000
    d: int = 48
    H: int = 4
    seed: int = 0
    amplitude_spread: float = 0.5
    noise_smoothness: float = 24.0
    noise_level: float = 0.3

    def __post_init__(self):
        if self.N < 1 or self.H < 1 or self.H > self.N:
            raise ValueError("need N >= H >= 1")
        if self.d < 2:
            raise ValueError("need d >= 2")
        if self.amplitude_spread < 0 or self.noise_level < 0:
            raise ValueError("amplitude_spread and noise_level must be nonnegative")
        if not self.noise_smoothness > 0:
            raise ValueError("noise_smoothness must be positive")


def load_profile(t) -> np.ndarray:
    """Shared daily/weekly consumption shape, strictly positive."""
    t = np.asarray(t, dtype=float)
    daily = 1.0 + 0.6 * np.sin(2 * np.pi * (t - 6.0) / 24.0)
    weekly = 0.8 + 0.2 * np.cos(2 * np.pi * (t - 60.0) / WEEK_HOURS)
    return daily * weekly


def _quantile_bins(scores, H):
    """Labels 1..H by rank of ``scores``; ties broken by unit index."""
    N = scores.size
    order = np.lexsort((np.arange(N), scores))
    labels = np.empty(N, dtype=np.int64)
    labels[order] = np.arange(N) * H // N + 1
    return labels


def generate_synthetic(spec: SyntheticSpec) -> CurvePopulation:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    grid = TimeGrid(np.linspace(0.0, WEEK_HOURS, spec.d))
    t = grid.points

    z = rng.standard_normal(spec.N)
    amplitude = np.exp(spec.amplitude_spread * z)

    # smooth unit-level perturbation: random Fourier features of a
    # squared-exponential kernel with length scale noise_smoothness
    M = _N_FOURIER_MODES
    omega = rng.standard_normal((spec.N, M)) / spec.noise_smoothness
    phase = rng.uniform(0.0, 2 * np.pi, (spec.N, M))
    weight = rng.standard_normal((spec.N, M))
    wiggle = np.sqrt(2.0 / M) * np.einsum(
        "km,kmj->kj", weight, np.cos(omega[:, :, None] * t[None, None, :] + phase[:, :, None])
    )

    s = spec.noise_level
    values = amplitude[:, None] * load_profile(t)[None, :] * np.exp(s * wiggle - s * s / 2)
    return CurvePopulation(grid, values, _quantile_bins(z, spec.H))


def stratify_by_max_level(pop: CurvePopulation, H: int, auxiliary=None) -> CurvePopulation:
    """Quantile strata of per-unit maximum level.

    Units are ranked by their maximum over ``auxiliary`` (an ``N``-row
    matrix, e.g. an earlier observation period) or over their own values,
    ties broken by unit index, then cut into ``H`` near-equal groups.
    Label 1 holds the lowest maxima.
    """
    H = int(H)
    if H < 1 or H > pop.N:
        raise ValueError(f"need 1 <= H <= N, got H={H}, N={pop.N}")
    source = pop.values if auxiliary is None else np.asarray(auxiliary, dtype=float)
    if source.ndim != 2 or source.shape[0] != pop.N:
        raise ValueError("auxiliary data must have one row per unit")
    return pop.with_strata(_quantile_bins(source.max(axis=1), H))


def estimate_holder_beta(pop: CurvePopulation) -> Optional[float]:
    """Smoothness exponent of mean-squared increments.

    Fits ``log m(L) = 2 beta log h(L) + c`` by least squares over dyadic index
    lags ``L = 1, 2, 4, 8`` (fewer on short grids), where ``m`` is the mean
    squared increment over units and positions and ``h`` the mean time lag. Returns ``None`` when every
    increment is zero (no smoothness constraint is binding).
    """
    if pop.d < 3:
        raise ValueError("need at least 3 grid points")
    max_lag = min(8, max(2, (pop.d - 1) // 4))
    lags = [1 << j for j in range(max_lag.bit_length()) if (1 << j) <= max_lag]
    t = pop.grid.points
    log_h, log_m = [], []
    for L in lags:
        inc = pop.values[:, L:] - pop.values[:, :-L]
        msq = float(np.mean(inc * inc))
        if msq == 0.0:
            return None
        log_h.append(math.log(float(np.mean(t[L:] - t[:-L]))))
        log_m.append(math.log(msq))
    slope = np.polyfit(log_h, log_m, 1)[0]
    return float(slope) / 2.0
