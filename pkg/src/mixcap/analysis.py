"""Threshold estimation from accuracy observations and scaling-law fitting.

The threshold estimator scans (popularity, correct) observations from the
most popular down, tracking suffix accuracy with a fault-tolerance budget,
and returns the popularity at which accuracy stops clearing the target. The
fitters are ordinary least squares on log-transformed coordinates for the
three curve families that show up around phase transitions:

    exponential  T(r) = A * exp(B / r)      via  ln T = ln A + B * (1/r)
    power law    T(r) = C * r**(-D)         via  ln T = ln C - D * ln r
    log-log      y    = exp(b) * x**m       via  ln y = b + m * ln x

All regressions use natural logarithms so recovered parameters are
base-unambiguous. Confidence intervals are standard t-based OLS intervals;
inversion of a fitted log-log law propagates uncertainty with the delta
method. Fitters are unit-agnostic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

__all__ = [
    "AccuracyObservation",
    "FitResult",
    "estimate_threshold_popularity",
    "fit_exponential",
    "fit_power_law",
    "fit_loglog",
    "loglog_predict",
    "invert_size",
    "r_squared",
    "read_observations_csv",
    "DEFAULT_ACCURACY_TARGET",
    "DEFAULT_MAX_FAILURES",
]

# Defaults for the threshold-popularity scan.
DEFAULT_ACCURACY_TARGET = 0.6
DEFAULT_MAX_FAILURES = 5

# Reference fits of required-training-steps T against mixing ratio r,
# recorded for comparison with newly fitted data (not reproduced here).
TRAINING_STEPS_EXPONENTIAL_REFERENCE = {
    "logA": -0.25512,
    "B": 1.5137,
    "r2": 0.9980,
}
TRAINING_STEPS_POWER_LAW_REFERENCE = {
    "C": 0.098158,
    "D": 3.83878,
    "r2": 0.9853,
}

# Reference model-size predictions (billions of parameters, with 95%
# intervals) from one external application of invert_size to popularity
# thresholds of four proprietary models; the underlying observations are
# not available, so these are documentation only.
SIZE_PREDICTION_REFERENCE = (
    {"estimate": 61.0, "ci95": (12.0, 314.0)},
    {"estimate": 514.0, "ci95": (80.0, 3315.0)},
    {"estimate": 226.0, "ci95": (39.0, 1313.0)},
    {"estimate": 24.0, "ci95": (5.0, 118.0)},
)


@dataclass(frozen=True)
class AccuracyObservation:
    """One (popularity, correct) data point."""

    popularity: float
    correct: bool

    def __post_init__(self):
        if not self.popularity > 0.0:
            raise ValueError(f"popularity must be > 0, got {self.popularity}")


@dataclass(frozen=True)
class FitResult:
    """Parameters and uncertainty of one least-squares fit.

    params/stderr/ci95 are keyed by parameter name: logA and B for the
    exponential model, logC and D for the power law, slope and intercept for
    a plain log-log line. Internal regression state (kept private) lets
    loglog_predict and invert_size propagate uncertainty.
    """

    model: str
    params: dict[str, float]
    r_squared: float
    stderr: dict[str, float]
    ci95: dict[str, tuple[float, float]]
    n: int
    _slope: float = field(repr=False, default=0.0)
    _intercept: float = field(repr=False, default=0.0)
    _u_mean: float = field(repr=False, default=0.0)
    _suu: float = field(repr=False, default=0.0)
    _resid_var: float = field(repr=False, default=0.0)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "params": dict(self.params),
            "stderr": dict(self.stderr),
            "ci95": {k: list(v) for k, v in self.ci95.items()},
            "r2": self.r_squared,
            "n": self.n,
        }


def estimate_threshold_popularity(
    obs: Sequence[AccuracyObservation],
    accuracy_target: float = DEFAULT_ACCURACY_TARGET,
    max_failures: int = DEFAULT_MAX_FAILURES,
) -> float:
    """Popularity below which accuracy no longer clears the target.

    Observations are sorted by popularity ascending, then scanned group by
    group from the highest popularity down (tied popularities form a single
    group). After absorbing each group the running suffix accuracy is
    compared with the target; each shortfall spends one unit of the failure
    budget, and the popularity of the group that exhausts it is returned.
    If the budget survives the whole scan, the smallest popularity is
    returned. The result is always a member of the input popularity multiset.
    """
    if len(obs) == 0:
        raise ValueError("observations must be non-empty")
    if not 0.0 < accuracy_target < 1.0:
        raise ValueError(f"accuracy_target must be in (0, 1), got {accuracy_target}")
    if max_failures < 1:
        raise ValueError(f"max_failures must be >= 1, got {max_failures}")
    x = [o.popularity for o in obs]
    y = [1 if o.correct else 0 for o in obs]
    index = sorted(range(len(x)), key=lambda i: x[i])
    sum_correct = 0
    failures = 0
    j = len(x) - 1
    while j >= 0:
        k = j
        while k >= 0 and x[index[k]] == x[index[j]]:
            k -= 1
        for l in range(k + 1, j + 1):
            sum_correct += y[index[l]]
        if sum_correct / (len(x) - k - 1) < accuracy_target:
            failures += 1
        if failures == max_failures:
            return x[index[j]]
        j = k
    return x[index[0]]


def _ols(u: np.ndarray, v: np.ndarray, model: str) -> tuple[float, float, dict]:
    """Least squares v = intercept + slope * u with standard OLS uncertainty."""
    n = len(u)
    u_mean = float(u.mean())
    v_mean = float(v.mean())
    du = u - u_mean
    suu = float(np.dot(du, du))
    if suu == 0.0:
        raise ValueError(f"{model} fit needs varying regressor values")
    slope = float(np.dot(du, v - v_mean) / suu)
    intercept = v_mean - slope * u_mean
    fitted = intercept + slope * u
    resid = v - fitted
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.dot(v - v_mean, v - v_mean))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    dof = n - 2
    resid_var = ss_res / dof if dof > 0 else 0.0
    se_slope = math.sqrt(resid_var / suu)
    se_intercept = math.sqrt(resid_var * (1.0 / n + u_mean**2 / suu))
    tq = float(stats.t.ppf(0.975, dof)) if dof > 0 else 0.0
    extras = {
        "se_slope": se_slope,
        "se_intercept": se_intercept,
        "tq": tq,
        "u_mean": u_mean,
        "suu": suu,
        "resid_var": resid_var,
        "r2": r2,
        "n": n,
    }
    return slope, intercept, extras


def _check_points(points, model: str) -> tuple[np.ndarray, np.ndarray]:
    pts = [(float(a), float(b)) for a, b in points]
    if len(pts) < 3:
        raise ValueError(f"{model} fit needs at least 3 points, got {len(pts)}")
    a = np.array([p[0] for p in pts])
    b = np.array([p[1] for p in pts])
    return a, b


def _constant_response(model: str, params0: dict, v0: float, n: int) -> FitResult:
    """Exact fit for a constant response: slope 0, intercept ln of the value."""
    names = list(params0)
    return FitResult(
        model=model,
        params=params0,
        r_squared=1.0,
        stderr={k: 0.0 for k in names},
        ci95={k: (params0[k], params0[k]) for k in names},
        n=n,
        _slope=0.0,
        _intercept=v0,
        _resid_var=0.0,
    )


def fit_exponential(points: Iterable[tuple[float, float]]) -> FitResult:
    """Fit T(r) = A * exp(B / r) by regressing ln T on 1/r.

    Returns params logA (natural log of A) and B. R-squared is computed on
    the transformed coordinates.
    """
    r, t = _check_points(points, "exponential")
    if np.any(t <= 0.0):
        raise ValueError("T values must be > 0")
    if np.any((r <= 0.0) | (r >= 1.0)):
        raise ValueError("r values must be in (0, 1)")
    lt = np.log(t)
    if np.all(lt == lt[0]):
        v0 = float(lt[0])
        return _constant_response("exponential", {"logA": v0, "B": 0.0}, v0, len(r))
    slope, intercept, ex = _ols(1.0 / r, lt, "exponential")
    return FitResult(
        model="exponential",
        params={"logA": intercept, "B": slope},
        r_squared=ex["r2"],
        stderr={"logA": ex["se_intercept"], "B": ex["se_slope"]},
        ci95={
            "logA": (
                intercept - ex["tq"] * ex["se_intercept"],
                intercept + ex["tq"] * ex["se_intercept"],
            ),
            "B": (slope - ex["tq"] * ex["se_slope"], slope + ex["tq"] * ex["se_slope"]),
        },
        n=ex["n"],
        _slope=slope,
        _intercept=intercept,
        _u_mean=ex["u_mean"],
        _suu=ex["suu"],
        _resid_var=ex["resid_var"],
    )


def fit_power_law(points: Iterable[tuple[float, float]]) -> FitResult:
    """Fit T(r) = C * r**(-D) by regressing ln T on ln r.

    D is reported with the sign convention that D > 0 means T decreases
    as r grows; params are logC (natural log of C) and D.
    """
    r, t = _check_points(points, "power_law")
    if np.any(t <= 0.0):
        raise ValueError("T values must be > 0")
    if np.any((r <= 0.0) | (r >= 1.0)):
        raise ValueError("r values must be in (0, 1)")
    lt = np.log(t)
    if np.all(lt == lt[0]):
        v0 = float(lt[0])
        return _constant_response("power_law", {"logC": v0, "D": 0.0}, v0, len(r))
    slope, intercept, ex = _ols(np.log(r), lt, "power_law")
    d = -slope
    return FitResult(
        model="power_law",
        params={"logC": intercept, "D": d},
        r_squared=ex["r2"],
        stderr={"logC": ex["se_intercept"], "D": ex["se_slope"]},
        ci95={
            "logC": (
                intercept - ex["tq"] * ex["se_intercept"],
                intercept + ex["tq"] * ex["se_intercept"],
            ),
            "D": (d - ex["tq"] * ex["se_slope"], d + ex["tq"] * ex["se_slope"]),
        },
        n=ex["n"],
        _slope=slope,
        _intercept=intercept,
        _u_mean=ex["u_mean"],
        _suu=ex["suu"],
        _resid_var=ex["resid_var"],
    )


def fit_loglog(points: Iterable[tuple[float, float]]) -> FitResult:
    """Fit ln y = intercept + slope * ln x with a 95% t-interval on the slope."""
    x, y = _check_points(points, "loglog")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("loglog fit needs strictly positive data")
    ly = np.log(y)
    if np.all(ly == ly[0]):
        v0 = float(ly[0])
        return _constant_response(
            "loglog", {"slope": 0.0, "intercept": v0}, v0, len(x)
        )
    slope, intercept, ex = _ols(np.log(x), ly, "loglog")
    return FitResult(
        model="loglog",
        params={"slope": slope, "intercept": intercept},
        r_squared=ex["r2"],
        stderr={"slope": ex["se_slope"], "intercept": ex["se_intercept"]},
        ci95={
            "slope": (
                slope - ex["tq"] * ex["se_slope"],
                slope + ex["tq"] * ex["se_slope"],
            ),
            "intercept": (
                intercept - ex["tq"] * ex["se_intercept"],
                intercept + ex["tq"] * ex["se_intercept"],
            ),
        },
        n=ex["n"],
        _slope=slope,
        _intercept=intercept,
        _u_mean=ex["u_mean"],
        _suu=ex["suu"],
        _resid_var=ex["resid_var"],
    )


def loglog_predict(fit: FitResult, x: float) -> tuple[float, tuple[float, float]]:
    """Point prediction and 95% prediction interval for y at a new x."""
    if fit.model != "loglog":
        raise ValueError(f"prediction needs a loglog fit, got {fit.model}")
    if x <= 0.0:
        raise ValueError(f"x must be > 0, got {x}")
    lx = math.log(x)
    mean = fit._intercept + fit._slope * lx
    if fit._suu == 0.0:
        return math.exp(mean), (math.exp(mean), math.exp(mean))
    var = fit._resid_var * (
        1.0 + 1.0 / fit.n + (lx - fit._u_mean) ** 2 / fit._suu
    )
    tq = float(stats.t.ppf(0.975, fit.n - 2))
    half = tq * math.sqrt(var)
    return math.exp(mean), (math.exp(mean - half), math.exp(mean + half))


def invert_size(fit: FitResult, threshold_popularity: float) -> tuple[float, tuple[float, float]]:
    """Solve a fitted log-log law for x at a given y.

    ln x = (ln y - intercept) / slope; the 95% interval propagates the
    slope/intercept covariance through that expression with the delta method.
    """
    if fit.model != "loglog":
        raise ValueError(f"inversion needs a loglog fit, got {fit.model}")
    if threshold_popularity <= 0.0:
        raise ValueError(
            f"threshold_popularity must be > 0, got {threshold_popularity}"
        )
    m, b = fit._slope, fit._intercept
    if m == 0.0:
        raise ValueError("cannot invert a fit with zero slope")
    lx = (math.log(threshold_popularity) - b) / m
    if fit._suu == 0.0 or fit._resid_var == 0.0:
        return math.exp(lx), (math.exp(lx), math.exp(lx))
    var_m = fit._resid_var / fit._suu
    var_b = fit._resid_var * (1.0 / fit.n + fit._u_mean**2 / fit._suu)
    cov_mb = -fit._resid_var * fit._u_mean / fit._suu
    # Gradient of (ln y - b)/m with respect to (m, b).
    gm = -lx / m
    gb = -1.0 / m
    var = gm * gm * var_m + gb * gb * var_b + 2.0 * gm * gb * cov_mb
    tq = float(stats.t.ppf(0.975, fit.n - 2))
    half = tq * math.sqrt(max(var, 0.0))
    return math.exp(lx), (math.exp(lx - half), math.exp(lx + half))


def r_squared(observed: Sequence[float], fitted: Sequence[float]) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot.

    A perfect fit of constant data (both sums zero) returns 1; constant data
    with a non-matching fit returns 0.
    """
    if len(observed) != len(fitted):
        raise ValueError(
            f"length mismatch: {len(observed)} observed vs {len(fitted)} fitted"
        )
    if len(observed) < 2:
        raise ValueError("need at least 2 values")
    obs = np.asarray(observed, dtype=float)
    fit = np.asarray(fitted, dtype=float)
    ss_res = float(np.sum((obs - fit) ** 2))
    ss_tot = float(np.sum((obs - obs.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def read_observations_csv(path) -> list[AccuracyObservation]:
    """Read observations from a CSV with header ``popularity,correct``."""
    observations = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"popularity", "correct"} <= set(
            reader.fieldnames
        ):
            raise ValueError("observation CSV needs a 'popularity,correct' header")
        for row in reader:
            correct = row["correct"].strip()
            if correct not in ("0", "1"):
                raise ValueError(f"correct must be 0 or 1, got {correct!r}")
            observations.append(
                AccuracyObservation(
                    popularity=float(row["popularity"]), correct=correct == "1"
                )
            )
    return observations
