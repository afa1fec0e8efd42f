"""Number-variance curves and empirical DLR goodness-of-fit reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .conditional import GibbsModel
from .errors import DomainError, InsufficientDataError
from .inference import DLREvaluator, EstimatorConfig, resolve_bank, theta_low_for
from .patterns import Observation, PointPattern

#: replicates needed for a variance estimate
MIN_REPLICATES = 10


def ball_volume(r, d: int):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * np.asarray(r, dtype=float) ** d


@dataclass(frozen=True)
class VarianceCurve:
    radii: np.ndarray
    ratios: np.ndarray
    n_replicates: int
    standard_errors: np.ndarray
    exploratory: bool = False  # set in d >= 3

    def to_dict(self) -> dict:
        return {"radii": self.radii.tolist(), "ratios": self.ratios.tolist(),
                "standard_errors": self.standard_errors.tolist(),
                "n_replicates": self.n_replicates, "exploratory": self.exploratory}


def ball_counts(patterns, radii, center=None) -> np.ndarray:
    """Counts ``N(B(center, r))``, shape ``(K, len(radii))``."""
    radii = np.asarray(radii, dtype=float)
    out = np.zeros((len(patterns), len(radii)), dtype=np.int64)
    for k, pat in enumerate(patterns):
        pts = pat.points if isinstance(pat, (PointPattern, Observation)) else np.asarray(pat)
        c = np.zeros(pts.shape[1]) if center is None else np.asarray(center, dtype=float)
        dist = np.sort(np.linalg.norm(pts - c, axis=1))
        out[k] = np.searchsorted(dist, radii, side="right")
    return out


def variance_curve(patterns, radii, center=None) -> VarianceCurve:
    """``Var N(B(0, r)) / |B(0, r)|`` across replicates.

    Standard errors use ``Var(s^2) = 2 sigma^4 / (K - 1)`` (normal counts).
    """
    radii = np.asarray(radii, dtype=float)
    K = len(patterns)
    if K < MIN_REPLICATES:
        raise InsufficientDataError(
            f"a variance curve needs at least {MIN_REPLICATES} replicates, got {K}", K)
    if np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and increasing")
    d = None
    for pat in patterns:
        w = pat.window
        d = w.dimension
        c = np.zeros(d) if center is None else np.asarray(center, dtype=float)
        if np.any(c - radii[-1] < w.lo) or np.any(c + radii[-1] > w.hi):
            raise DomainError(f"ball of radius {radii[-1]} exceeds the window {w.to_dict()}")
    counts = ball_counts(patterns, radii, center)
    var = counts.var(axis=0, ddof=1)
    ratios = var / ball_volume(radii, d)
    se = ratios * math.sqrt(2.0 / (K - 1))
    return VarianceCurve(radii, ratios, K, se, exploratory=d >= 3)


def write_curve(curve: VarianceCurve, csv_path, json_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["r", "ratio", "se"])
        for r, q, s in zip(curve.radii, curve.ratios, curve.standard_errors):
            wr.writerow([repr(float(r)), repr(float(q)), repr(float(s))])
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(curve.to_dict(), fh, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# ergodic averages and residuals

def ergodic_averages(obs: Observation, gm: GibbsModel, theta, f="one",
                     cfg: EstimatorConfig | None = None, evaluator: DLREvaluator | None = None):
    """``(A, B)`` divided by ``|W|``: observed and expected sums of ``f``."""
    ev = evaluator or DLREvaluator(obs, gm, cfg, theta_low=theta_low_for(gm, theta))
    fs = resolve_bank(gm, [f])
    if len(fs) != 1:
        raise ValueError("ergodic_averages takes a single test function")
    a, b = ev.ab(theta, fs[0])
    return a / ev.volume, b / ev.volume


@dataclass(frozen=True)
class ResidualReport:
    names: tuple
    residuals: np.ndarray
    a_avg: np.ndarray
    b_avg: np.ndarray
    n_sites_used: int
    theta: tuple

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "n_sites_used": self.n_sites_used,
                "functions": [{"name": n, "residual": float(r), "a_avg": float(a),
                               "b_avg": float(b)}
                              for n, r, a, b in zip(self.names, self.residuals, self.a_avg,
                                                    self.b_avg)]}


def residual_report(obs: Observation, gm: GibbsModel, theta, bank=("one", "score"),
                    cfg: EstimatorConfig | None = None,
                    evaluator: DLREvaluator | None = None) -> ResidualReport:
    """Scaled DLR residual ``A - B`` with both averages, per bank member."""
    ev = evaluator or DLREvaluator(obs, gm, cfg, theta_low=theta_low_for(gm, theta))
    fs = resolve_bank(gm, bank)
    ab = np.array([ev.ab(theta, f) for f in fs]) / ev.volume
    return ResidualReport(tuple(f.name for f in fs), ab[:, 0] - ab[:, 1], ab[:, 0], ab[:, 1],
                          ev.n_sites, tuple(gm.theta(theta).to_list()))


def write_report(report: ResidualReport, csv_path, json_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["function", "residual", "a_avg", "b_avg"])
        for n, r, a, b in zip(report.names, report.residuals, report.a_avg, report.b_avg):
            wr.writerow([n, repr(float(r)), repr(float(a)), repr(float(b))])
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
