"""Accuracy metrics and uncertainty-vs-error diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .gp import Predictions


def _pair(pred, truth, min_len=1):
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} targets")
    if p.size < min_len:
        raise ValueError(f"need at least {min_len} values")
    return p, t


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def r_squared(pred, truth) -> float:
    p, t = _pair(pred, truth, 2)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0:
        raise ValueError("r_squared undefined for constant truth")
    return 1.0 - float(np.sum((t - p) ** 2)) / ss_tot


def histogram_equalize(values) -> np.ndarray:
    """Rank-map to [0, 1]; ties get their group's mean rank."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 1:
        raise ValueError("need at least one value")
    if not np.all(np.isfinite(v)):
        raise ValueError("histogram_equalize requires finite values")
    if v.size == 1:
        return np.array([0.5])
    return (rankdata(v, method="average") - 1.0) / (v.size - 1)


def pearson(a, b) -> float | None:
    """Pearson correlation, or None when either side has zero variance."""
    a, b = _pair(a, b, 2)
    da = a - a.mean()
    db = b - b.mean()
    na, nb = np.sqrt(da @ da), np.sqrt(db @ db)
    if na == 0 or nb == 0:
        return None
    return float(np.clip((da @ db) / (na * nb), -1.0, 1.0))


def spearman(a, b) -> float | None:
    a, b = _pair(a, b, 2)
    return pearson(rankdata(a), rankdata(b))


@dataclass(frozen=True)
class EvalReport:
    mae: float
    r_squared: float | None
    corr_predvar_abserr: float | None
    corr_propvar_abserr: float | None
    corr_combined_abserr: float | None
    spearman_predvar_abserr: float | None
    spearman_propvar_abserr: float | None
    spearman_combined_abserr: float | None
    n_points: int

    def to_dict(self) -> dict:
        return asdict(self)


def error_map_report(results, truth, mask=None) -> EvalReport:
    """Accuracy plus correlation of each uncertainty channel with |error|.

    ``results`` is a Predictions batch or a list of PredictionResult. A
    boolean ``mask`` restricts every statistic to a subset of points.
    """
    pr = Predictions.from_results(results)
    truth = np.asarray(truth, dtype=np.float64)
    mean, _ = _pair(pr.mean, truth, 2)
    chans = {
        "predvar": pr.predictive_var,
        "propvar": pr.propagated_var if pr.propagated_var is not None else np.zeros_like(mean),
        "combined": pr.combined_var if pr.combined_var is not None else pr.predictive_var,
    }
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        mean, truth = mean[mask], truth[mask]
        chans = {k: v[mask] for k, v in chans.items()}
    abserr = np.abs(mean - truth)
    try:
        r2 = r_squared(mean, truth)
    except ValueError:
        r2 = None
    return EvalReport(
        mae=mae(mean, truth),
        r_squared=r2,
        corr_predvar_abserr=pearson(chans["predvar"], abserr),
        corr_propvar_abserr=pearson(chans["propvar"], abserr),
        corr_combined_abserr=pearson(chans["combined"], abserr),
        spearman_predvar_abserr=spearman(chans["predvar"], abserr),
        spearman_propvar_abserr=spearman(chans["propvar"], abserr),
        spearman_combined_abserr=spearman(chans["combined"], abserr),
        n_points=int(mean.size),
    )
