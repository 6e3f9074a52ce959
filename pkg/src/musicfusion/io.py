"""File formats: likelihood-map CSV, covariance exchange text, reports and trial logs.

All numbers are written with ``repr`` so they round-trip exactly and never
depend on the locale.  Comment lines (``#``) carry the scenario digest and
seed for auditability and are skipped on import.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .experiment import ExperimentReport, TrialResult
from .fusion import LikelihoodMap, SearchGrid
from .subspace import CovarianceSet


class FormatError(ValueError):
    pass


def _meta_lines(**meta) -> list[str]:
    return [f"# {k}={v}" for k, v in meta.items() if v is not None]


def _read_meta(lines: Iterable[str]) -> tuple[dict[str, str], list[str]]:
    meta, body = {}, []
    for line in lines:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            body.append(line)
    return meta, body


def _fmt(v: float) -> str:
    return repr(float(v))


# -- likelihood maps ----------------------------------------------------------

def export_map(lmap: LikelihoodMap, path, db: bool = False, scenario_digest: str | None = None,
               seed: int | None = None) -> None:
    """CSV ``x,y,value`` in row-major lattice order; out-of-field points have an empty value.

    ``db=True`` writes 10*log10(value / max) so the highest peak is 0.
    """
    g = lmap.grid
    vals = lmap.values.astype(float)
    finite = np.isfinite(vals)
    if db:
        peak = vals[finite].max()
        with np.errstate(divide="ignore"):
            vals = np.where(finite, 10 * np.log10(np.where(finite, vals, 1.0) / peak), vals)
    lines = _meta_lines(scenario_digest=scenario_digest, seed=seed, method=lmap.method,
                        pair_id=lmap.pair_id, scale="db" if db else "linear",
                        grid=",".join(_fmt(v) for v in (g.x_min, g.x_max, g.y_min, g.y_max, g.step)))
    lines.append("x,y,value")
    for (x, y), v, ok in zip(g.points.reshape(-1, 2), vals.ravel(), finite.ravel()):
        lines.append(f"{_fmt(x)},{_fmt(y)},{_fmt(v) if ok else ''}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_map(path) -> LikelihoodMap:
    meta, body = _read_meta(Path(path).read_text(encoding="utf-8").splitlines())
    if not body or body[0].strip() != "x,y,value":
        raise FormatError(f"{path}: missing x,y,value header")
    try:
        grid = SearchGrid(*(float(v) for v in meta["grid"].split(",")))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: missing or bad grid metadata") from exc
    rows = [r.split(",") for r in body[1:]]
    if len(rows) != grid.shape[0] * grid.shape[1]:
        raise FormatError(f"{path}: expected {grid.shape[0] * grid.shape[1]} rows, found {len(rows)}")
    vals = np.array([float(r[2]) if r[2] else -np.inf for r in rows]).reshape(grid.shape)
    pair_id = meta.get("pair_id", "combined")
    pair_id = int(pair_id) if pair_id.lstrip("-").isdigit() else pair_id
    return LikelihoodMap(grid, vals, meta.get("method", ""), pair_id)


# -- covariance exchange ------------------------------------------------------

def export_covariance(cov: CovarianceSet, path, scenario_digest: str | None = None,
                      seed: int | None = None) -> None:
    """Header ``pair_id,Q,sigma2,dim`` then dim^2 lines ``re,im`` (row-major)."""
    lines = _meta_lines(scenario_digest=scenario_digest, seed=seed, fields="pair_id,Q,sigma2,dim")
    lines.append(f"{cov.pair_id},{cov.Q},{_fmt(cov.sigma2)},{cov.dim}")
    lines.extend(f"{_fmt(z.real)},{_fmt(z.imag)}" for z in cov.R.ravel())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def import_covariance(path, tol: float = 1e-9) -> CovarianceSet:
    _, body = _read_meta(Path(path).read_text(encoding="utf-8").splitlines())
    try:
        pair_id, Q, sigma2, dim = body[0].split(",")
        pair_id, Q, sigma2, dim = int(pair_id), int(Q), float(sigma2), int(dim)
        entries = np.array([complex(float(a), float(b)) for a, b in (r.split(",") for r in body[1:])])
    except (IndexError, ValueError) as exc:
        raise FormatError(f"{path}: corrupted covariance payload") from exc
    if entries.size != dim * dim:
        raise FormatError(f"{path}: expected {dim * dim} entries, found {entries.size}")
    R = entries.reshape(dim, dim)
    scale = max(float(np.abs(R).max(initial=0.0)), 1.0)
    if np.abs(R - R.conj().T).max(initial=0.0) > tol * scale:
        raise FormatError(f"{path}: covariance is not Hermitian")
    return CovarianceSet(pair_id, R, Q, sigma2)


# -- reports and trial logs ---------------------------------------------------

def report_dict(report: ExperimentReport) -> dict:
    return {
        "scenario_digest": report.scenario_digest,
        "seed": report.seed,
        "trials": report.n_trials,
        "methods": {
            m: {"rmse_m": report.rmse[m], "ci95_m": report.ci95[m], "trials": report.n_trials}
            for m in report.rmse
        },
        "mean_diagonality": {str(k): v for k, v in report.mean_diagonality.items()},
        "diagonality_ci95": {str(k): v for k, v in report.diagonality_ci95.items()},
    }


def write_report(report: ExperimentReport | Sequence[ExperimentReport], path) -> None:
    if isinstance(report, ExperimentReport):
        payload = report_dict(report)
    else:
        payload = {"reports": [report_dict(r) for r in report]}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _trial_dict(r: TrialResult) -> dict:
    return {
        "trial": r.trial,
        "method": r.method,
        "truth": np.asarray(r.truth).tolist(),
        "estimates": np.asarray(r.estimates).tolist(),
        "sq_errors": np.asarray(r.sq_errors).tolist(),
        "diagonality": list(r.diagonality),
        "channel_digest": r.channel_digest,
    }


def write_trial_log(results: Sequence[TrialResult], path, scenario_digest: str, seed: int) -> None:
    """JSON lines: a header object, then one object per (trial, method)."""
    lines = [json.dumps({"scenario_digest": scenario_digest, "seed": seed}, sort_keys=True)]
    lines.extend(json.dumps(_trial_dict(r), sort_keys=True) for r in results)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trial_log(path) -> tuple[dict, list[TrialResult]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = json.loads(lines[0])
    results = []
    for line in lines[1:]:
        d = json.loads(line)
        results.append(TrialResult(d["trial"], d["method"], np.array(d["truth"]), np.array(d["estimates"]),
                                   np.array(d["sq_errors"]), d["diagonality"], d["channel_digest"]))
    return header, results
