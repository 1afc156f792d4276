"""Figure rendering for simulation and verification outputs.

Post-processes the delimited files that ``simulate`` and ``verify-azuma``
emit; figures land next to the data they were read from.  Nothing here is on
the data-producing path.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import ValidationError  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _read_trajectories(path: Path) -> dict[int, list[tuple[int, int, float]]]:
    runs: dict[int, list[tuple[int, int, float]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            trial = int(row["trial"])
            runs.setdefault(trial, []).append(
                (int(row["k"]), int(row["S_k"]), float(row["W_k"])))
    for points in runs.values():
        points.sort()
    return runs


def render_trajectories(csv_path: Path, out_path: Path,
                        max_runs: int = 50) -> Path:
    """Partial-sum paths S_k with the 2 sqrt(k ln k) envelope for scale."""
    runs = _read_trajectories(csv_path)
    if not runs:
        raise ValidationError(f"no trajectory rows in {csv_path}")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for trial in sorted(runs)[:max_runs]:
        ks = [k for k, _, _ in runs[trial]]
        ss = [s for _, s, _ in runs[trial]]
        ax.plot(ks, ss, lw=0.8, alpha=0.5)
    kmax = max(k for pts in runs.values() for k, _, _ in pts)
    env_k = [k for k in range(2, kmax + 1, max(1, kmax // 200))]
    env = [2.0 * math.sqrt(k * math.log(k)) for k in env_k]
    ax.plot(env_k, env, "k--", lw=1.2, label=r"$\pm 2\sqrt{k\,\ln k}$")
    ax.plot(env_k, [-v for v in env], "k--", lw=1.2)
    ax.set_xlabel("players scored (k)")
    ax.set_ylabel("partial sum $S_k$")
    ax.legend(loc="upper left")
    return _save(fig, out_path)


def render_win_ratios(summary_path: Path, out_path: Path) -> Path:
    doc = json.loads(summary_path.read_text(encoding="utf-8"))
    ratios = [t["W_n"] for t in doc["trials"]]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(ratios, bins=min(40, max(5, len(ratios) // 10 + 1)),
            color="tab:blue", edgecolor="white")
    ax.axvline(0.5, color="k", ls="--", lw=1)
    ax.set_xlabel("final win ratio $W_n$")
    ax.set_ylabel("trials")
    return _save(fig, out_path)


def render_last_losses(summary_path: Path, out_path: Path) -> Path:
    doc = json.loads(summary_path.read_text(encoding="utf-8"))
    values = [t["last_loss"] for t in doc["trials"] if t["last_loss"] is not None]
    none_count = sum(1 for t in doc["trials"] if t["last_loss"] is None)
    fig, ax = plt.subplots(figsize=(6, 4))
    if values:
        ax.hist(values, bins=min(50, max(5, max(values) + 1)),
                color="tab:orange", edgecolor="white")
    ax.set_xlabel("index of last losing player")
    ax.set_ylabel("trials")
    ax.set_title(f"runs with no loss: {none_count}")
    return _save(fig, out_path)


def render_concentration(report_path: Path, out_path: Path) -> Path:
    """Exceedance threshold against the empirical |S_n| histogram."""
    doc = json.loads(report_path.read_text(encoding="utf-8"))
    fig, ax = plt.subplots(figsize=(6, 4))
    values = doc.get("abs_s_values")
    if values:
        ax.hist(values, bins=40, color="tab:green", edgecolor="white")
    ax.axvline(doc["threshold"], color="k", ls="--", lw=1.2,
               label=f"threshold {doc['threshold']:.1f}")
    ax.set_xlabel("$|S_n|$")
    ax.set_ylabel("trials")
    ax.legend()
    ax.set_title(f"exceedance {doc['empirical_fraction']:.4f} "
                 f"vs budget {doc['delta']:.3f} + {doc['slack']:.3f}")
    return _save(fig, out_path)


def render_directory(directory: Path) -> list[Path]:
    """Render every known artifact in a results directory."""
    directory = Path(directory)
    written: list[Path] = []
    traj = directory / "trajectories.csv"
    summary = directory / "summary.json"
    azuma = directory / "azuma.json"
    if traj.is_file():
        written.append(render_trajectories(traj, directory / "trajectories.png"))
    if summary.is_file():
        written.append(render_win_ratios(summary, directory / "win_ratios.png"))
        written.append(render_last_losses(summary, directory / "last_losses.png"))
    if azuma.is_file():
        written.append(render_concentration(azuma, directory / "azuma.png"))
    if not written:
        raise ValidationError(f"nothing to render in {directory}")
    return written
