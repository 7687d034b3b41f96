"""The four standard figures.

corrector_study.csv  convergence of the shell corrector toward its diffusive
                     limit: error curve over N plus the two Rayleigh
                     quotients against their manifest asymptotes
scaling_limit.csv    exceedance frequencies per shell index with 90%
                     confidence bars
decay_check.csv      trajectory norm against the exponential envelope, with
                     a PASS/FAIL annotation from the threshold rule
trajectory.csv       energy budget terms stacked over time

Each figure is described by a FigureSpec (inputs, output path, scales,
overlay constants read from the manifest next to the CSV).  ``discover_figures``
walks a results directory and builds the specs for every table it knows.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "SchemaError", "discover_figures", "render"]


class SchemaError(ValueError):
    """A CSV is missing a column the figure needs."""


_EXPECTED = {
    "corrector_study": ("N", "rel_l2_error", "rayleigh_s", "rayleigh_sperp"),
    "scaling_limit": ("N", "p_hat", "half_width", "n_paths", "n_blowups",
                      "mean_distance"),
    "decay_check": ("t", "l2", "envelope"),
    "trajectory": ("t", "l2", "h1", "hminus_delta", "cutoff", "flux_b",
                   "dissip", "flux_S"),
}


@dataclass
class FigureSpec:
    kind: str                   # one of _EXPECTED
    csv_path: Path
    out_path: Path
    log_y: bool = True
    overlays: dict = field(default_factory=dict)   # constants from the manifest

    def __post_init__(self):
        if self.kind not in _EXPECTED:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not Path(self.csv_path).exists():
            raise FileNotFoundError(f"missing input table {self.csv_path}")


def _read_table(path: Path, kind: str) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in _EXPECTED[kind] if c not in cols]
        if missing:
            raise SchemaError(
                f"{path}: missing column(s) {', '.join(missing)} "
                f"(expected header {','.join(_EXPECTED[kind])})")
        rows = list(reader)
    out = {}
    for c in _EXPECTED[kind]:
        out[c] = np.array([float(r[c]) if r[c] != "" else np.nan for r in rows])
    return out


def _load_manifest(csv_path: Path) -> dict:
    man = Path(csv_path).parent / "manifest.json"
    if man.exists():
        return json.loads(man.read_text())
    return {}


def discover_figures(root) -> list[FigureSpec]:
    """Specs for every known table under root (searched recursively)."""
    root = Path(root)
    specs = []
    for kind in _EXPECTED:
        for csv_path in sorted(root.rglob(f"{kind}.csv")):
            manifest = _load_manifest(csv_path)
            specs.append(FigureSpec(
                kind=kind,
                csv_path=csv_path,
                out_path=csv_path.with_suffix(".png"),
                overlays=manifest.get("calibrated_constants", {})
                | {"params": manifest.get("params", {})},
            ))
    return specs


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the written image path."""
    data = _read_table(spec.csv_path, spec.kind)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        _RENDERERS[spec.kind](ax, data, spec)
        fig.tight_layout()
        fig.savefig(spec.out_path, dpi=130)
    finally:
        plt.close(fig)
    return spec.out_path


def _render_corrector(ax, d, spec):
    ax.plot(d["N"], d["rel_l2_error"], "o-", label="relative error vs limit")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xlabel("shell index N")
    ax.set_ylabel("relative L2 error")
    if spec.log_y and np.all(d["rel_l2_error"] > 0):
        ax.set_yscale("log")
    ax.set_xscale("log", base=2)
    ax2 = ax.twinx()
    ax2.plot(d["N"], d["rayleigh_s"], "s--", color="tab:red",
             label="Rayleigh quotient (full)")
    ax2.plot(d["N"], d["rayleigh_sperp"], "^--", color="tab:green",
             label="Rayleigh quotient (complement)")
    lim = spec.overlays.get("limit_coefficient")
    perp = spec.overlays.get("perp_coefficient")
    if lim is not None:
        ax2.axhline(lim, color="tab:red", lw=0.8, ls=":")
    if perp is not None:
        ax2.axhline(perp, color="tab:green", lw=0.8, ls=":")
    ax2.set_ylabel("Rayleigh quotient")
    lines, labels = ax.get_legend_handles_labels()
    l2, lab2 = ax2.get_legend_handles_labels()
    ax.legend(lines + l2, labels + lab2, fontsize=8, loc="center right")
    ax.set_title("corrector convergence toward the diffusive limit")


def _render_scaling(ax, d, spec):
    x = np.arange(len(d["N"]))
    ax.bar(x, d["p_hat"], yerr=d["half_width"], capsize=4, color="tab:blue",
           alpha=0.8)
    ax.set_xticks(x, [f"N={int(n)}" for n in d["N"]])
    ax.set_ylabel("exceedance frequency")
    ax.set_ylim(0, 1)
    eps = spec.overlays.get("eps")
    title = "distance exceedance over shell index"
    if eps is not None:
        title += f"  (eps = {eps:.3g}, 90% bands)"
    ax.set_title(title)
    for xi, (p, b) in enumerate(zip(d["p_hat"], d["n_blowups"])):
        if b > 0:
            ax.annotate(f"{int(b)} blow-ups", (xi, p), textcoords="offset points",
                        xytext=(0, 12), ha="center", fontsize=7)


def decay_verdict(d) -> bool:
    finite = np.isfinite(d["l2"])
    return bool(np.all(finite) and np.all(d["l2"] <= d["envelope"] + 1e-12))


def _render_decay(ax, d, spec):
    ax.plot(d["t"], d["l2"], label="|Phi(t)|")
    ax.plot(d["t"], d["envelope"], "--", label="decay envelope")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("L2 norm")
    passed = decay_verdict(d)
    verdict = "PASS" if passed else "FAIL"
    ax.annotate(verdict, xy=(0.98, 0.95), xycoords="axes fraction",
                ha="right", va="top", fontsize=14, fontweight="bold",
                color="tab:green" if passed else "tab:red")
    nu1 = spec.overlays.get("nu1")
    lam = spec.overlays.get("params", {}).get("lambda")
    bits = []
    if nu1 is not None:
        bits.append(f"nu1 = {nu1:.3g}")
    if lam is not None:
        bits.append(f"lambda = {lam:.3g}")
    ax.set_title("decay against the exponential envelope"
                 + (f"  ({', '.join(bits)})" if bits else ""))
    ax.legend(fontsize=8)


def _render_energy(ax, d, spec):
    t = d["t"][:-1]
    nonlinear = -2.0 * d["cutoff"][:-1] * d["flux_b"][:-1]
    dissip = -2.0 * d["dissip"][:-1]
    corr = 2.0 * d["flux_S"][:-1]
    measured = np.diff(d["l2"] ** 2) / np.diff(d["t"])
    ax.stackplot(t, np.minimum(nonlinear, 0), dissip, np.minimum(corr, 0),
                 labels=["nonlinear flux (loss)", "dissipation", "corrector flux"],
                 colors=["tab:orange", "tab:blue", "tab:purple"], alpha=0.7)
    pos = np.maximum(nonlinear, 0) + np.maximum(corr, 0)
    ax.stackplot(t, pos, labels=["nonlinear/corrector gain"],
                 colors=["tab:red"], alpha=0.5)
    ax.plot(t, measured, "k-", lw=1.2, label="measured d|Phi|^2/dt")
    ax.set_xlabel("t")
    ax.set_ylabel("energy budget terms")
    ax.legend(fontsize=7)
    ax.set_title("energy budget over time")


_RENDERERS = {
    "corrector_study": _render_corrector,
    "scaling_limit": _render_scaling,
    "decay_check": _render_decay,
    "trajectory": _render_energy,
}
