"""CSV serialization of round records and the figure rendering that goes
with it.

The CSV schema is fixed; floats are written with 17 significant digits so
every double round-trips exactly and reruns are byte-identical.  Figures
are rendered straight to files next to the CSV output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

CSV_HEADER = (
    "algorithm,seed,round,iteration,error,lyapunov,"
    "r_consensus,r_gradient,scalars_up_cum,scalars_down_cum"
)


def _fmt(x: float) -> str:
    return format(x, ".17g")


def records_to_csv(records, seed: int) -> str:
    lines = [CSV_HEADER]
    for r in records:
        lyap = "" if r.lyapunov is None else _fmt(r.lyapunov)
        lines.append(
            f"{r.algorithm},{seed},{r.k},{r.iteration},{_fmt(r.error)},{lyap},"
            f"{_fmt(r.r_consensus)},{_fmt(r.r_gradient)},"
            f"{r.scalars_up_cum},{r.scalars_down_cum}"
        )
    return "\n".join(lines) + "\n"


def write_records_csv(path, records, seed: int) -> None:
    Path(path).write_text(records_to_csv(records, seed))


def csv_path(out_dir, algorithm: str, seed: int) -> Path:
    return Path(out_dir) / f"{algorithm}_seed{seed}.csv"


def _plot_curves(ax, results, x_of, xlabel):
    for name, result in results.items():
        xs, ys = [], []
        for r in result.records:
            if r.error > 0:
                xs.append(x_of(r))
                ys.append(r.error)
        ax.semilogy(xs, ys, label=name)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("convergence error e(k)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()


def save_error_vs_round(results, path) -> None:
    """Semilog error curves against the communication round index."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    _plot_curves(ax, results, lambda r: r.k, "communication round k")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_vs_scalars(results, path) -> None:
    """Semilog error curves against total scalars transmitted."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    _plot_curves(
        ax,
        results,
        lambda r: r.scalars_up_cum + r.scalars_down_cum,
        "scalars transmitted (uplink + downlink)",
    )
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_figures(out_dir, results, seed: int) -> list[Path]:
    """Render the standard figure set for one seed's results."""
    out = Path(out_dir)
    paths = [
        out / f"error_vs_round_seed{seed}.png",
        out / f"error_vs_scalars_seed{seed}.png",
    ]
    save_error_vs_round(results, paths[0])
    save_error_vs_scalars(results, paths[1])
    return paths
