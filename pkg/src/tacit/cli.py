"""Command-line entry points: serve the HTTP API, or render a session's
report to files (markdown + delimited annotations + figures)."""

from __future__ import annotations

import csv
import re
from pathlib import Path
from typing import Optional

import click

from .errors import TacitError
from .ingest import IngestConfig, default_bin_count, histogram, scatter_points
from .model import describe_selection
from .provider import HttpProvider, MockProvider, ProviderConfig
from .questions import default_bank_entries, load_bank_entries
from .store import LogicalClock, SessionManager, build_export, export_to_json, generate_report


def _build_provider(config: ProviderConfig, mock_seed: Optional[int]):
    if mock_seed is not None:
        return MockProvider(mock_seed)
    return HttpProvider(config)


def _build_manager(data_dir, config_path, mock_seed, bank_path) -> tuple[SessionManager, ProviderConfig]:
    config = ProviderConfig.from_file(config_path) if config_path else ProviderConfig()
    provider = _build_provider(config, mock_seed)
    bank = load_bank_entries(bank_path) if bank_path else default_bank_entries()
    manager = SessionManager(
        data_dir,
        provider,
        bank,
        ingest_config=IngestConfig(),
        prompt_budget=config.prompt_budget,
        clock=LogicalClock() if mock_seed is not None else None,
        default_seed=mock_seed,
    )
    return manager, config


@click.group()
def main() -> None:
    """Elicit expert knowledge about tabular datasets."""


@main.command()
@click.option("--listen", default="127.0.0.1:8765", show_default=True, help="host:port to bind")
@click.option("--data-dir", default="./sessions", show_default=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--mock-provider", "mock_seed", type=int, default=None,
              help="Run fully offline against the deterministic mock with this seed.")
@click.option("--bank", "bank_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Predefined question file (theme/text records); defaults to the built-in bank.")
@click.option("--frontend", "frontend_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory holding the built web client; served at /.")
def serve(listen, data_dir, config_path, mock_seed, bank_path, frontend_dir) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    manager, config = _build_manager(data_dir, config_path, mock_seed, bank_path)
    app = create_app(manager, auth_token=config.auth_token, frontend_dir=frontend_dir)
    host, _, port = listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name).strip("_") or "column"


def _render_figures(state, out_dir: Path) -> list[Path]:
    """Histogram per numeric column, plus a scatter of the first two."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    figures_dir = out_dir / "figures"
    figures_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    dataset = state.dataset
    numeric = [i for i, c in enumerate(dataset.columns) if c.inferred_type == "numeric"]

    for index in numeric:
        meta = dataset.columns[index]
        try:
            spec = histogram(dataset, index, default_bin_count(dataset, index))
        except TacitError:
            continue
        fig, ax = plt.subplots(figsize=(6, 4))
        widths = [spec.bin_edges[i + 1] - spec.bin_edges[i] for i in range(spec.bin_count)]
        ax.bar(spec.bin_edges[:-1], spec.counts, width=widths, align="edge",
               edgecolor="white", color="#4878a8")
        ax.set_xlabel(meta.name)
        ax.set_ylabel("count")
        ax.set_title(f"Distribution of {meta.name}")
        path = figures_dir / f"hist_{index:02d}_{_safe_name(meta.name)}.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    if len(numeric) >= 2:
        x, y = numeric[0], numeric[1]
        points = scatter_points(dataset, x, y)
        if points:
            fig, ax = plt.subplots(figsize=(5, 5))
            ax.scatter([p[1] for p in points], [p[2] for p in points], s=12, color="#a85048")
            ax.set_xlabel(dataset.columns[x].name)
            ax.set_ylabel(dataset.columns[y].name)
            ax.set_title(f"{dataset.columns[y].name} vs {dataset.columns[x].name}")
            path = figures_dir / f"scatter_{_safe_name(dataset.columns[x].name)}_{_safe_name(dataset.columns[y].name)}.png"
            fig.savefig(path, dpi=120, bbox_inches="tight")
            plt.close(fig)
            written.append(path)
    return written


def _write_annotations_csv(state, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence", "id", "scope", "selection", "origin", "question", "text", "created_at"])
        for ann in state.annotations:
            question = state.find_question(ann.question_id) if ann.question_id else None
            writer.writerow([
                ann.sequence,
                ann.id,
                "general" if ann.is_general else "data_specific",
                describe_selection(ann.selection),
                ann.origin,
                question.text if question else "",
                ann.text,
                ann.created_at.isoformat(),
            ])


@main.command()
@click.option("--data-dir", default="./sessions", show_default=True, type=click.Path(file_okay=False))
@click.option("--session", "session_id", required=True, help="Session id to report on.")
@click.option("--out", "out_dir", default="./report", show_default=True, type=click.Path(file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--mock-provider", "mock_seed", type=int, default=None)
@click.option("--bank", "bank_path", type=click.Path(exists=True, dir_okay=False), default=None)
def report(data_dir, session_id, out_dir, config_path, mock_seed, bank_path) -> None:
    """Render a session's dataset report, export, delimited annotation table,
    and per-column figures into a directory."""
    manager, _config = _build_manager(data_dir, config_path, mock_seed, bank_path)
    state = manager.state_snapshot(session_id)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report_text = generate_report(state, manager.provider)
    (out / "report.md").write_text(report_text, encoding="utf-8")
    (out / "export.json").write_text(export_to_json(build_export(state)), encoding="utf-8")
    _write_annotations_csv(state, out / "annotations.csv")
    figures = _render_figures(state, out)

    click.echo(f"report.md, export.json, annotations.csv written to {out}")
    for path in figures:
        click.echo(f"figure: {path}")


@main.command()
@click.option("--data-dir", default="./sessions", show_default=True, type=click.Path(file_okay=False))
@click.option("--session", "session_id", required=True)
@click.option("--out", "out_path", default="annotations.json", show_default=True,
              type=click.Path(dir_okay=False))
def export(data_dir, session_id, out_path) -> None:
    """Write a session's annotation export document to a file."""
    manager, _ = _build_manager(data_dir, None, 0, None)
    state = manager.state_snapshot(session_id)
    Path(out_path).write_text(export_to_json(build_export(state)), encoding="utf-8")
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
