"""Command-line entry point.

Subcommands: gen (synthetic dataset files), train (single run with reports,
diagnostics, and figures), sweep (variant x depth x repeat grids), verify
(theorem oracle suites), plot (deterministic SVG depth curves).

Exit codes: 0 success, 1 verification/tolerance failure, 2 usage/input error.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from .data import (
    DatasetError,
    SyntheticSpec,
    edge_homophily,
    generate_noisy_complete,
    generate_planted_partition,
    load_dataset,
    save_dataset,
)
from .diagnostics import diagnostics_csv, record_training_diagnostics
from .graph import GraphError
from .model import ModelError, ModelSpec, UdgnnModel
from .svgchart import ChartError, line_chart
from .train import VARIANTS, TrainConfig, TrainError, depth_sweep, sweep_csv
from .verify import THEOREM1_TOL, THEOREM2_TOL, verify_theorem1, verify_theorem2

_INPUT_ERRORS = (DatasetError, GraphError, ModelError, TrainError, ChartError, OSError, json.JSONDecodeError)


def _fail(msg: str) -> None:
    click.echo(f"error: {msg}", err=True)
    sys.exit(2)


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        _fail(f"file not found: {path}")
    except json.JSONDecodeError as e:
        _fail(f"malformed JSON in {path}: {e}")


@click.group()
def main():
    """Deep-GNN laboratory: datasets, training, sweeps, oracles, plots."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(), help="SyntheticSpec JSON file")
@click.option("--out", "out_path", required=True, type=click.Path(), help="dataset file to write")
def gen(spec_path, out_path):
    """Generate a synthetic dataset file."""
    obj = _read_json(spec_path)
    generator = obj.pop("generator", "planted_partition")
    try:
        spec = SyntheticSpec.from_json(obj)
        if generator == "planted_partition":
            graph, dataset = generate_planted_partition(spec)
        elif generator == "noisy_complete":
            graph, dataset = generate_noisy_complete(spec)
        else:
            _fail(f"unknown generator {generator!r}; expected planted_partition or noisy_complete")
        save_dataset(graph, dataset, out_path)
    except (TypeError, KeyError) as e:
        _fail(f"invalid spec: {e}")
    except _INPUT_ERRORS as e:
        _fail(str(e))
    click.echo(
        f"wrote {out_path}: {graph.n_nodes} nodes, {graph.n_edges} edges, "
        f"realized homophily {edge_homophily(graph, dataset.labels):.4f}"
    )


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--model", "model_path", required=True, type=click.Path(), help="ModelSpec JSON file")
@click.option("--train", "train_path", required=True, type=click.Path(), help="TrainConfig JSON file")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--log-every", default=10, show_default=True, help="diagnostics logging interval")
def train(data_path, model_path, train_path, out_dir, log_every):
    """Train one model; write report.json, metrics.csv, diagnostics.csv, figures."""
    try:
        graph, dataset = load_dataset(data_path)
        spec = ModelSpec.from_json(Path(model_path).read_text(encoding="utf-8"))
        config = TrainConfig.from_json(Path(train_path).read_text(encoding="utf-8"))
        model = UdgnnModel(spec, dataset.feature_dim, dataset.n_classes, seed=config.seed)
        report, records = record_training_diagnostics(model, graph, dataset, config, log_every=log_every)
    except TypeError as e:
        _fail(f"invalid config: {e}")
    except _INPUT_ERRORS as e:
        _fail(str(e))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(include_timing=False), encoding="utf-8")
    metrics = ["epoch,train_loss,val_acc"]
    for i, (loss, acc) in enumerate(zip(report.train_loss, report.val_acc), start=1):
        metrics.append(f"{i},{loss!r},{acc!r}")
    (out / "metrics.csv").write_text("\n".join(metrics) + "\n", encoding="utf-8")
    (out / "diagnostics.csv").write_text(diagnostics_csv(records), encoding="utf-8")
    figures = out / "figures"
    figures.mkdir(exist_ok=True)
    from . import figures as figs

    figs.training_curves_png(report, figures / "training_curves.png")
    figs.gate_dynamics_png(report, figures / "gate_dynamics.png")
    figs.diagnostics_png(records, figures / "diagnostics.png")
    click.echo(
        f"test_acc={report.test_acc:.4f} best_epoch={report.best_epoch} "
        f"epochs={report.n_epochs} wall_ms={report.wall_ms:.0f}"
    )


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path())
@click.option("--variants", required=True, help="comma-separated variant names")
@click.option("--depths", required=True, help="comma-separated depths")
@click.option("--repeats", default=1, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--model", "model_path", type=click.Path(), help="ModelSpec JSON template (optional)")
@click.option("--train", "train_path", type=click.Path(), help="TrainConfig JSON (optional)")
def sweep(data_path, variants, depths, repeats, out_dir, model_path, train_path):
    """Train every (variant, depth, repeat) cell; write sweep.csv and figures."""
    names = [v.strip() for v in variants.split(",") if v.strip()]
    for name in names:
        if name not in VARIANTS:
            _fail(f"unknown variant {name!r}; valid: {', '.join(sorted(VARIANTS))}")
    try:
        depth_list = [int(d) for d in depths.split(",") if d.strip()]
    except ValueError as e:
        _fail(f"bad depth list: {e}")
    try:
        graph, dataset = load_dataset(data_path)
        template = (
            ModelSpec.from_json(Path(model_path).read_text(encoding="utf-8"))
            if model_path
            else ModelSpec()
        )
        config = (
            TrainConfig.from_json(Path(train_path).read_text(encoding="utf-8"))
            if train_path
            else TrainConfig()
        )
        rows = depth_sweep(template, graph, dataset, names, depth_list, repeats, config)
    except TypeError as e:
        _fail(f"invalid config: {e}")
    except _INPUT_ERRORS as e:
        _fail(str(e))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(rows), encoding="utf-8")
    from . import figures as figs

    figs.depth_curves_png(rows, out / "depth_curves.png")
    click.echo(f"wrote {out / 'sweep.csv'} ({len(rows)} rows)")


@main.command()
@click.option("--theorem", type=click.Choice(["1", "2"]), required=True)
@click.option("--trials", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--corrupt", is_flag=True, hidden=True, help="negative-control hook: inject an error")
def verify(theorem, trials, seed, corrupt):
    """Run the oracle-equivalence suite; exit 0 iff all deviations are under tolerance."""
    if theorem == "1":
        result = verify_theorem1(trials, seed, corrupt=corrupt)
        tol = THEOREM1_TOL
    else:
        result = verify_theorem2(trials, seed, corrupt=corrupt)
        tol = THEOREM2_TOL
    click.echo(
        f"theorem {theorem}: {result.trials} trials, max deviation {result.max_deviation:.3e} "
        f"(tolerance {tol:.0e})"
    )
    if not result.passed(tol):
        click.echo(f"FAIL: tolerance breached at trial {result.worst_instance}", err=True)
        sys.exit(1)


@main.command()
@click.option("--csv", "csv_path", required=True, type=click.Path())
@click.option("--x", "x_col", default="depth", show_default=True)
@click.option("--y", "y_col", default="test_acc", show_default=True)
@click.option("--group", "group_col", default="variant", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def plot(csv_path, x_col, y_col, group_col, out_path):
    """Render a deterministic SVG line chart from a CSV file."""
    try:
        with open(csv_path, newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        if not rows:
            _fail(f"no data rows in {csv_path}")
        svg = line_chart(rows, x_col, y_col, group_col)
    except _INPUT_ERRORS as e:
        _fail(str(e))
    Path(out_path).write_text(svg, encoding="utf-8")
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
