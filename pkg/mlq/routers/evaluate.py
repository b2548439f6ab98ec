# mlq/routers/evaluate.py
from pathlib import Path
from typing import List, Optional

import typer
from rich.table import Table

from mlq.services.ml_pipeline import evaluate_file
from mlq.services.model_store import load_model

from .common import EXIT_OK, console, dump_json, handle_errors


@handle_errors
def evaluate(
    model_path: Path = typer.Argument(..., help="Trained model document (.mlqm)"),
    test_csv: Path = typer.Argument(..., help="Headerless test file; label (or truth) column last"),
    timestamps: bool = typer.Option(False, "--timestamps", help="The file starts with a timestamp column"),
    metric: Optional[List[str]] = typer.Option(None, "--metric", help="Restrict the report to these metrics"),
    as_json: bool = typer.Option(False, "--json", help="Print the metrics as JSON"),
):
    """Evaluate a trained model on a test file."""
    model = load_model(str(model_path))
    metrics = evaluate_file(model, str(test_csv), timestamps, metric)
    values = metrics.populated()
    if metric:
        values = {k: v for k, v in values.items() if k in metric}

    if as_json:
        console.print(dump_json({"task": metrics.task, "support": metrics.support, "metrics": values,
                                 "zero_division": metrics.zero_division}), markup=False, soft_wrap=True)
    else:
        table = Table(title=f"{model.family.value} on {test_csv.name} ({metrics.support} rows)")
        table.add_column("metric")
        table.add_column("value", justify="right")
        for name, value in values.items():
            flag = " (zero division)" if name in metrics.zero_division else ""
            table.add_row(name, f"{value:.6f}{flag}")
        console.print(table)
    raise typer.Exit(EXIT_OK)
