# mlq/routers/compile.py
from pathlib import Path
from typing import List, Optional

import typer
from rich.table import Table

from mlq.app.config import settings
from mlq.services.codegen import compile_model, write_artifacts
from mlq.services.metamodel import resolve

from .common import EXIT_OK, console, handle_errors, load_unit


@handle_errors
def compile(
    paths: List[Path] = typer.Argument(..., help="Model files; several files are concatenated"),
    backend: str = typer.Option("plan", "--backend", help="plan or resolved"),
    out: Path = typer.Option(Path("out"), "--out", help="Output directory"),
    dataset_root: Optional[str] = typer.Option(settings.DATASET_ROOT, "--dataset-root", help="Base of relative dataset and model paths"),
    diag_format: str = typer.Option("text", "--diag-format", help="text or json"),
):
    """Compile a valid model into execution plans plus a manifest."""
    unit = load_unit(paths)
    model = resolve(unit, str(paths[0]) if len(paths) == 1 else None)
    artifacts = compile_model(model, backend, dataset_root)
    written = write_artifacts(artifacts, str(out))

    table = Table(title=f"{backend} artifacts")
    table.add_column("path")
    table.add_column("bytes", justify="right")
    for path in written:
        table.add_row(path, str(Path(path).stat().st_size))
    console.print(table)
    raise typer.Exit(EXIT_OK)
