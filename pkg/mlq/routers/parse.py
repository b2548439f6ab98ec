# mlq/routers/parse.py
from pathlib import Path
from typing import List

import typer

from mlq.services.emitter import emit_canonical

from .common import EXIT_OK, console, handle_errors, load_unit


@handle_errors
def parse(
    paths: List[Path] = typer.Argument(..., help="Model files; several files are concatenated"),
    emit_canonical_text: bool = typer.Option(False, "--emit-canonical", help="Print the canonical form"),
    diag_format: str = typer.Option("text", "--diag-format", help="text or json"),
):
    """Parse model files and report syntax errors."""
    unit = load_unit(paths)
    if emit_canonical_text:
        console.print(emit_canonical(unit), end="", markup=False, soft_wrap=True)
    raise typer.Exit(EXIT_OK)
