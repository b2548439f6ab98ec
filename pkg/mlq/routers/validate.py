# mlq/routers/validate.py
from pathlib import Path
from typing import List, Optional

import typer

from mlq.services.codegen import BACKENDS
from mlq.services.diagnostics import Severity
from mlq.utils.helpers import write_text

from .common import EXIT_FAILURE, EXIT_OK, has_errors, handle_errors, load_model, report_diagnostics


@handle_errors
def validate(
    paths: List[Path] = typer.Argument(..., help="Model files; several files are concatenated"),
    diag_format: str = typer.Option("text", "--diag-format", help="text or json"),
    automl_notes: bool = typer.Option(False, "--automl-notes", help="Also list notes (AutoML decisions, optimizer mapping)"),
    strict: bool = typer.Option(False, "--strict", help="Treat warnings as failures"),
    dump_resolved: Optional[Path] = typer.Option(None, "--dump-resolved", help="Write the flattened model here"),
):
    """Resolve and validate a model (well-formedness and completeness rules)."""
    model, diagnostics = load_model(paths)
    shown = [d for d in diagnostics if automl_notes or d.severity is not Severity.NOTE]
    report_diagnostics(shown, diag_format)
    if dump_resolved is not None:
        artifacts = BACKENDS["resolved"].emit(model)
        write_text(str(dump_resolved), next(iter(artifacts.values())))
    warnings = any(d.severity is Severity.WARNING for d in diagnostics)
    if has_errors(diagnostics) or (strict and warnings):
        raise typer.Exit(EXIT_FAILURE)
    raise typer.Exit(EXIT_OK)
