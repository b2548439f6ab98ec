# mlq/routers/common.py
"""Helpers shared by the subcommands: loading model files, reporting, exit codes."""
import functools
import json
import logging
from pathlib import Path
from typing import Callable, Iterable, List, Sequence, Tuple

import typer
from rich.console import Console

from mlq.app.schemas import DiagnosticRecord
from mlq.services import ast
from mlq.services.codegen import PlanError
from mlq.services.diagnostics import CompileError, Diagnostic, Severity, has_errors, sort_diagnostics
from mlq.services.metamodel import ResolvedModel, merge_units, resolve
from mlq.services.ml_errors import MLError
from mlq.services.parser import parse_model
from mlq.services.runtime import RunError
from mlq.services.validator import apply_automl_defaults, check_complete, check_valid
from mlq.utils.helpers import read_text

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_IO = 2

console = Console(highlight=False)
err_console = Console(stderr=True, highlight=False)

_STYLES = {Severity.ERROR: "red", Severity.WARNING: "yellow", Severity.NOTE: "cyan"}


def report_diagnostics(diagnostics: Iterable[Diagnostic], fmt: str = "text"):
    for d in diagnostics:
        if fmt == "json":
            console.print(DiagnosticRecord.from_diagnostic(d).to_line(), markup=False, soft_wrap=True)
        else:
            err_console.print(d.render(), style=_STYLES[d.severity], markup=False, soft_wrap=True)


def handle_errors(command: Callable) -> Callable:
    """Map domain failures to exit code 1 and I/O failures to exit code 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except typer.Exit:
            raise
        except CompileError as e:
            report_diagnostics(e.diagnostics, kwargs.get("diag_format", "text"))
            raise typer.Exit(EXIT_FAILURE)
        except (MLError, RunError, PlanError, ValueError) as e:
            err_console.print(f"error: {e}", style="red", markup=False)
            raise typer.Exit(EXIT_FAILURE)
        except OSError as e:
            err_console.print(f"I/O error: {e}", style="red", markup=False)
            raise typer.Exit(EXIT_IO)

    return wrapper


def load_unit(paths: Sequence[Path]) -> ast.Unit:
    """Parse every file and concatenate the units; all parse diagnostics are raised together."""
    units: List[ast.Unit] = []
    problems: List[Diagnostic] = []
    for path in paths:
        text = read_text(str(path))
        try:
            units.append(parse_model(text, str(path)))
        except CompileError as e:
            problems.extend(e.diagnostics)
    if problems:
        raise CompileError(sort_diagnostics(problems))
    return merge_units(units)


def load_model(paths: Sequence[Path]) -> Tuple[ResolvedModel, List[Diagnostic]]:
    """Resolve, apply AutoML defaults and run both validation passes."""
    unit = load_unit(paths)
    model = resolve(unit, str(paths[0]) if len(paths) == 1 else None)
    model, notes = apply_automl_defaults(model)
    diagnostics = check_valid(model) + check_complete(model)
    return model, sort_diagnostics(notes + diagnostics)


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True)
