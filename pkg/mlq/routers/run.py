# mlq/routers/run.py
from pathlib import Path
from typing import List, Optional

import typer

from mlq.app.config import settings
from mlq.services.codegen import PLAN_EXTENSION, instantiate_plan, load_plan
from mlq.services.runtime import RunOptions, instantiate, run as run_network
from mlq.utils.helpers import read_text

from .common import EXIT_FAILURE, EXIT_OK, err_console, has_errors, handle_errors, load_model, report_diagnostics


@handle_errors
def run(
    paths: List[Path] = typer.Argument(..., help="Model files, or one compiled .mlqplan"),
    config: Optional[str] = typer.Option(None, "--config", help="Configuration to run"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for components without one"),
    max_steps: int = typer.Option(settings.MAX_STEPS, "--max-steps"),
    trace_out: Optional[Path] = typer.Option(None, "--trace-out", help="Write the JSONL trace here"),
    dataset_root: Optional[str] = typer.Option(settings.DATASET_ROOT, "--dataset-root", help="Base of relative dataset paths"),
    clock_ticks: Optional[int] = typer.Option(None, "--clock-ticks", help="Tick budget of the built-in clock unless the configuration sets @clock_ticks"),
    until_halted: bool = typer.Option(False, "--until-halted", help="Stop once every instance reached a final state"),
    diag_format: str = typer.Option("text", "--diag-format", help="text or json"),
):
    """Interpret a model, or replay a compiled plan."""
    options = RunOptions(seed=seed, max_steps=max_steps, dataset_root=dataset_root, print_sink=typer.echo)
    if clock_ticks is not None:
        options.clock_ticks = clock_ticks

    if len(paths) == 1 and paths[0].suffix == PLAN_EXTENSION:
        plan = load_plan(read_text(str(paths[0])))
        if config is not None and config != plan.header.configuration:
            raise ValueError(f"plan holds configuration '{plan.header.configuration}', not '{config}'")
        network = instantiate_plan(plan, options)
    else:
        model, diagnostics = load_model(paths)
        if has_errors(diagnostics):
            report_diagnostics([d for d in diagnostics if d.is_error], diag_format)
            raise typer.Exit(EXIT_FAILURE)
        network = instantiate(model, config, options)

    trace = run_network(network, until_halted=until_halted)
    if trace_out is not None:
        trace.write(str(trace_out))
    if network.has_errors:
        for record in trace.of_kind("error"):
            err_console.print(f"{record.instance}: {record.payload['message']}", style="red", markup=False)
        raise typer.Exit(EXIT_FAILURE)
    raise typer.Exit(EXIT_OK)
