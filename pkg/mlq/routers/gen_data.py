# mlq/routers/gen_data.py
from pathlib import Path
from typing import Optional

import typer

from mlq.services.synthetic import write_synthetic

from .common import EXIT_OK, console, handle_errors


@handle_errors
def gen_data(
    preset: str = typer.Argument(..., help="smarthome-classify, smarthome-cluster, smarthome-regress, line, separable-2d or ping-clients"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Defaults to MLQ_SEED"),
    rows: int = typer.Option(1000, "--rows"),
    out: Path = typer.Option(..., "--out", help="CSV file to write"),
    timestamps: bool = typer.Option(False, "--timestamps", help="Prepend a dd-mm-yyyy HH:MM:SS column"),
    unlabeled: bool = typer.Option(False, "--unlabeled", help="Drop the trailing label/target column"),
):
    """Write a seeded synthetic dataset."""
    write_synthetic(str(out), preset, seed, rows, timestamps, target=not unlabeled)
    console.print(f"wrote {rows} row(s) of {preset} to {out}", markup=False)
    raise typer.Exit(EXIT_OK)
