# scripts/train_blackbox.py
"""
Train one data_analytics component out of band and store it where a
black-box component can load it (`<out>/model.mlqm`).

    python scripts/train_blackbox.py corpus/smarthome.mlq corpus/scenario2_clustering.mlq \
        --component washer_clusters --dataset-root corpus --out corpus/models/washer_kmeans
"""
import os
import sys
from pathlib import Path
from typing import List, Optional

import typer

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

from mlq.routers.common import console, handle_errors, load_model  # noqa: E402
from mlq.services.diagnostics import has_errors  # noqa: E402
from mlq.services.model_store import BLACKBOX_DOCUMENT, save_model  # noqa: E402
from mlq.services.ml_pipeline import fit_component  # noqa: E402
from mlq.utils.helpers import rebase  # noqa: E402


@handle_errors
def main(
    paths: List[Path] = typer.Argument(..., help="Model files declaring the component"),
    component: str = typer.Option(..., "--component", help="data_analytics name"),
    thing: Optional[str] = typer.Option(None, "--thing", help="Owning thing when the name is ambiguous"),
    dataset_root: Optional[str] = typer.Option(None, "--dataset-root"),
    out: Path = typer.Option(..., "--out", help="Directory the black-box component points at"),
):
    model, diagnostics = load_model(paths)
    if has_errors(diagnostics):
        raise ValueError("the model has validation errors; run `mlq validate` first")
    matches = [spec for owner, spec in model.analytics()
               if spec.name == component and (thing is None or owner.name == thing)]
    if len(matches) != 1:
        raise ValueError(f"expected one data_analytics '{component}', found {len(matches)}")
    spec = matches[0]
    if spec.blackbox_ml:
        raise ValueError(f"'{component}' is itself a black-box component")

    trained, report = fit_component(spec, rebase(spec.dataset, dataset_root))
    target = out / BLACKBOX_DOCUMENT
    save_model(str(target), trained)
    console.print(f"trained {trained.family.value} on {report.train_size} row(s); wrote {target}", markup=False)


if __name__ == "__main__":
    typer.run(main)
