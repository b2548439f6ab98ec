# mlq/app/main.py
import typer

from mlq.routers import compile, evaluate, gen_data, parse, run, validate
from mlq.utils.logger import setup_logging

app = typer.Typer(
    name="mlq",
    help="Compiler and runtime for ML-enhanced IoT statechart models.",
    add_completion=False,
    no_args_is_help=True,
)


@app.callback()
def main(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at INFO level")):
    setup_logging("INFO" if verbose else None)


app.command("parse")(parse.parse)
app.command("validate")(validate.validate)
app.command("compile")(compile.compile)
app.command("run")(run.run)
app.command("gen-data")(gen_data.gen_data)
app.command("eval")(evaluate.evaluate)
