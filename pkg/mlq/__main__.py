from mlq.app.main import app

app(prog_name="mlq")
