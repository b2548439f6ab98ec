# mlq/services/__init__.py
from . import codegen, metamodel, ml_pipeline, parser, runtime, validator

__all__ = ["parser", "metamodel", "validator", "ml_pipeline", "runtime", "codegen"]
