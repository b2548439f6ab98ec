# mlq/services/ast.py
"""
Source-faithful syntax tree of a model file.

Nodes are frozen dataclasses. Every node carries a `span` that is excluded from
equality, so two trees compare equal when they are structurally the same.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from .diagnostics import NO_SPAN, Span


def _span():
    return field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class Annotation:
    key: str
    value: str
    span: Span = _span()


# --- expressions -----------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    value: Union[bool, int, float, str]
    span: Span = _span()


@dataclass(frozen=True)
class Name:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class ParamRef:
    var: str
    param: str
    span: Span = _span()


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    span: Span = _span()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span = _span()


Expr = Union[Literal, Name, ParamRef, Unary, Binary]

# --- actions ---------------------------------------------------------------


@dataclass(frozen=True)
class Print:
    value: Expr
    span: Span = _span()


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr
    span: Span = _span()


@dataclass(frozen=True)
class Send:
    port: str
    message: str
    args: Tuple[Expr, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class Conditional:
    condition: Expr
    then: Tuple["Action", ...]
    otherwise: Optional[Tuple["Action", ...]] = None
    span: Span = _span()


@dataclass(frozen=True)
class DaPreprocess:
    da: str
    span: Span = _span()


@dataclass(frozen=True)
class DaTrain:
    da: str
    span: Span = _span()


@dataclass(frozen=True)
class DaPredict:
    da: str
    args: Tuple[Expr, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class DaSave:
    da: str
    span: Span = _span()


Action = Union[Print, Assign, Send, Conditional, DaPreprocess, DaTrain, DaPredict, DaSave]
DA_ACTIONS = (DaPreprocess, DaTrain, DaPredict, DaSave)

# --- declarations ----------------------------------------------------------


@dataclass(frozen=True)
class Parameter:
    name: str
    type_name: str
    span: Span = _span()


@dataclass(frozen=True)
class Message:
    name: str
    parameters: Tuple[Parameter, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class Port:
    direction: str  # "provided" | "required"
    name: str
    receives: Tuple[str, ...] = ()
    sends: Tuple[str, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class Property:
    name: str
    type_name: str
    initializer: Optional[Expr] = None
    span: Span = _span()


@dataclass(frozen=True)
class HyperParameter:
    key: str
    value: Union[int, float, str]
    quoted: bool = False
    span: Span = _span()


@dataclass(frozen=True)
class ModelAlgorithm:
    algorithm: str
    instance_name: str
    hyperparameters: Tuple[HyperParameter, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class DataAnalytics:
    name: str
    annotations: Tuple[Annotation, ...] = ()
    labels: Optional[bool] = None
    features: Tuple[str, ...] = ()
    prediction_results: Optional[str] = None
    dataset: Optional[str] = None
    automl: Optional[bool] = None
    sequential: Optional[bool] = None
    timestamps: Optional[bool] = None
    preprocess_feature_scaler: Optional[str] = None
    model_algorithm: Optional[ModelAlgorithm] = None
    training_results: Optional[str] = None
    blackbox_ml: Optional[bool] = None
    blackbox_ml_model: Optional[str] = None
    blackbox_import_algorithm: Optional[str] = None
    span: Span = _span()

    @property
    def dalib(self) -> Optional[str]:
        for annotation in self.annotations:
            if annotation.key == "dalib":
                return annotation.value
        return None


@dataclass(frozen=True)
class Event:
    port: str
    message: str
    var: Optional[str] = None
    span: Span = _span()


@dataclass(frozen=True)
class Transition:
    target: str
    event: Optional[Event] = None
    actions: Tuple[Action, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class State:
    name: str
    final: bool = False
    on_entry: Tuple[Action, ...] = ()
    on_exit: Tuple[Action, ...] = ()
    transitions: Tuple[Transition, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class StateChart:
    name: str
    initial: str
    on_entry: Tuple[Action, ...] = ()
    on_exit: Tuple[Action, ...] = ()
    states: Tuple[State, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class Thing:
    name: str
    is_fragment: bool = False
    includes: Tuple[str, ...] = ()
    annotations: Tuple[Annotation, ...] = ()
    messages: Tuple[Message, ...] = ()
    ports: Tuple[Port, ...] = ()
    properties: Tuple[Property, ...] = ()
    analytics: Tuple[DataAnalytics, ...] = ()
    statecharts: Tuple[StateChart, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class Instance:
    name: str
    thing: str
    span: Span = _span()


@dataclass(frozen=True)
class Connector:
    source_instance: str
    source_port: str
    target_instance: str
    target_port: str
    span: Span = _span()


@dataclass(frozen=True)
class Configuration:
    name: str
    annotations: Tuple[Annotation, ...] = ()
    instances: Tuple[Instance, ...] = ()
    connectors: Tuple[Connector, ...] = ()
    span: Span = _span()


@dataclass(frozen=True)
class Unit:
    things: Tuple[Thing, ...] = ()
    configurations: Tuple[Configuration, ...] = ()
    annotations: Tuple[Annotation, ...] = ()
    span: Span = _span()

    def merge(self, other: "Unit") -> "Unit":
        """Concatenate two units, as when several files are given on the command line."""
        return Unit(
            self.things + other.things,
            self.configurations + other.configurations,
            self.annotations + other.annotations,
            self.span,
        )
