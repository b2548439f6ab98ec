# mlq/services/emitter.py
"""
Canonical pretty-printer: `parse_model(emit_canonical(u)) == u` for every
well-formed unit. Layout is fixed (4-space indent, one declaration per line,
data_analytics fields in their documented order) so equal trees print equal text.
"""
from typing import List, Sequence, Tuple

from . import ast
from .lexer import escape

INDENT = "    "

# binding strength, loosest first; unary minus binds tighter than any binary op
PRECEDENCE = {
    "or": 1, "and": 2,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}
NOT_PRECEDENCE = 3
NEG_PRECEDENCE = 7
ATOM_PRECEDENCE = 8


def _format_number(value) -> str:
    if isinstance(value, float):
        text = repr(value)
        return text if any(c in text for c in ".en") else text + ".0"
    return str(value)


def _precedence(expr: ast.Expr) -> int:
    if isinstance(expr, ast.Binary):
        return PRECEDENCE[expr.op]
    if isinstance(expr, ast.Unary):
        return NOT_PRECEDENCE if expr.op == "not" else NEG_PRECEDENCE
    if isinstance(expr, ast.Literal) and isinstance(expr.value, (int, float)) and not isinstance(expr.value, bool) and expr.value < 0:
        return NEG_PRECEDENCE
    return ATOM_PRECEDENCE


def emit_expression(expr: ast.Expr) -> str:
    if isinstance(expr, ast.Literal):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        if isinstance(expr.value, str):
            return escape(expr.value)
        return _format_number(expr.value)
    if isinstance(expr, ast.Name):
        return expr.name
    if isinstance(expr, ast.ParamRef):
        return f"{expr.var}.{expr.param}"
    if isinstance(expr, ast.Unary):
        own = _precedence(expr)
        inner = emit_expression(expr.operand)
        if _precedence(expr.operand) < own:
            inner = f"({inner})"
        return f"not {inner}" if expr.op == "not" else f"-{inner}"
    own = PRECEDENCE[expr.op]
    left = emit_expression(expr.left)
    right = emit_expression(expr.right)
    # comparisons do not chain, so both sides need strictly tighter operands
    if _precedence(expr.left) < own or (own == 4 and _precedence(expr.left) == own):
        left = f"({left})"
    if _precedence(expr.right) <= own:
        right = f"({right})"
    return f"{left} {expr.op} {right}"


def _arguments(args: Sequence[ast.Expr]) -> str:
    return "(" + ", ".join(emit_expression(a) for a in args) + ")"


class _Writer:
    def __init__(self):
        self.lines: List[str] = []
        self.level = 0

    def line(self, text: str):
        self.lines.append(INDENT * self.level + text)

    def open(self, text: str):
        self.line(text + " {")
        self.level += 1

    def close(self):
        self.level -= 1
        self.line("}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n" if self.lines else ""

    # actions are always written as do/end blocks so nested ifs stay unambiguous

    def block(self, head: str, actions: Tuple[ast.Action, ...]):
        self.line(f"{head} do")
        self.level += 1
        for action in actions:
            self.action(action)
        self.level -= 1
        self.line("end")

    def action(self, action: ast.Action):
        if isinstance(action, ast.Print):
            self.line(f"print {emit_expression(action.value)}")
        elif isinstance(action, ast.Assign):
            self.line(f"{action.target} = {emit_expression(action.value)}")
        elif isinstance(action, ast.Send):
            self.line(f"{action.port}!{action.message}{_arguments(action.args)}")
        elif isinstance(action, ast.Conditional):
            self.block(f"if ({emit_expression(action.condition)})", action.then)
            if action.otherwise is not None:
                self.block("else", action.otherwise)
        elif isinstance(action, ast.DaPreprocess):
            self.line(f"da_preprocess {action.da}")
        elif isinstance(action, ast.DaTrain):
            self.line(f"da_train {action.da}")
        elif isinstance(action, ast.DaPredict):
            self.line(f"da_predict {action.da}{_arguments(action.args)}")
        elif isinstance(action, ast.DaSave):
            self.line(f"da_save {action.da}")
        else:
            raise TypeError(f"not an action: {action!r}")


def _annotations(annotations: Sequence[ast.Annotation]) -> str:
    return "".join(f" @{a.key} {escape(a.value)}" for a in annotations)


def _switch(value: bool, on: str, off: str) -> str:
    return on if value else off


def _hyperparameter(hp: ast.HyperParameter) -> str:
    if hp.quoted:
        return f"{hp.key} {escape(hp.value)}"
    if isinstance(hp.value, (int, float)):
        return f"{hp.key} {_format_number(hp.value)}"
    return f"{hp.key} {hp.value}"


def _emit_data_analytics(out: _Writer, da: ast.DataAnalytics):
    out.open(f"data_analytics {da.name}{_annotations(da.annotations)}")
    if da.labels is not None:
        out.line(f"labels {_switch(da.labels, 'ON', 'OFF')}")
    if da.features:
        out.line("features " + ", ".join(da.features))
    if da.prediction_results is not None:
        out.line(f"prediction_results {da.prediction_results}")
    if da.dataset is not None:
        out.line(f"dataset {escape(da.dataset)}")
    if da.automl is not None:
        out.line(f"automl {_switch(da.automl, 'ON', 'OFF')}")
    if da.sequential is not None:
        out.line(f"sequential {_switch(da.sequential, 'TRUE', 'FALSE')}")
    if da.timestamps is not None:
        out.line(f"timestamps {_switch(da.timestamps, 'ON', 'OFF')}")
    if da.preprocess_feature_scaler is not None:
        out.line(f"preprocess_feature_scaler {escape(da.preprocess_feature_scaler)}")
    if da.model_algorithm is not None:
        algo = da.model_algorithm
        params = ""
        if algo.hyperparameters:
            params = " (" + ", ".join(_hyperparameter(hp) for hp in algo.hyperparameters) + ")"
        out.line(f"model_algorithm {algo.algorithm} {algo.instance_name}{params}")
    if da.training_results is not None:
        out.line(f"training_results {escape(da.training_results)}")
    if da.blackbox_ml is not None:
        out.line(f"blackbox_ml {_switch(da.blackbox_ml, 'TRUE', 'FALSE')}")
    if da.blackbox_ml_model is not None:
        out.line(f"blackbox_ml_model {escape(da.blackbox_ml_model)}")
    if da.blackbox_import_algorithm is not None:
        out.line(f"blackbox_import_algorithm {escape(da.blackbox_import_algorithm)}")
    out.close()


def _emit_handlers(out: _Writer, on_entry, on_exit):
    if on_entry:
        out.block("on entry", on_entry)
    if on_exit:
        out.block("on exit", on_exit)


def _emit_statechart(out: _Writer, chart: ast.StateChart):
    out.open(f"statechart {chart.name} init {chart.initial}")
    _emit_handlers(out, chart.on_entry, chart.on_exit)
    for state in chart.states:
        out.open(("final " if state.final else "") + f"state {state.name}")
        _emit_handlers(out, state.on_entry, state.on_exit)
        for transition in state.transitions:
            head = f"transition -> {transition.target}"
            event = transition.event
            if event is not None:
                var = f"{event.var}: " if event.var else ""
                head += f" event {var}{event.port}?{event.message}"
            if transition.actions:
                out.block(f"{head} action", transition.actions)
            else:
                out.line(head)
        out.close()
    out.close()


def _emit_thing(out: _Writer, thing: ast.Thing):
    head = "thing " + ("fragment " if thing.is_fragment else "") + thing.name
    if thing.includes:
        head += " includes " + ", ".join(thing.includes)
    out.open(head + _annotations(thing.annotations))
    for message in thing.messages:
        params = ", ".join(f"{p.name} : {p.type_name}" for p in message.parameters)
        out.line(f"message {message.name}({params})")
    for port in thing.ports:
        out.open(f"{port.direction} port {port.name}")
        if port.receives:
            out.line("receives " + ", ".join(port.receives))
        if port.sends:
            out.line("sends " + ", ".join(port.sends))
        out.close()
    for prop in thing.properties:
        init = f" = {emit_expression(prop.initializer)}" if prop.initializer is not None else ""
        out.line(f"property {prop.name} : {prop.type_name}{init}")
    for da in thing.analytics:
        _emit_data_analytics(out, da)
    for chart in thing.statecharts:
        _emit_statechart(out, chart)
    out.close()


def _emit_configuration(out: _Writer, config: ast.Configuration):
    out.open(f"configuration {config.name}{_annotations(config.annotations)}")
    for instance in config.instances:
        out.line(f"instance {instance.name} : {instance.thing}")
    for c in config.connectors:
        out.line(f"connector {c.source_instance}.{c.source_port} => {c.target_instance}.{c.target_port}")
    out.close()


def emit_canonical(unit: ast.Unit) -> str:
    """Deterministic source text for `unit`."""
    out = _Writer()
    for annotation in unit.annotations:
        out.line(f"@{annotation.key} {escape(annotation.value)}")
    for thing in unit.things:
        _emit_thing(out, thing)
    for config in unit.configurations:
        _emit_configuration(out, config)
    return out.text()


def emit_thing(thing: ast.Thing) -> str:
    out = _Writer()
    _emit_thing(out, thing)
    return out.text()
