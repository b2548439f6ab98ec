# mlq/services/validator.py
"""
Validity and completeness passes over a resolved model, plus the AutoML
defaulting pass. Each returns diagnostics instead of raising; an empty result
from both `check_valid` and `check_complete` means the model can be compiled
and run.
"""
import logging
from dataclasses import replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from . import ast
from .analytics import (
    FAMILY_KEYS, FAMILY_TASKS, SCALED_FAMILIES, DataAnalyticsSpec, Family, Task,
    hyperparameter_problem, normalize_family, normalize_scaler, prediction_type_ok,
)
from .diagnostics import NO_SPAN, Diagnostic, Span, error, note, sort_diagnostics, warning
from .expressions import binary_type, can_assign, literal_type, unary_type
from .metamodel import ResolvedModel, ResolvedThing

logger = logging.getLogger(__name__)

BUILTIN_DALIB = "builtin"


def _span_of(spec: DataAnalyticsSpec) -> Span:
    return spec.declaration.span if spec.declaration is not None else NO_SPAN


def walk_actions(actions: Sequence[ast.Action]) -> Iterator[ast.Action]:
    """Every action, including those nested in conditionals, in source order."""
    for action in actions:
        yield action
        if isinstance(action, ast.Conditional):
            yield from walk_actions(action.then)
            if action.otherwise is not None:
                yield from walk_actions(action.otherwise)


def thing_action_blocks(thing: ResolvedThing) -> Iterator[Tuple[Sequence[ast.Action], Optional[str], Optional[str]]]:
    """(actions, event variable, event message) for every block of the thing's statechart."""
    chart = thing.behavior
    if chart is None:
        return
    yield chart.on_entry, None, None
    yield chart.on_exit, None, None
    for state in chart.states:
        yield state.on_entry, None, None
        yield state.on_exit, None, None
        for t in state.transitions:
            yield t.actions, t.var, t.event[1] if t.event else None


class _TypeChecker:
    def __init__(self, thing: ResolvedThing, diagnostics: List[Diagnostic]):
        self.thing = thing
        self.diagnostics = diagnostics

    def infer(self, expr: ast.Expr, params: Dict[str, str]) -> Optional[str]:
        if isinstance(expr, ast.Literal):
            return literal_type(expr.value)
        if isinstance(expr, ast.Name):
            prop = self.thing.properties.get(expr.name)
            return prop.type_name if prop else None
        if isinstance(expr, ast.ParamRef):
            return params.get(expr.param)
        if isinstance(expr, ast.Unary):
            operand = self.infer(expr.operand, params)
            result = unary_type(expr.op, operand)
            if result is None and operand is not None:
                self.diagnostics.append(error("V1", f"operator '{expr.op}' is not defined for {operand}", expr.span))
            return result
        left = self.infer(expr.left, params)
        right = self.infer(expr.right, params)
        result = binary_type(expr.op, left, right)
        if result is None and left is not None and right is not None:
            self.diagnostics.append(error("V1", f"operator '{expr.op}' is not defined for {left} and {right}", expr.span))
        return result

    def expect(self, expr: ast.Expr, target: str, params: Dict[str, str], what: str, code: str = "V1"):
        actual = self.infer(expr, params)
        if actual is not None and not can_assign(target, actual):
            self.diagnostics.append(error(code, f"{what} expects {target}, got {actual}", expr.span))

    def actions(self, actions: Sequence[ast.Action], params: Dict[str, str]):
        thing = self.thing
        for action in actions:
            if isinstance(action, ast.Print):
                self.infer(action.value, params)
            elif isinstance(action, ast.Assign):
                prop = thing.properties.get(action.target)
                if prop is not None:
                    self.expect(action.value, prop.type_name, params, f"assignment to '{action.target}'")
            elif isinstance(action, ast.Send):
                message = thing.messages.get(action.message)
                if message is not None and thing.ports.get(action.port) is not None:
                    if not thing.sendable(action.port, action.message):
                        self.diagnostics.append(error(
                            "V3", f"port '{action.port}' cannot send message '{action.message}'", action.span))
                if message is not None:
                    if len(action.args) != len(message.parameters):
                        self.diagnostics.append(error(
                            "V1",
                            f"message '{message.name}' takes {len(message.parameters)} argument(s), got {len(action.args)}",
                            action.span,
                        ))
                    for arg, (pname, ptype) in zip(action.args, message.parameters):
                        self.expect(arg, ptype, params, f"argument '{pname}' of '{message.name}'")
            elif isinstance(action, ast.Conditional):
                self.expect(action.condition, "Boolean", params, "condition")
                self.actions(action.then, params)
                if action.otherwise is not None:
                    self.actions(action.otherwise, params)
            elif isinstance(action, ast.DaPredict):
                spec = thing.analytics.get(action.da)
                if spec is None:
                    continue  # reported by the completeness pass
                expected = spec.input_features
                if len(action.args) != len(expected):
                    self.diagnostics.append(error(
                        "V4",
                        f"da_predict {action.da} takes {len(expected)} argument(s), got {len(action.args)}",
                        action.span,
                    ))
                    for arg in action.args:
                        self.infer(arg, params)
                    continue
                for arg, (fname, ftype) in zip(action.args, expected):
                    self.expect(arg, ftype, params, f"feature '{fname}' of da_predict {action.da}", code="V4")


def _check_determinism(thing: ResolvedThing, diagnostics: List[Diagnostic]):
    chart = thing.behavior
    if chart is None:
        return
    for state in chart.states:
        seen = set()
        for t in state.transitions:
            if t.event in seen:
                what = "eventless transitions" if t.event is None else f"transitions on {t.event[0]}?{t.event[1]}"
                diagnostics.append(error("V2", f"state '{state.name}' has several {what}", t.span))
            seen.add(t.event)


def _check_connectors(model: ResolvedModel, diagnostics: List[Diagnostic]):
    for config in model.configurations.values():
        for c in config.connectors:
            (ia, pa), (ib, pb) = c.endpoints
            thing_a = model.things.get(config.instances[ia].thing)
            thing_b = model.things.get(config.instances[ib].thing)
            if thing_a is None or thing_b is None:
                continue
            port_a, port_b = thing_a.ports[pa], thing_b.ports[pb]
            if {port_a.direction, port_b.direction} != {"required", "provided"}:
                diagnostics.append(error(
                    "V6", f"connector {ia}.{pa} => {ib}.{pb} must join a required port to a provided port", c.span))
                continue
            for sender, sport, receiver, rport in ((thing_a, port_a, thing_b, port_b), (thing_b, port_b, thing_a, port_a)):
                for name in sport.sends:
                    if name not in rport.receives:
                        diagnostics.append(error(
                            "V6", f"message '{name}' sent on {sender.name}.{sport.name} is not received by {receiver.name}.{rport.name}",
                            c.span))
                    elif sender.messages[name].signature != receiver.messages[name].signature:
                        diagnostics.append(error(
                            "V6", f"message '{name}' has different parameters in '{sender.name}' and '{receiver.name}'", c.span))


def check_valid(model: ResolvedModel) -> List[Diagnostic]:
    """Type, determinism, send, prediction and connector rules (V1 to V6)."""
    diagnostics: List[Diagnostic] = []
    for thing in model.things.values():
        checker = _TypeChecker(thing, diagnostics)
        for prop in thing.properties.values():
            if prop.initializer is not None:
                checker.expect(prop.initializer, prop.type_name, {}, f"initializer of '{prop.name}'")
        for actions, var, message in thing_action_blocks(thing):
            params = dict(thing.messages[message].parameters) if message in thing.messages else {}
            checker.actions(actions, params)
        _check_determinism(thing, diagnostics)

        shared: Dict[str, str] = {}
        for spec in thing.analytics.values():
            if spec.prediction_results is not None and spec.prediction_type is not None and spec.task is not None:
                if not prediction_type_ok(spec):
                    diagnostics.append(error(
                        "V5",
                        f"prediction_results '{spec.prediction_results}' of type {spec.prediction_type} "
                        f"cannot hold a {spec.task.value} result",
                        _span_of(spec),
                    ))
            if spec.prediction_results is not None:
                if spec.prediction_results in shared:
                    diagnostics.append(warning(
                        "W001",
                        f"data_analytics '{spec.name}' and '{shared[spec.prediction_results]}' "
                        f"both write property '{spec.prediction_results}'",
                        _span_of(spec),
                    ))
                shared.setdefault(spec.prediction_results, spec.name)
    _check_connectors(model, diagnostics)
    return sort_diagnostics(diagnostics)


def _check_algorithm(spec: DataAnalyticsSpec, diagnostics: List[Diagnostic]):
    span = _span_of(spec)
    if spec.algorithm is None:
        diagnostics.append(error("C3", f"data_analytics '{spec.name}' declares no model_algorithm", span))
        return
    family = normalize_family(spec.algorithm)
    if family is None:
        diagnostics.append(error("C3", f"unknown model_algorithm '{spec.algorithm}'", span))
        return
    task = spec.task
    if task is not None and task not in FAMILY_TASKS[family]:
        diagnostics.append(error("C3", f"{family.value} cannot be used for {task.value}", span))
    seen = set()
    for key, value in spec.hyperparameters:
        if key in seen:
            diagnostics.append(error("C3", f"hyperparameter '{key}' given twice", span))
        seen.add(key)
        if key not in FAMILY_KEYS[family]:
            diagnostics.append(error("C3", f"unknown hyperparameter '{key}' for {family.value}", span))
            continue
        problem = hyperparameter_problem(key, value)
        if problem is not None:
            diagnostics.append(error("C3", problem, span))
    if family is Family.MLP and "loss" in seen and task is not None:
        loss = spec.hyperparameter("loss")
        if task is Task.REGRESSION and loss == "cross_entropy":
            diagnostics.append(error("C3", "cross-entropy loss needs a classification label", span))
        elif task is Task.CLASSIFICATION and loss == "squared_error":
            diagnostics.append(error("C3", "squared-error loss needs a numeric label", span))
    if family is Family.MLP and spec.hyperparameter("optimizer") == "adam":
        diagnostics.append(note("N002", f"'{spec.name}': optimizer adam runs as plain stochastic gradient descent", span))


def _check_blackbox(spec: DataAnalyticsSpec, thing: ResolvedThing, diagnostics: List[Diagnostic]):
    span = _span_of(spec)
    if spec.blackbox_ml_model is None:
        diagnostics.append(error("C4", f"black-box data_analytics '{spec.name}' needs blackbox_ml_model", span))
    if spec.blackbox_import_algorithm is None:
        diagnostics.append(error("C4", f"black-box data_analytics '{spec.name}' needs blackbox_import_algorithm", span))
    elif normalize_family(spec.blackbox_import_algorithm) is None:
        diagnostics.append(error("C4", f"unknown blackbox_import_algorithm '{spec.blackbox_import_algorithm}'", span))
    if spec.algorithm is not None:
        diagnostics.append(error("C4", f"black-box data_analytics '{spec.name}' must not declare model_algorithm", span))
    if spec.training_results is not None:
        diagnostics.append(error("C4", f"black-box data_analytics '{spec.name}' must not declare training_results", span))
    for actions, _, _ in thing_action_blocks(thing):
        for action in walk_actions(actions):
            if isinstance(action, (ast.DaTrain, ast.DaPreprocess)) and action.da == spec.name:
                verb = "da_train" if isinstance(action, ast.DaTrain) else "da_preprocess"
                diagnostics.append(error("C4", f"{verb} is not allowed on black-box data_analytics '{spec.name}'", action.span))


def check_complete(model: ResolvedModel, require_configuration: bool = False) -> List[Diagnostic]:
    """Completeness rules (C1 to C6); C6 only applies when a runnable configuration is required."""
    diagnostics: List[Diagnostic] = []
    instantiated = {inst.thing: inst for c in model.configurations.values() for inst in c.instances.values()}
    for thing in model.things.values():
        chart = thing.behavior
        if chart is not None and chart.state(chart.initial) is None:
            diagnostics.append(error("C1", f"initial state '{chart.initial}' of '{thing.name}' is not declared", chart.span))
        elif chart is None and thing.name in instantiated and not thing.builtin:
            diagnostics.append(error("C1", f"thing '{thing.name}' is instantiated but has no statechart", instantiated[thing.name].span))

        for spec in thing.analytics.values():
            span = _span_of(spec)
            if spec.dataset is None:
                diagnostics.append(error("C2", f"data_analytics '{spec.name}' declares no dataset", span))
            if not spec.features:
                diagnostics.append(error("C2", f"data_analytics '{spec.name}' declares no features", span))
            elif spec.labels and len(spec.features) < 2:
                diagnostics.append(error("C2", f"labelled data_analytics '{spec.name}' needs at least one input feature", span))
            if spec.prediction_results is None:
                diagnostics.append(error("C2", f"data_analytics '{spec.name}' declares no prediction_results", span))
            if spec.scaler is not None and normalize_scaler(spec.scaler) is None:
                diagnostics.append(error("C3", f"unknown preprocess_feature_scaler '{spec.scaler}'", span))
            if spec.blackbox_ml:
                _check_blackbox(spec, thing, diagnostics)
            else:
                _check_algorithm(spec, diagnostics)

        for actions, _, _ in thing_action_blocks(thing):
            for action in walk_actions(actions):
                if isinstance(action, ast.DA_ACTIONS) and action.da not in thing.analytics:
                    diagnostics.append(error("C5", f"unknown data_analytics '{action.da}' in thing '{thing.name}'", action.span))

    if require_configuration and not model.configurations:
        diagnostics.append(error("C6", "the model declares no configuration to compile or run"))
    return sort_diagnostics(diagnostics)


def apply_automl_defaults(model: ResolvedModel) -> Tuple[ResolvedModel, List[Diagnostic]]:
    """Fill unset data_analytics parameters of `automl ON` components; one note per change."""
    notes: List[Diagnostic] = []
    things = {}
    for name, thing in model.things.items():
        analytics = {}
        for da_name, spec in thing.analytics.items():
            if spec.automl:
                span = _span_of(spec)
                changes = {}
                if spec.sequential is None and spec.timestamps:
                    changes["sequential"] = True
                    notes.append(note("N001", f"automl: '{da_name}' has timestamps, sequential set to TRUE", span))
                if spec.scaler is None and spec.family in SCALED_FAMILIES:
                    changes["scaler"] = "standard"
                    notes.append(note("N001", f"automl: '{da_name}' uses {spec.family.value}, scaler set to standard", span))
                if spec.dalib is None or spec.dalib == "auto":
                    changes["dalib"] = BUILTIN_DALIB
                    notes.append(note("N001", f"automl: '{da_name}' runs on the {BUILTIN_DALIB} engine", span))
                if changes:
                    spec = spec.with_changes(**changes)
            analytics[da_name] = spec
        things[name] = replace(thing, analytics=analytics)
    if notes:
        logger.info(f"AutoML filled {len(notes)} parameter(s)")
    return ResolvedModel(model.annotations, things, model.configurations), sort_diagnostics(notes)
