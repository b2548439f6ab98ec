# mlq/services/metamodel.py
"""
Name resolution and fragment flattening.

`resolve` turns an `ast.Unit` into a `ResolvedModel`: fragments are merged into
the things that include them, every port, message, property and state reference
is bound, and data_analytics blocks become `DataAnalyticsSpec` values. Checks
that the validator owns (connector compatibility, DA action targets, initial
state) are left to it so each rule reports under its own code.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from . import ast
from .analytics import DataAnalyticsSpec, normalize_key
from .diagnostics import CompileError, Diagnostic, NO_SPAN, Span, error, sort_diagnostics
from .expressions import TYPE_NAMES

logger = logging.getLogger(__name__)

EventKey = Tuple[str, str]  # (port, message)

CLOCK_FRAGMENT = "ClockMsgs"
CLOCK_THING = "Clock"
CLOCK_PORT = "ticks"
CLOCK_MESSAGE = "tick"


def _span():
    return field(default=NO_SPAN, compare=False, repr=False)


@dataclass(frozen=True)
class ResolvedMessage:
    name: str
    parameters: Tuple[Tuple[str, str], ...]
    span: Span = _span()

    @property
    def signature(self) -> Tuple[str, ...]:
        return tuple(t for _, t in self.parameters)


@dataclass(frozen=True)
class ResolvedPort:
    name: str
    direction: str
    receives: Tuple[str, ...]
    sends: Tuple[str, ...]
    span: Span = _span()


@dataclass(frozen=True)
class ResolvedProperty:
    name: str
    type_name: str
    initializer: Optional[ast.Expr] = None
    span: Span = _span()


@dataclass(frozen=True)
class ResolvedTransition:
    source: str
    target: str
    event: Optional[EventKey]
    var: Optional[str]
    actions: Tuple[ast.Action, ...]
    span: Span = _span()


@dataclass(frozen=True)
class ResolvedState:
    name: str
    final: bool
    on_entry: Tuple[ast.Action, ...]
    on_exit: Tuple[ast.Action, ...]
    transitions: Tuple[ResolvedTransition, ...]
    span: Span = _span()


@dataclass(frozen=True)
class StateChart:
    """Finite-state behavior: inputs, states, initial state, transitions, finals and actions."""

    name: str
    initial: str
    inputs: Tuple[EventKey, ...]
    states: Tuple[ResolvedState, ...]
    on_entry: Tuple[ast.Action, ...] = ()
    on_exit: Tuple[ast.Action, ...] = ()
    span: Span = _span()

    @property
    def state_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.states)

    @property
    def finals(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.states if s.final)

    @property
    def transitions(self) -> Tuple[ResolvedTransition, ...]:
        return tuple(t for s in self.states for t in s.transitions)

    def state(self, name: str) -> Optional[ResolvedState]:
        for s in self.states:
            if s.name == name:
                return s
        return None

    def transition_for(self, state: str, event: EventKey) -> Optional[ResolvedTransition]:
        current = self.state(state)
        if current is None:
            return None
        return next((t for t in current.transitions if t.event == event), None)

    def eventless(self, state: str) -> Optional[ResolvedTransition]:
        current = self.state(state)
        if current is None:
            return None
        return next((t for t in current.transitions if t.event is None), None)


@dataclass(frozen=True)
class ResolvedThing:
    name: str
    annotations: Tuple[Tuple[str, str], ...]
    messages: Dict[str, ResolvedMessage]
    ports: Dict[str, ResolvedPort]
    properties: Dict[str, ResolvedProperty]
    analytics: Dict[str, DataAnalyticsSpec]
    behavior: Optional[StateChart]
    builtin: bool = False
    span: Span = _span()

    def receivable(self, port: str, message: str) -> bool:
        p = self.ports.get(port)
        return p is not None and message in p.receives

    def sendable(self, port: str, message: str) -> bool:
        p = self.ports.get(port)
        return p is not None and message in p.sends


@dataclass(frozen=True)
class ResolvedInstance:
    name: str
    thing: str
    span: Span = _span()


@dataclass(frozen=True)
class ResolvedConnector:
    source_instance: str
    source_port: str
    target_instance: str
    target_port: str
    span: Span = _span()

    @property
    def endpoints(self) -> Tuple[Tuple[str, str], Tuple[str, str]]:
        return (self.source_instance, self.source_port), (self.target_instance, self.target_port)


@dataclass(frozen=True)
class Configuration:
    name: str
    annotations: Tuple[Tuple[str, str], ...]
    instances: Dict[str, ResolvedInstance]
    connectors: Tuple[ResolvedConnector, ...]
    span: Span = _span()

    def annotation(self, key: str) -> Optional[str]:
        return next((v for k, v in self.annotations if k == key), None)


@dataclass(frozen=True)
class ResolvedModel:
    annotations: Tuple[Tuple[str, str], ...]
    things: Dict[str, ResolvedThing]
    configurations: Dict[str, Configuration]

    def thing_of(self, config: Configuration, instance: str) -> ResolvedThing:
        return self.things[config.instances[instance].thing]

    def analytics(self) -> Iterable[Tuple[ResolvedThing, DataAnalyticsSpec]]:
        for thing in self.things.values():
            for spec in thing.analytics.values():
                yield thing, spec


# --- built-ins -------------------------------------------------------------

def builtin_things() -> Tuple[ast.Thing, ast.Thing]:
    fragment = ast.Thing(CLOCK_FRAGMENT, is_fragment=True, messages=(ast.Message(CLOCK_MESSAGE),))
    clock = ast.Thing(
        CLOCK_THING,
        includes=(CLOCK_FRAGMENT,),
        ports=(ast.Port("provided", CLOCK_PORT, sends=(CLOCK_MESSAGE,)),),
    )
    return fragment, clock


# --- flattening --------------------------------------------------------------

class _Scope:
    """Names visible to the actions of one statechart."""

    def __init__(self, thing: str, messages, ports, properties, diagnostics: List[Diagnostic]):
        self.thing = thing
        self.messages = messages
        self.ports = ports
        self.properties = properties
        self.diagnostics = diagnostics

    def report(self, message: str, span: Span, code: str = "R001"):
        self.diagnostics.append(error(code, message, span))

    def expression(self, expr: ast.Expr, event_var: Optional[str], event_message: Optional[str]):
        if isinstance(expr, ast.Name):
            if expr.name not in self.properties:
                self.report(f"unknown property '{expr.name}' in thing '{self.thing}'", expr.span)
        elif isinstance(expr, ast.ParamRef):
            if event_var is None or expr.var != event_var:
                self.report(f"'{expr.var}' is not the event variable of this transition", expr.span)
            elif event_message in self.messages:
                params = dict(self.messages[event_message].parameters)
                if expr.param not in params:
                    self.report(f"message '{event_message}' has no parameter '{expr.param}'", expr.span)
        elif isinstance(expr, ast.Unary):
            self.expression(expr.operand, event_var, event_message)
        elif isinstance(expr, ast.Binary):
            self.expression(expr.left, event_var, event_message)
            self.expression(expr.right, event_var, event_message)

    def actions(self, actions: Sequence[ast.Action], event_var: Optional[str] = None, event_message: Optional[str] = None):
        for action in actions:
            if isinstance(action, ast.Print):
                self.expression(action.value, event_var, event_message)
            elif isinstance(action, ast.Assign):
                if action.target not in self.properties:
                    self.report(f"unknown property '{action.target}' in thing '{self.thing}'", action.span)
                self.expression(action.value, event_var, event_message)
            elif isinstance(action, ast.Send):
                if action.port not in self.ports:
                    self.report(f"unknown port '{action.port}' in thing '{self.thing}'", action.span)
                if action.message not in self.messages:
                    self.report(f"unknown message '{action.message}' in thing '{self.thing}'", action.span)
                for arg in action.args:
                    self.expression(arg, event_var, event_message)
            elif isinstance(action, ast.Conditional):
                self.expression(action.condition, event_var, event_message)
                self.actions(action.then, event_var, event_message)
                if action.otherwise is not None:
                    self.actions(action.otherwise, event_var, event_message)
            elif isinstance(action, ast.DaPredict):
                for arg in action.args:
                    self.expression(arg, event_var, event_message)


def _include_order(thing: ast.Thing, fragments: Mapping[str, ast.Thing], diagnostics: List[Diagnostic]) -> List[ast.Thing]:
    """Fragments reachable from `thing` in include order (depth first, each once), then the thing."""
    order: List[ast.Thing] = []
    seen = set()

    def visit(node: ast.Thing, stack: Tuple[str, ...]):
        for name in node.includes:
            fragment = fragments.get(name)
            if fragment is None:
                diagnostics.append(error("R001", f"unknown fragment {name}", node.span))
                continue
            if not fragment.is_fragment:
                diagnostics.append(error("R005", f"'{name}' is not a thing fragment and cannot be included", node.span))
                continue
            if name in stack:
                cycle = " -> ".join(stack[stack.index(name):] + (name,))
                diagnostics.append(error("R003", f"include cycle: {cycle}", node.span))
                continue
            if name in seen:
                continue
            seen.add(name)
            visit(fragment, stack + (name,))
            order.append(fragment)

    visit(thing, (thing.name,))
    order.append(thing)
    return order


def _merge(kind: str, owner: str, items: Iterable, target: Dict, diagnostics: List[Diagnostic], origin: str):
    for item in items:
        if item.name in target:
            where = "" if origin == owner else f" (included from '{origin}')"
            diagnostics.append(error("R002", f"duplicate {kind} '{item.name}' in thing '{owner}'{where}", item.span))
            continue
        target[item.name] = item


def _check_type(type_name: str, span: Span, diagnostics: List[Diagnostic]):
    if type_name not in TYPE_NAMES:
        diagnostics.append(error("R001", f"unknown type '{type_name}'", span))


def _build_spec(da: ast.DataAnalytics, owner: str, properties: Mapping[str, ResolvedProperty],
                diagnostics: List[Diagnostic]) -> DataAnalyticsSpec:
    features = []
    for name in da.features:
        prop = properties.get(name)
        if prop is None:
            diagnostics.append(error("R001", f"unknown property '{name}' in features of '{da.name}'", da.span))
            continue
        features.append((name, prop.type_name))
    prediction_type = None
    if da.prediction_results is not None:
        prop = properties.get(da.prediction_results)
        if prop is None:
            diagnostics.append(error("R001", f"unknown property '{da.prediction_results}' in prediction_results of '{da.name}'", da.span))
        else:
            prediction_type = prop.type_name
    algo = da.model_algorithm
    return DataAnalyticsSpec(
        name=da.name,
        thing=owner,
        features=tuple(features),
        labels=bool(da.labels),
        prediction_results=da.prediction_results,
        prediction_type=prediction_type,
        dataset=da.dataset,
        automl=bool(da.automl),
        sequential=da.sequential,
        timestamps=bool(da.timestamps),
        scaler=da.preprocess_feature_scaler,
        algorithm=algo.algorithm if algo else None,
        instance_name=algo.instance_name if algo else None,
        hyperparameters=tuple((normalize_key(hp.key), hp.value) for hp in algo.hyperparameters) if algo else (),
        training_results=da.training_results,
        blackbox_ml=bool(da.blackbox_ml),
        blackbox_ml_model=da.blackbox_ml_model,
        blackbox_import_algorithm=da.blackbox_import_algorithm,
        dalib=da.dalib,
        declaration=da,
    )


def _resolve_chart(chart: ast.StateChart, scope: _Scope) -> StateChart:
    inputs: List[EventKey] = []
    for port in scope.ports.values():
        for message in port.receives:
            key = (port.name, message)
            if key not in inputs:
                inputs.append(key)

    names = set()
    for state in chart.states:
        if state.name in names:
            scope.report(f"duplicate state '{state.name}' in statechart '{chart.name}'", state.span, "R002")
        names.add(state.name)

    scope.actions(chart.on_entry)
    scope.actions(chart.on_exit)
    states = []
    for state in chart.states:
        scope.actions(state.on_entry)
        scope.actions(state.on_exit)
        transitions = []
        for t in state.transitions:
            if t.target not in names:
                scope.report(f"unknown state '{t.target}' in statechart '{chart.name}'", t.span)
            key, var, message = None, None, None
            if t.event is not None:
                ev = t.event
                key, var, message = (ev.port, ev.message), ev.var, ev.message
                port = scope.ports.get(ev.port)
                if port is None:
                    scope.report(f"unknown port '{ev.port}' in thing '{scope.thing}'", ev.span)
                elif ev.message not in scope.messages:
                    scope.report(f"unknown message '{ev.message}' in thing '{scope.thing}'", ev.span)
                elif ev.message not in port.receives:
                    scope.report(f"port '{ev.port}' does not receive message '{ev.message}'", ev.span, "R006")
            scope.actions(t.actions, var, message)
            transitions.append(ResolvedTransition(state.name, t.target, key, var, t.actions, t.span))
        states.append(ResolvedState(state.name, state.final, state.on_entry, state.on_exit, tuple(transitions), state.span))
    return StateChart(chart.name, chart.initial, tuple(inputs), tuple(states), chart.on_entry, chart.on_exit, chart.span)


def _flatten(thing: ast.Thing, fragments: Mapping[str, ast.Thing], diagnostics: List[Diagnostic],
             builtin: bool = False) -> ResolvedThing:
    order = _include_order(thing, fragments, diagnostics)
    messages: Dict[str, ast.Message] = {}
    ports: Dict[str, ast.Port] = {}
    properties: Dict[str, ast.Property] = {}
    analytics: Dict[str, ast.DataAnalytics] = {}
    chart: Optional[ast.StateChart] = thing.statecharts[0] if thing.statecharts else None
    for part in order:
        _merge("message", thing.name, part.messages, messages, diagnostics, part.name)
        _merge("port", thing.name, part.ports, ports, diagnostics, part.name)
        _merge("property", thing.name, part.properties, properties, diagnostics, part.name)
        _merge("data_analytics", thing.name, part.analytics, analytics, diagnostics, part.name)
        if chart is None and part.statecharts:
            chart = part.statecharts[0]

    resolved_messages = {}
    for m in messages.values():
        seen = set()
        for p in m.parameters:
            _check_type(p.type_name, p.span, diagnostics)
            if p.name in seen:
                diagnostics.append(error("R002", f"duplicate parameter '{p.name}' in message '{m.name}'", p.span))
            seen.add(p.name)
        resolved_messages[m.name] = ResolvedMessage(m.name, tuple((p.name, p.type_name) for p in m.parameters), m.span)

    resolved_ports = {}
    for p in ports.values():
        for name in p.receives + p.sends:
            if name not in messages:
                diagnostics.append(error("R001", f"unknown message '{name}' on port '{p.name}'", p.span))
        resolved_ports[p.name] = ResolvedPort(p.name, p.direction, p.receives, p.sends, p.span)

    resolved_properties = {}
    for p in properties.values():
        _check_type(p.type_name, p.span, diagnostics)
        resolved_properties[p.name] = ResolvedProperty(p.name, p.type_name, p.initializer, p.span)

    scope = _Scope(thing.name, resolved_messages, resolved_ports, resolved_properties, diagnostics)
    for p in properties.values():
        if p.initializer is not None:
            scope.expression(p.initializer, None, None)

    specs = {name: _build_spec(da, thing.name, resolved_properties, diagnostics) for name, da in analytics.items()}
    # a fragment chart is only meaningful inside the thing that includes it
    behavior = _resolve_chart(chart, scope) if chart is not None and not thing.is_fragment else None
    return ResolvedThing(
        thing.name,
        tuple((a.key, a.value) for a in thing.annotations),
        resolved_messages,
        resolved_ports,
        resolved_properties,
        specs,
        behavior,
        builtin,
        thing.span,
    )


def flatten_thing(thing: ast.Thing, fragments: Mapping[str, ast.Thing]) -> ResolvedThing:
    """Merge the included fragments into `thing` and bind its references; raises `CompileError`."""
    diagnostics: List[Diagnostic] = []
    resolved = _flatten(thing, fragments, diagnostics)
    if diagnostics:
        raise CompileError(sort_diagnostics(diagnostics))
    return resolved


def _include_cycles(things: Mapping[str, ast.Thing]) -> List[List[str]]:
    graph = nx.DiGraph()
    for thing in things.values():
        graph.add_node(thing.name)
        for name in thing.includes:
            if name in things:
                graph.add_edge(thing.name, name)
    return [sorted(c) for c in nx.simple_cycles(graph)]


def _resolve_configuration(config: ast.Configuration, declared: Mapping[str, ast.Thing],
                           things: Mapping[str, ResolvedThing], diagnostics: List[Diagnostic]) -> Configuration:
    instances: Dict[str, ResolvedInstance] = {}
    for inst in config.instances:
        if inst.name in instances:
            diagnostics.append(error("R002", f"duplicate instance '{inst.name}' in configuration '{config.name}'", inst.span))
            continue
        target = declared.get(inst.thing)
        if target is None:
            diagnostics.append(error("R001", f"unknown thing '{inst.thing}'", inst.span))
        elif target.is_fragment:
            diagnostics.append(error("R004", f"thing fragment '{inst.thing}' cannot be instantiated", inst.span))
        instances[inst.name] = ResolvedInstance(inst.name, inst.thing, inst.span)

    connectors = []
    for c in config.connectors:
        ok = True
        for inst_name, port_name in ((c.source_instance, c.source_port), (c.target_instance, c.target_port)):
            inst = instances.get(inst_name)
            if inst is None:
                diagnostics.append(error("R001", f"unknown instance '{inst_name}' in configuration '{config.name}'", c.span))
                ok = False
            elif inst.thing in things and port_name not in things[inst.thing].ports:
                diagnostics.append(error("R001", f"unknown port '{port_name}' on instance '{inst_name}'", c.span))
                ok = False
        if ok:
            connectors.append(ResolvedConnector(c.source_instance, c.source_port, c.target_instance, c.target_port, c.span))
    return Configuration(config.name, tuple((a.key, a.value) for a in config.annotations), instances, tuple(connectors), config.span)


def resolve(unit: ast.Unit, path: Optional[str] = None) -> ResolvedModel:
    """Bind every reference of `unit`; raises `CompileError` listing all resolution problems."""
    diagnostics: List[Diagnostic] = []
    declared: Dict[str, ast.Thing] = {}
    for thing in unit.things:
        if thing.name in declared:
            diagnostics.append(error("R002", f"duplicate thing '{thing.name}'", thing.span))
            continue
        declared[thing.name] = thing
    builtin_names = set()
    for thing in builtin_things():
        if thing.name not in declared:
            declared[thing.name] = thing
            builtin_names.add(thing.name)

    cyclic = set()
    for cycle in _include_cycles(declared):
        cyclic.update(cycle)
        head = declared[cycle[0]]
        diagnostics.append(error("R003", "include cycle: " + " -> ".join(cycle + [cycle[0]]), head.span))

    things: Dict[str, ResolvedThing] = {}
    for thing in declared.values():
        local: List[Diagnostic] = []
        resolved = _flatten(thing, declared, local, builtin=thing.name in builtin_names)
        # cycles are already reported once above
        diagnostics.extend(d for d in local if not (d.code == "R003" and thing.name in cyclic))
        if not thing.is_fragment:
            things[thing.name] = resolved

    configurations: Dict[str, Configuration] = {}
    for config in unit.configurations:
        if config.name in configurations:
            diagnostics.append(error("R002", f"duplicate configuration '{config.name}'", config.span))
            continue
        configurations[config.name] = _resolve_configuration(config, declared, things, diagnostics)

    if diagnostics:
        unique = list(dict.fromkeys(diagnostics))
        raise CompileError(sort_diagnostics(d.with_path(path) for d in unique))
    logger.info(f"Resolved {len(things)} thing(s) and {len(configurations)} configuration(s)")
    return ResolvedModel(tuple((a.key, a.value) for a in unit.annotations), things, configurations)


# --- re-emission -------------------------------------------------------------

def _is_plain_word(value: str) -> bool:
    return value.isidentifier() and value.isascii()


def spec_to_ast(spec: DataAnalyticsSpec) -> ast.DataAnalytics:
    algo = None
    if spec.algorithm is not None:
        params = tuple(
            ast.HyperParameter(k, v, isinstance(v, str) and not _is_plain_word(v))
            for k, v in spec.hyperparameters
        )
        algo = ast.ModelAlgorithm(spec.algorithm, spec.instance_name or spec.name, params)
    annotations = ()
    if spec.declaration is not None:
        annotations = tuple(a for a in spec.declaration.annotations if a.key != "dalib")
    if spec.dalib is not None:
        annotations += (ast.Annotation("dalib", spec.dalib),)
    return ast.DataAnalytics(
        name=spec.name,
        annotations=annotations,
        labels=spec.labels,
        features=tuple(n for n, _ in spec.features),
        prediction_results=spec.prediction_results,
        dataset=spec.dataset,
        automl=spec.automl,
        sequential=spec.sequential,
        timestamps=spec.timestamps,
        preprocess_feature_scaler=spec.scaler,
        model_algorithm=algo,
        training_results=spec.training_results,
        blackbox_ml=spec.blackbox_ml,
        blackbox_ml_model=spec.blackbox_ml_model,
        blackbox_import_algorithm=spec.blackbox_import_algorithm,
    )


def _chart_to_ast(chart: StateChart) -> ast.StateChart:
    states = []
    for s in chart.states:
        transitions = tuple(
            ast.Transition(t.target, ast.Event(t.event[0], t.event[1], t.var) if t.event else None, t.actions)
            for t in s.transitions
        )
        states.append(ast.State(s.name, s.final, s.on_entry, s.on_exit, transitions))
    return ast.StateChart(chart.name, chart.initial, chart.on_entry, chart.on_exit, tuple(states))


def to_ast(model: ResolvedModel) -> ast.Unit:
    """Flattened syntax for a resolved model; built-in things are left out."""
    things = []
    for thing in model.things.values():
        if thing.builtin:
            continue
        things.append(ast.Thing(
            thing.name,
            annotations=tuple(ast.Annotation(k, v) for k, v in thing.annotations),
            messages=tuple(ast.Message(m.name, tuple(ast.Parameter(n, t) for n, t in m.parameters)) for m in thing.messages.values()),
            ports=tuple(ast.Port(p.direction, p.name, p.receives, p.sends) for p in thing.ports.values()),
            properties=tuple(ast.Property(p.name, p.type_name, p.initializer) for p in thing.properties.values()),
            analytics=tuple(spec_to_ast(s) for s in thing.analytics.values()),
            statecharts=(_chart_to_ast(thing.behavior),) if thing.behavior else (),
        ))
    configurations = tuple(
        ast.Configuration(
            c.name,
            tuple(ast.Annotation(k, v) for k, v in c.annotations),
            tuple(ast.Instance(i.name, i.thing) for i in c.instances.values()),
            tuple(ast.Connector(*x.endpoints[0], *x.endpoints[1]) for x in c.connectors),
        )
        for c in model.configurations.values()
    )
    return ast.Unit(tuple(things), configurations, tuple(ast.Annotation(k, v) for k, v in model.annotations))


def merge_units(units: Sequence[ast.Unit]) -> ast.Unit:
    merged = ast.Unit()
    for unit in units:
        merged = merged.merge(unit)
    return merged
