# mlq/services/codegen.py
"""
Lowering of a validated model to replayable execution plans.

A plan (`.mlqplan`) is line-delimited text: a `MLQPLAN/1` header, one
`<record> <compact json>` line per table row, and an `end` trailer carrying the
record count and a digest of everything above it. Statecharts become dense
state x event tables; action blocks become flat instruction programs that the
plan VM runs against the same `ActionContext` as the interpreter.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ValidationError

from mlq.app.schemas import Manifest, ManifestEntry
from mlq.utils.helpers import canonical_json, rebase, sha256_text, write_text

from . import ast
from .analytics import DataAnalyticsSpec
from .diagnostics import CompileError, Diagnostic
from .metamodel import CLOCK_THING, Configuration, ResolvedModel, ResolvedThing, StateChart
from .runtime import ActionContext, Behavior, InstanceSpec, Network, RunOptions
from .validator import apply_automl_defaults, check_complete, check_valid

logger = logging.getLogger(__name__)

PLAN_FORMAT = "MLQPLAN/1"
RESOLVED_FORMAT = "MLQRESOLVED/1"
PLAN_EXTENSION = ".mlqplan"
MANIFEST = "manifest.json"

NONE = -1  # empty table cell / no program

Instruction = List[Any]


class PlanError(Exception):
    """A plan document is corrupted or of an unsupported version."""


# --- records ---------------------------------------------------------------------

class PlanHeader(BaseModel):
    configuration: str
    annotations: List[List[str]]
    model_annotations: List[List[str]]


class PortRecord(BaseModel):
    name: str
    direction: str
    receives: List[str]
    sends: List[str]


class ThingRecord(BaseModel):
    name: str
    builtin: bool
    clock: bool
    annotations: List[List[str]]
    properties: List[List[str]]  # [name, type] per slot
    initializers: List[int]  # program id per slot, or -1
    messages: Dict[str, List[List[str]]]
    ports: List[PortRecord]


class AnalyticsRecord(BaseModel):
    thing: str
    spec: Dict[str, Any]


class ChartRecord(BaseModel):
    thing: str
    name: str
    initial: int
    states: List[str]
    finals: List[int]
    events: List[List[str]]
    table: List[List[int]]
    eventless: List[int]
    chart_entry: int
    chart_exit: int
    state_entry: List[int]
    state_exit: List[int]


class TransitionRecord(BaseModel):
    thing: str
    id: int
    source: int
    target: int
    event: int
    var: Optional[str] = None
    program: int


class ProgramRecord(BaseModel):
    thing: str
    id: int
    code: List[List[Any]]


class InstanceRecord(BaseModel):
    name: str
    thing: str


class ConnectorRecord(BaseModel):
    source: List[str]
    target: List[str]


RECORD_TYPES: Dict[str, type] = {
    "plan": PlanHeader,
    "thing": ThingRecord,
    "analytics": AnalyticsRecord,
    "chart": ChartRecord,
    "transition": TransitionRecord,
    "program": ProgramRecord,
    "instance": InstanceRecord,
    "connector": ConnectorRecord,
}


@dataclass
class ExecutionPlan:
    header: PlanHeader
    things: List[ThingRecord] = field(default_factory=list)
    analytics: Dict[str, List[AnalyticsRecord]] = field(default_factory=dict)
    charts: Dict[str, ChartRecord] = field(default_factory=dict)
    transitions: Dict[str, List[TransitionRecord]] = field(default_factory=dict)
    programs: Dict[str, List[ProgramRecord]] = field(default_factory=dict)
    instances: List[InstanceRecord] = field(default_factory=list)
    connectors: List[ConnectorRecord] = field(default_factory=list)

    def records(self) -> List[Tuple[str, BaseModel]]:
        rows: List[Tuple[str, BaseModel]] = [("plan", self.header)]
        for thing in self.things:
            rows.append(("thing", thing))
            rows.extend(("analytics", r) for r in self.analytics.get(thing.name, ()))
            if thing.name in self.charts:
                rows.append(("chart", self.charts[thing.name]))
            rows.extend(("transition", r) for r in self.transitions.get(thing.name, ()))
            rows.extend(("program", r) for r in self.programs.get(thing.name, ()))
        rows.extend(("instance", r) for r in self.instances)
        rows.extend(("connector", r) for r in self.connectors)
        return rows

    def to_text(self) -> str:
        return _document(PLAN_FORMAT, [f"{kind} {canonical_json(r.model_dump())}" for kind, r in self.records()])

    def thing(self, name: str) -> ThingRecord:
        return next(t for t in self.things if t.name == name)


def _document(header: str, lines: List[str]) -> str:
    body = [header] + lines
    trailer = canonical_json({"records": len(lines), "digest": sha256_text("\n".join(body))})
    return "\n".join(body + [f"end {trailer}"]) + "\n"


# --- data analytics descriptors ------------------------------------------------------

_SPEC_FIELDS = tuple(f for f in DataAnalyticsSpec.__dataclass_fields__ if f != "declaration")


def spec_to_dict(spec: DataAnalyticsSpec) -> Dict[str, Any]:
    data = {name: getattr(spec, name) for name in _SPEC_FIELDS}
    data["features"] = [list(f) for f in spec.features]
    data["hyperparameters"] = [[k, v] for k, v in spec.hyperparameters]
    return data


def spec_from_dict(data: Mapping[str, Any]) -> DataAnalyticsSpec:
    values = dict(data)
    values["features"] = tuple(tuple(f) for f in values["features"])
    values["hyperparameters"] = tuple((k, v) for k, v in values["hyperparameters"])
    return DataAnalyticsSpec(**values)


def resolve_paths(spec: DataAnalyticsSpec, root: Optional[str]) -> DataAnalyticsSpec:
    """`spec` with its dataset, training log and black-box paths rebased on `root` and made absolute."""
    if root is None:
        return spec

    def absolute(path: Optional[str]) -> Optional[str]:
        return str(Path(rebase(path, root)).absolute()) if path else path

    return spec.with_changes(dataset=absolute(spec.dataset), training_results=absolute(spec.training_results),
                             blackbox_ml_model=absolute(spec.blackbox_ml_model))


# --- lowering ------------------------------------------------------------------------

class _Assembler:
    """Compiles expressions and action blocks of one thing into postfix programs."""

    def __init__(self, thing: str, slots: Mapping[str, int]):
        self.thing = thing
        self.slots = slots
        self.programs: List[ProgramRecord] = []

    def program(self, code: List[Instruction]) -> int:
        self.programs.append(ProgramRecord(thing=self.thing, id=len(self.programs), code=code))
        return len(self.programs) - 1

    def block(self, actions: Sequence[ast.Action]) -> int:
        code: List[Instruction] = []
        self.actions(actions, code)
        return self.program(code)

    def expression(self, expr: ast.Expr, code: List[Instruction]):
        if isinstance(expr, ast.Literal):
            code.append(["push", expr.value])
        elif isinstance(expr, ast.Name):
            code.append(["load", self.slots[expr.name]])
        elif isinstance(expr, ast.ParamRef):
            code.append(["param", expr.param])
        elif isinstance(expr, ast.Unary):
            self.expression(expr.operand, code)
            code.append(["unary", expr.op])
        else:
            self.expression(expr.left, code)
            self.expression(expr.right, code)
            code.append(["binary", expr.op])

    def actions(self, actions: Sequence[ast.Action], code: List[Instruction]):
        for action in actions:
            if isinstance(action, ast.Print):
                self.expression(action.value, code)
                code.append(["print"])
            elif isinstance(action, ast.Assign):
                self.expression(action.value, code)
                code.append(["store", self.slots[action.target]])
            elif isinstance(action, ast.Send):
                for arg in action.args:
                    self.expression(arg, code)
                code.append(["send", action.port, action.message, len(action.args)])
            elif isinstance(action, ast.Conditional):
                self.expression(action.condition, code)
                branch = len(code)
                code.append(["branch", branch + 1, NONE])
                self.actions(action.then, code)
                if action.otherwise is not None:
                    jump = len(code)
                    code.append(["jump", NONE])
                    code[branch][2] = len(code)
                    self.actions(action.otherwise, code)
                    code[jump][1] = len(code)
                else:
                    code[branch][2] = len(code)
            elif isinstance(action, ast.DaPredict):
                for arg in action.args:
                    self.expression(arg, code)
                code.append(["da", "predict", action.da, len(action.args) if action.args else NONE])
            else:
                kind = {ast.DaPreprocess: "preprocess", ast.DaTrain: "train", ast.DaSave: "save"}[type(action)]
                code.append(["da", kind, action.da, NONE])


@dataclass
class LoweredChart:
    chart: ChartRecord
    transitions: List[TransitionRecord]


def lower_chart(chart: StateChart, thing: str, assembler: _Assembler) -> LoweredChart:
    """Number states and events in declaration order and fill the transition table."""
    states = list(chart.state_names)
    index = {name: i for i, name in enumerate(states)}
    events = [list(e) for e in chart.inputs]
    event_index = {tuple(e): i for i, e in enumerate(events)}
    table = [[NONE] * len(events) for _ in states]
    eventless = [NONE] * len(states)

    chart_entry = assembler.block(chart.on_entry)
    chart_exit = assembler.block(chart.on_exit)
    state_entry, state_exit = [], []
    for state in chart.states:
        state_entry.append(assembler.block(state.on_entry))
        state_exit.append(assembler.block(state.on_exit))

    transitions: List[TransitionRecord] = []
    for state in chart.states:
        row = index[state.name]
        for t in state.transitions:
            tid = len(transitions)
            event = NONE if t.event is None else event_index[t.event]
            transitions.append(TransitionRecord(
                thing=thing, id=tid, source=row, target=index[t.target], event=event,
                var=t.var, program=assembler.block(t.actions),
            ))
            # first declared transition wins, as in the interpreter
            if event == NONE:
                if eventless[row] == NONE:
                    eventless[row] = tid
            elif table[row][event] == NONE:
                table[row][event] = tid

    record = ChartRecord(
        thing=thing, name=chart.name, initial=index[chart.initial], states=states,
        finals=[index[n] for n in chart.finals], events=events, table=table, eventless=eventless,
        chart_entry=chart_entry, chart_exit=chart_exit, state_entry=state_entry, state_exit=state_exit,
    )
    return LoweredChart(record, transitions)


def _lower_thing(thing: ResolvedThing, plan: ExecutionPlan, dataset_root: Optional[str] = None):
    slots = {name: i for i, name in enumerate(thing.properties)}
    assembler = _Assembler(thing.name, slots)
    initializers = []
    for prop in thing.properties.values():
        if prop.initializer is None:
            initializers.append(NONE)
            continue
        code: List[Instruction] = []
        assembler.expression(prop.initializer, code)
        code.append(["init", slots[prop.name]])
        initializers.append(assembler.program(code))
    plan.things.append(ThingRecord(
        name=thing.name,
        builtin=thing.builtin,
        clock=thing.builtin and thing.name == CLOCK_THING,
        annotations=[list(a) for a in thing.annotations],
        properties=[[p.name, p.type_name] for p in thing.properties.values()],
        initializers=initializers,
        messages={m.name: [list(p) for p in m.parameters] for m in thing.messages.values()},
        ports=[PortRecord(name=p.name, direction=p.direction, receives=list(p.receives), sends=list(p.sends))
               for p in thing.ports.values()],
    ))
    plan.analytics[thing.name] = [AnalyticsRecord(thing=thing.name, spec=spec_to_dict(resolve_paths(s, dataset_root)))
                                  for s in thing.analytics.values()]
    if thing.behavior is not None:
        lowered = lower_chart(thing.behavior, thing.name, assembler)
        plan.charts[thing.name] = lowered.chart
        plan.transitions[thing.name] = lowered.transitions
    plan.programs[thing.name] = assembler.programs


def lower_configuration(model: ResolvedModel, config: Configuration, dataset_root: Optional[str] = None) -> ExecutionPlan:
    """Plan of `config`; with `dataset_root`, relative analytics paths are resolved against it."""
    plan = ExecutionPlan(PlanHeader(
        configuration=config.name,
        annotations=[list(a) for a in config.annotations],
        model_annotations=[list(a) for a in model.annotations],
    ))
    used = {inst.thing for inst in config.instances.values()}
    for thing in model.things.values():
        if thing.name in used:
            _lower_thing(thing, plan, dataset_root)
    plan.instances = [InstanceRecord(name=i.name, thing=i.thing) for i in config.instances.values()]
    plan.connectors = [ConnectorRecord(source=[c.source_instance, c.source_port], target=[c.target_instance, c.target_port])
                       for c in config.connectors]
    return plan


# --- backends -----------------------------------------------------------------------

@dataclass(frozen=True)
class Backend:
    name: str
    emit: Callable[[ResolvedModel, Optional[str]], Dict[str, str]]


def _emit_plans(model: ResolvedModel, dataset_root: Optional[str] = None) -> Dict[str, str]:
    return {f"{name}{PLAN_EXTENSION}": lower_configuration(model, config, dataset_root).to_text()
            for name, config in model.configurations.items()}


def _emit_resolved(model: ResolvedModel, dataset_root: Optional[str] = None) -> Dict[str, str]:
    """The flattened model as line records, for inspection."""
    lines = []
    for thing in model.things.values():
        chart = thing.behavior
        lines.append("thing " + canonical_json({
            "name": thing.name,
            "builtin": thing.builtin,
            "messages": {m.name: [list(p) for p in m.parameters] for m in thing.messages.values()},
            "ports": [[p.name, p.direction, list(p.receives), list(p.sends)] for p in thing.ports.values()],
            "properties": [[p.name, p.type_name] for p in thing.properties.values()],
            "statechart": None if chart is None else {
                "name": chart.name,
                "initial": chart.initial,
                "states": list(chart.state_names),
                "finals": list(chart.finals),
                "transitions": [[t.source, t.target, list(t.event) if t.event else None] for t in chart.transitions],
            },
        }))
        lines.extend("analytics " + canonical_json(spec_to_dict(resolve_paths(s, dataset_root))) for s in thing.analytics.values())
    for config in model.configurations.values():
        lines.append("configuration " + canonical_json({
            "name": config.name,
            "annotations": [list(a) for a in config.annotations],
            "instances": [[i.name, i.thing] for i in config.instances.values()],
            "connectors": [[*c.endpoints[0], *c.endpoints[1]] for c in config.connectors],
        }))
    return {"model.resolved": _document(RESOLVED_FORMAT, lines)}


BACKENDS: Dict[str, Backend] = {
    "plan": Backend("plan", _emit_plans),
    "resolved": Backend("resolved", _emit_resolved),
}


def manifest_for(backend: str, artifacts: Mapping[str, str]) -> Manifest:
    entries = [
        ManifestEntry(path=path, sha256=sha256_text(text), bytes=len(text.encode("utf-8")))
        for path, text in sorted(artifacts.items())
    ]
    return Manifest(backend=backend, artifacts=entries)


def compile_model(model: ResolvedModel, backend: str = "plan", dataset_root: Optional[str] = None) -> Dict[str, str]:
    """Artifacts (relative path -> text) of `backend`, manifest included; raises `CompileError`.

    With `dataset_root`, dataset, training log and black-box paths are written resolved.
    """
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend '{backend}' (choose from {', '.join(BACKENDS)})")
    model, _ = apply_automl_defaults(model)
    problems: List[Diagnostic] = [d for d in check_valid(model) + check_complete(model, require_configuration=True)
                                  if d.is_error]
    if problems:
        raise CompileError(problems)
    artifacts = BACKENDS[backend].emit(model, dataset_root)
    manifest = manifest_for(backend, artifacts)
    artifacts[MANIFEST] = json.dumps(manifest.model_dump(), indent=2, sort_keys=True) + "\n"
    logger.info(f"Backend '{backend}' produced {len(artifacts) - 1} artifact(s)")
    return artifacts


def write_artifacts(artifacts: Mapping[str, str], out_dir: str) -> List[str]:
    paths = []
    for name in sorted(artifacts):
        path = f"{out_dir.rstrip('/')}/{name}"
        write_text(path, artifacts[name])
        paths.append(path)
    return paths


# --- loading -------------------------------------------------------------------------

def _check_ranges(plan: ExecutionPlan):
    things = {t.name for t in plan.things}
    for thing in plan.things:
        programs = plan.programs.get(thing.name, [])
        transitions = plan.transitions.get(thing.name, [])

        def program_ok(pid: int, allow_none: bool = False) -> bool:
            return (allow_none and pid == NONE) or 0 <= pid < len(programs)

        if any(p.id != i for i, p in enumerate(programs)) or any(t.id != i for i, t in enumerate(transitions)):
            raise PlanError(f"ids of thing '{thing.name}' are not dense")
        if len(thing.initializers) != len(thing.properties) or not all(program_ok(p, True) for p in thing.initializers):
            raise PlanError(f"initializer table of '{thing.name}' is out of range")
        for program in programs:
            for instr in program.code:
                if instr and instr[0] in ("load", "store", "init") and not 0 <= instr[1] < len(thing.properties):
                    raise PlanError(f"slot out of range in program {program.id} of '{thing.name}'")
                if instr and instr[0] in ("branch", "jump") and not all(0 <= t <= len(program.code) for t in instr[1:]):
                    raise PlanError(f"jump out of range in program {program.id} of '{thing.name}'")
        chart = plan.charts.get(thing.name)
        if chart is None:
            continue
        n_states, n_events = len(chart.states), len(chart.events)
        cells = [c for row in chart.table for c in row] + chart.eventless
        if (
            not 0 <= chart.initial < n_states
            or len(chart.table) != n_states
            or any(len(row) != n_events for row in chart.table)
            or len(chart.eventless) != n_states
            or any(c != NONE and not 0 <= c < len(transitions) for c in cells)
            or any(not 0 <= f < n_states for f in chart.finals)
            or not program_ok(chart.chart_entry) or not program_ok(chart.chart_exit)
            or len(chart.state_entry) != n_states or len(chart.state_exit) != n_states
            or not all(program_ok(p) for p in chart.state_entry + chart.state_exit)
            or any(not (0 <= t.source < n_states and 0 <= t.target < n_states and program_ok(t.program)
                        and (t.event == NONE or 0 <= t.event < n_events)) for t in transitions)
        ):
            raise PlanError(f"table of '{thing.name}' is out of range")
    for inst in plan.instances:
        if inst.thing not in things:
            raise PlanError(f"instance '{inst.name}' refers to unknown thing '{inst.thing}'")
    names = {i.name for i in plan.instances}
    for c in plan.connectors:
        if c.source[0] not in names or c.target[0] not in names:
            raise PlanError("connector refers to an unknown instance")


def load_plan(text: str) -> ExecutionPlan:
    """Parse and check a plan document; raises `PlanError` on version mismatch or corruption."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("MLQPLAN/"):
        raise PlanError("not a plan document")
    if lines[0] != PLAN_FORMAT:
        raise PlanError(f"unsupported plan version '{lines[0]}' (expected {PLAN_FORMAT})")
    if len(lines) < 2 or not lines[-1].startswith("end "):
        raise PlanError("truncated plan document")
    try:
        trailer = json.loads(lines[-1][4:])
    except json.JSONDecodeError:
        raise PlanError("corrupted plan trailer")
    body = lines[1:-1]
    if not isinstance(trailer, dict) or trailer.get("records") != len(body) \
            or trailer.get("digest") != sha256_text("\n".join(lines[:-1])):
        raise PlanError("plan document does not match its trailer")

    plan: Optional[ExecutionPlan] = None
    for number, line in enumerate(body, start=2):
        kind, _, payload = line.partition(" ")
        record_type = RECORD_TYPES.get(kind)
        try:
            record = record_type.model_validate(json.loads(payload)) if record_type else None
        except (json.JSONDecodeError, ValidationError) as e:
            raise PlanError(f"corrupted record at line {number}: {e}")
        if record is None or (plan is None) != (kind == "plan"):
            raise PlanError(f"unexpected record '{kind}' at line {number}")
        if kind == "plan":
            plan = ExecutionPlan(record)
        elif kind == "thing":
            plan.things.append(record)
        elif kind == "analytics":
            plan.analytics.setdefault(record.thing, []).append(record)
        elif kind == "chart":
            plan.charts[record.thing] = record
        elif kind == "transition":
            plan.transitions.setdefault(record.thing, []).append(record)
        elif kind == "program":
            plan.programs.setdefault(record.thing, []).append(record)
        elif kind == "instance":
            plan.instances.append(record)
        else:
            plan.connectors.append(record)
    if plan is None:
        raise PlanError("plan document has no header record")
    _check_ranges(plan)
    return plan


# --- plan VM ---------------------------------------------------------------------------

class PlanBehavior(Behavior):
    """Table-driven replay of one lowered statechart."""

    def __init__(self, thing: ThingRecord, chart: ChartRecord, transitions: List[TransitionRecord],
                 programs: List[ProgramRecord]):
        self.thing = thing
        self.chart = chart
        self.transitions = transitions
        self.programs = programs
        self.slots = [name for name, _ in thing.properties]
        self.index = {name: i for i, name in enumerate(chart.states)}
        self.events = {tuple(e): i for i, e in enumerate(chart.events)}
        self.initial = chart.states[chart.initial]

    def run(self, pid: int, ctx: ActionContext, binding: Mapping[str, Any]):
        code = self.programs[pid].code
        stack: List[Any] = []
        pc = 0
        while pc < len(code):
            op, *operands = code[pc]
            pc += 1
            if op == "push":
                stack.append(operands[0])
            elif op == "load":
                stack.append(ctx.load(self.slots[operands[0]]))
            elif op == "param":
                stack.append(ctx.param(binding, operands[0]))
            elif op == "unary":
                stack.append(ctx.unary(operands[0], stack.pop()))
            elif op == "binary":
                right = stack.pop()
                stack.append(ctx.binary(operands[0], stack.pop(), right))
            elif op == "store":
                ctx.assign(self.slots[operands[0]], stack.pop())
            elif op == "init":
                ctx.assign(self.slots[operands[0]], stack.pop(), quiet=True)
            elif op == "print":
                ctx.print(stack.pop())
            elif op == "send":
                port, message, argc = operands
                args = stack[len(stack) - argc:] if argc else []
                del stack[len(stack) - argc:]
                ctx.send(port, message, args)
            elif op == "branch":
                pc = operands[0] if ctx.test(stack.pop()) else operands[1]
            elif op == "jump":
                pc = operands[0]
            elif op == "da":
                kind, name, argc = operands
                args = None
                if argc != NONE:
                    args = stack[len(stack) - argc:]
                    del stack[len(stack) - argc:]
                ctx.da(kind, name, args)
            else:
                raise PlanError(f"unknown instruction '{op}'")

    def initialize(self, ctx):
        for pid in self.thing.initializers:
            if pid != NONE:
                self.run(pid, ctx, {})

    def chart_entry(self, ctx):
        self.run(self.chart.chart_entry, ctx, {})

    def chart_exit(self, ctx):
        self.run(self.chart.chart_exit, ctx, {})

    def state_entry(self, ctx, state):
        self.run(self.chart.state_entry[self.index[state]], ctx, {})

    def state_exit(self, ctx, state):
        self.run(self.chart.state_exit[self.index[state]], ctx, {})

    def find(self, state, port, message) -> Optional[TransitionRecord]:
        event = self.events.get((port, message))
        if event is None:
            return None
        tid = self.chart.table[self.index[state]][event]
        return None if tid == NONE else self.transitions[tid]

    def eventless(self, state) -> Optional[TransitionRecord]:
        tid = self.chart.eventless[self.index[state]]
        return None if tid == NONE else self.transitions[tid]

    def target_of(self, handle: TransitionRecord) -> str:
        return self.chart.states[handle.target]

    def transition_actions(self, ctx, handle: TransitionRecord, binding):
        self.run(handle.program, ctx, binding)

    def is_final(self, state) -> bool:
        return self.index[state] in self.chart.finals


def instantiate_plan(plan: ExecutionPlan, options: Optional[RunOptions] = None) -> Network:
    """A started network that replays `plan` without the source model."""
    things = {t.name: t for t in plan.things}
    specs = []
    for inst in plan.instances:
        thing = things[inst.thing]
        chart = plan.charts.get(thing.name)
        behavior = None
        if chart is not None:
            behavior = PlanBehavior(thing, chart, plan.transitions.get(thing.name, []), plan.programs.get(thing.name, []))
        specs.append(InstanceSpec(
            name=inst.name,
            thing=thing.name,
            behavior=behavior,
            properties=tuple((n, t) for n, t in thing.properties),
            messages={m: tuple((p, t) for p, t in params) for m, params in thing.messages.items()},
            analytics={r.spec["name"]: spec_from_dict(r.spec) for r in plan.analytics.get(thing.name, [])},
            clock=thing.clock,
        ))
    connectors = [((c.source[0], c.source[1]), (c.target[0], c.target[1])) for c in plan.connectors]
    network = Network(specs, connectors, options, [tuple(a) for a in plan.header.annotations])
    network.start()
    return network
