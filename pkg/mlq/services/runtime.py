# mlq/services/runtime.py
"""
Deterministic simulation of one configuration.

A `Network` owns the instances, the connector table and a single global FIFO
of pending messages. Each instance reacts through a `Behavior`:
`ModelBehavior` interprets the resolved statechart, while the plan VM in
`codegen` replays a compiled plan. Both drive the same `ActionContext`, so a
model and its plan produce the same trace.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from typing import Callable, Deque, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from mlq.app.config import settings
from mlq.app.schemas import TraceRecord
from mlq.utils.helpers import rebase, sha256_text, write_text
from mlq.utils.preprocessing import FittedScaler

from . import ast
from .analytics import DataAnalyticsSpec
from .datasets import PreparedData, load_dataset, save_prediction
from .expressions import ExpressionFault, Value, apply_binary, apply_unary, coerce, default_value, render, truthy
from .metamodel import CLOCK_THING, ResolvedModel, ResolvedThing, ResolvedTransition
from .ml_errors import DataError, MLError, TrainingError
from .ml_pipeline import TrainedModel, append_training_log, predict, preprocess, train
from .model_store import artefact_path, load_blackbox, save_model

logger = logging.getLogger(__name__)

Endpoint = Tuple[str, str]  # (instance, port)


class RunError(Exception):
    """Base class for failures of a simulation run."""


class RuntimeFault(RunError):
    """A fault inside one instance; it is traced and halts that instance only."""


class ConfigurationError(RunError):
    pass


@dataclass
class RunOptions:
    seed: Optional[int] = None
    max_steps: int = field(default_factory=lambda: settings.MAX_STEPS)
    dataset_root: Optional[str] = field(default_factory=lambda: settings.DATASET_ROOT)
    livelock_limit: int = field(default_factory=lambda: settings.LIVELOCK_LIMIT)
    clock_period: int = field(default_factory=lambda: settings.CLOCK_PERIOD)
    clock_ticks: int = field(default_factory=lambda: settings.CLOCK_TICKS)
    now: Callable[[], datetime] = datetime.now
    print_sink: Optional[Callable[[str], None]] = None


# --- trace ---------------------------------------------------------------------

class Trace:
    """Ordered, append-only list of trace records."""

    def __init__(self):
        self.records: List[TraceRecord] = []

    def add(self, step: int, kind: str, instance: str, payload: Dict) -> TraceRecord:
        record = TraceRecord(seq=len(self.records), step=step, kind=kind, instance=instance, payload=payload)
        self.records.append(record)
        return record

    def of_kind(self, *kinds: str) -> List[TraceRecord]:
        return [r for r in self.records if r.kind in kinds]

    def to_jsonl(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.records)

    def digest(self) -> str:
        return sha256_text(self.to_jsonl())

    def write(self, path: str):
        write_text(path, self.to_jsonl())

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)


# --- instances -----------------------------------------------------------------

class Behavior:
    """Reaction of one instance; `handle`s are whatever the subclass uses for a transition."""

    initial: str

    def initialize(self, ctx: "ActionContext"):
        pass

    def chart_entry(self, ctx: "ActionContext"):
        raise NotImplementedError

    def chart_exit(self, ctx: "ActionContext"):
        raise NotImplementedError

    def state_entry(self, ctx: "ActionContext", state: str):
        raise NotImplementedError

    def state_exit(self, ctx: "ActionContext", state: str):
        raise NotImplementedError

    def find(self, state: str, port: str, message: str):
        raise NotImplementedError

    def eventless(self, state: str):
        raise NotImplementedError

    def target_of(self, handle) -> str:
        raise NotImplementedError

    def transition_actions(self, ctx: "ActionContext", handle, binding: Dict[str, Value]):
        raise NotImplementedError

    def is_final(self, state: str) -> bool:
        raise NotImplementedError


@dataclass(eq=False)
class InstanceSpec:
    """Everything the network needs to host one instance, independent of where it came from."""

    name: str
    thing: str
    behavior: Optional[Behavior]
    properties: Tuple[Tuple[str, str], ...]
    messages: Dict[str, Tuple[Tuple[str, str], ...]]
    analytics: Dict[str, DataAnalyticsSpec]
    clock: bool = False


@dataclass(eq=False)
class DaHandle:
    spec: DataAnalyticsSpec
    data: Optional[PreparedData] = None
    scaler: Optional[FittedScaler] = None
    model: Optional[TrainedModel] = None
    last_inputs: Optional[List[Value]] = None
    last_prediction: Optional[Value] = None


@dataclass(eq=False)
class InstanceState:
    spec: InstanceSpec
    values: Dict[str, Value] = field(default_factory=dict)
    types: Dict[str, str] = field(default_factory=dict)
    handles: Dict[str, DaHandle] = field(default_factory=dict)
    state: Optional[str] = None
    halted: bool = False

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def behavior(self) -> Optional[Behavior]:
        return self.spec.behavior


@dataclass(frozen=True)
class Envelope:
    source: Endpoint
    target: Endpoint
    message: str
    args: Tuple[Value, ...]


class ActionContext:
    """Primitive operations available to the actions of one instance."""

    def __init__(self, network: "Network", instance: InstanceState):
        self.network = network
        self.instance = instance

    def load(self, name: str) -> Value:
        return self.instance.values[name]

    def param(self, binding: Mapping[str, Value], name: str) -> Value:
        if name not in binding:
            raise RuntimeFault(f"event has no parameter '{name}'")
        return binding[name]

    def assign(self, name: str, value: Value, quiet: bool = False):
        try:
            stored = coerce(value, self.instance.types[name])
        except (ValueError, OverflowError) as e:
            raise RuntimeFault(f"cannot store {render(value)!r} into '{name}': {e}")
        self.instance.values[name] = stored
        if not quiet:
            self.network.emit(self.instance, "assign", {"property": name, "value": stored})

    def print(self, value: Value):
        self.network.print(self.instance, render(value))

    def send(self, port: str, message: str, args: Sequence[Value]):
        self.network.send(self.instance, port, message, args)

    def unary(self, op: str, value: Value) -> Value:
        try:
            return apply_unary(op, value)
        except ExpressionFault as e:
            raise RuntimeFault(str(e))

    def binary(self, op: str, left: Value, right: Value) -> Value:
        try:
            return apply_binary(op, left, right)
        except ExpressionFault as e:
            raise RuntimeFault(str(e))

    def test(self, value: Value) -> bool:
        try:
            return truthy(value)
        except ExpressionFault as e:
            raise RuntimeFault(str(e))

    def da(self, kind: str, name: str, args: Optional[Sequence[Value]] = None):
        self.network.dispatch_da_action(self.instance, kind, name, args)


# --- interpreter -----------------------------------------------------------------

class ModelBehavior(Behavior):
    """Interprets the resolved statechart of a thing."""

    def __init__(self, thing: ResolvedThing):
        self.thing = thing
        self.chart = thing.behavior
        self.initial = self.chart.initial

    def initialize(self, ctx):
        for prop in self.thing.properties.values():
            if prop.initializer is not None:
                ctx.assign(prop.name, self.evaluate(prop.initializer, ctx, {}), quiet=True)

    def chart_entry(self, ctx):
        self.execute(self.chart.on_entry, ctx, {})

    def chart_exit(self, ctx):
        self.execute(self.chart.on_exit, ctx, {})

    def state_entry(self, ctx, state):
        self.execute(self.chart.state(state).on_entry, ctx, {})

    def state_exit(self, ctx, state):
        self.execute(self.chart.state(state).on_exit, ctx, {})

    def find(self, state, port, message) -> Optional[ResolvedTransition]:
        return self.chart.transition_for(state, (port, message))

    def eventless(self, state) -> Optional[ResolvedTransition]:
        return self.chart.eventless(state)

    def target_of(self, handle: ResolvedTransition) -> str:
        return handle.target

    def transition_actions(self, ctx, handle: ResolvedTransition, binding):
        self.execute(handle.actions, ctx, binding)

    def is_final(self, state) -> bool:
        return self.chart.state(state).final

    def evaluate(self, expr: ast.Expr, ctx: ActionContext, binding: Mapping[str, Value]) -> Value:
        if isinstance(expr, ast.Literal):
            return expr.value
        if isinstance(expr, ast.Name):
            return ctx.load(expr.name)
        if isinstance(expr, ast.ParamRef):
            return ctx.param(binding, expr.param)
        if isinstance(expr, ast.Unary):
            return ctx.unary(expr.op, self.evaluate(expr.operand, ctx, binding))
        left = self.evaluate(expr.left, ctx, binding)
        right = self.evaluate(expr.right, ctx, binding)
        return ctx.binary(expr.op, left, right)

    def execute(self, actions: Sequence[ast.Action], ctx: ActionContext, binding: Mapping[str, Value]):
        for action in actions:
            if isinstance(action, ast.Print):
                ctx.print(self.evaluate(action.value, ctx, binding))
            elif isinstance(action, ast.Assign):
                ctx.assign(action.target, self.evaluate(action.value, ctx, binding))
            elif isinstance(action, ast.Send):
                ctx.send(action.port, action.message, [self.evaluate(a, ctx, binding) for a in action.args])
            elif isinstance(action, ast.Conditional):
                if ctx.test(self.evaluate(action.condition, ctx, binding)):
                    self.execute(action.then, ctx, binding)
                elif action.otherwise is not None:
                    self.execute(action.otherwise, ctx, binding)
            elif isinstance(action, ast.DaPreprocess):
                ctx.da("preprocess", action.da)
            elif isinstance(action, ast.DaTrain):
                ctx.da("train", action.da)
            elif isinstance(action, ast.DaPredict):
                args = [self.evaluate(a, ctx, binding) for a in action.args] if action.args else None
                ctx.da("predict", action.da, args)
            elif isinstance(action, ast.DaSave):
                ctx.da("save", action.da)


# --- network -------------------------------------------------------------------------

def _seeded(spec: DataAnalyticsSpec, seed: Optional[int]) -> DataAnalyticsSpec:
    if seed is None or any(k == "seed" for k, _ in spec.hyperparameters):
        return spec
    return spec.with_changes(hyperparameters=spec.hyperparameters + (("seed", seed),))


def _annotation_int(annotations: Sequence[Tuple[str, str]], key: str, default: int) -> int:
    for k, v in annotations:
        if k == key:
            try:
                return int(v)
            except ValueError:
                raise ConfigurationError(f"annotation @{key} needs an integer, got {v!r}")
    return default


class Network:
    def __init__(self, instances: Sequence[InstanceSpec], connectors: Sequence[Tuple[Endpoint, Endpoint]],
                 options: Optional[RunOptions] = None, annotations: Sequence[Tuple[str, str]] = ()):
        self.options = options or RunOptions()
        self.instances: Dict[str, InstanceState] = {spec.name: InstanceState(spec) for spec in instances}
        self.routes: Dict[Endpoint, List[Endpoint]] = {}
        for a, b in connectors:
            self.routes.setdefault(a, []).append(b)
            self.routes.setdefault(b, []).append(a)
        self.queue: Deque[Envelope] = deque()
        self.trace = Trace()
        self.steps = 0
        self.clock_period = max(1, _annotation_int(annotations, "clock_period", self.options.clock_period))
        self.ticks_left = _annotation_int(annotations, "clock_ticks", self.options.clock_ticks)
        self._since_tick = 0

    # -- bookkeeping

    def emit(self, instance: InstanceState, kind: str, payload: Dict) -> TraceRecord:
        return self.trace.add(self.steps, kind, instance.name, payload)

    def print(self, instance: InstanceState, text: str):
        self.emit(instance, "print", {"text": text})
        if self.options.print_sink is not None:
            self.options.print_sink(text)

    def context(self, instance: InstanceState) -> ActionContext:
        return ActionContext(self, instance)

    @property
    def has_errors(self) -> bool:
        return any(r.kind == "error" for r in self.trace.records)

    @property
    def clocks(self) -> List[InstanceState]:
        return [i for i in self.instances.values() if i.spec.clock]

    def all_halted(self) -> bool:
        return all(i.halted for i in self.instances.values() if i.behavior is not None)

    def _fault(self, instance: InstanceState, fault: RuntimeFault):
        logger.warning(f"Instance '{instance.name}' halted: {fault}")
        self.emit(instance, "error", {"message": str(fault), "state": instance.state})
        instance.halted = True

    def _guarded(self, instance: InstanceState, action: Callable[[], None]):
        try:
            action()
        except RuntimeFault as e:
            self._fault(instance, e)

    # -- instantiation

    def start(self):
        """Set up every instance, then enter initial states in declaration order."""
        for instance in self.instances.values():
            for name, type_name in instance.spec.properties:
                instance.types[name] = type_name
                instance.values[name] = default_value(type_name)
            for name, spec in instance.spec.analytics.items():
                handle = DaHandle(_seeded(spec, self.options.seed))
                if spec.blackbox_ml:
                    handle.model = load_blackbox(handle.spec, self.options.dataset_root)
                instance.handles[name] = handle
            if instance.behavior is not None:
                self._guarded(instance, lambda inst=instance: inst.behavior.initialize(self.context(inst)))
        for instance in self.instances.values():
            if instance.behavior is not None and not instance.halted:
                self._guarded(instance, lambda inst=instance: self._enter_initial(inst))
        logger.info(f"Instantiated {len(self.instances)} instance(s)")

    def _enter_initial(self, instance: InstanceState):
        ctx, behavior = self.context(instance), instance.behavior
        instance.state = behavior.initial
        self.emit(instance, "enter-state", {"state": behavior.initial})
        behavior.chart_entry(ctx)
        behavior.state_entry(ctx, behavior.initial)
        if not self._halt_if_final(instance):
            self._settle(instance)

    # -- transitions

    def _halt_if_final(self, instance: InstanceState) -> bool:
        """Entering a final state runs the chart's exit actions and halts the instance."""
        if not instance.behavior.is_final(instance.state):
            return False
        instance.behavior.chart_exit(self.context(instance))
        self.emit(instance, "terminate", {"state": instance.state})
        instance.halted = True
        return True

    def _fire(self, instance: InstanceState, handle, binding: Dict[str, Value]):
        ctx, behavior = self.context(instance), instance.behavior
        target = behavior.target_of(handle)
        behavior.state_exit(ctx, instance.state)
        self.emit(instance, "exit-state", {"state": instance.state})
        behavior.transition_actions(ctx, handle, binding)
        instance.state = target
        self.emit(instance, "enter-state", {"state": target})
        behavior.state_entry(ctx, target)
        self._halt_if_final(instance)

    def _settle(self, instance: InstanceState):
        firings = 0
        while not instance.halted:
            handle = instance.behavior.eventless(instance.state)
            if handle is None:
                return
            firings += 1
            if firings > self.options.livelock_limit:
                raise RuntimeFault(f"livelock: more than {self.options.livelock_limit} eventless transitions")
            self._fire(instance, handle, {})

    # -- messaging

    def send(self, instance: InstanceState, port: str, message: str, args: Sequence[Value]):
        signature = instance.spec.messages.get(message, ())
        if len(args) != len(signature):
            raise RuntimeFault(f"message '{message}' takes {len(signature)} argument(s), got {len(args)}")
        try:
            values = tuple(coerce(v, t) for v, (_, t) in zip(args, signature))
        except (ValueError, OverflowError) as e:
            raise RuntimeFault(f"bad argument for message '{message}': {e}")
        payload = {"port": port, "message": message, "args": list(values)}
        targets = self.routes.get((instance.name, port), [])
        if not targets:
            self.emit(instance, "send", {**payload, "to": None})
            self.emit(instance, "drop", {**payload, "reason": "unconnected"})
            return
        for target in targets:
            self.emit(instance, "send", {**payload, "to": f"{target[0]}.{target[1]}"})
            self.queue.append(Envelope((instance.name, port), target, message, values))

    def inject(self, instance: str, port: str, message: str, args: Sequence[Value] = ()):
        """Queue a message as if it had arrived on `instance.port` from outside the network."""
        if instance not in self.instances:
            raise ConfigurationError(f"unknown instance '{instance}'")
        signature = self.instances[instance].spec.messages.get(message)
        if signature is None:
            raise ConfigurationError(f"instance '{instance}' has no message '{message}'")
        values = tuple(coerce(v, t) for v, (_, t) in zip(args, signature))
        self.queue.append(Envelope(("<env>", port), (instance, port), message, values))

    def pulse(self):
        """Let built-in clocks tick when their period elapsed or the network went idle."""
        if self.ticks_left <= 0 or (self.queue and self._since_tick < self.clock_period):
            return
        clocks = self.clocks
        if not clocks:
            return
        for clock in clocks:
            self.send(clock, "ticks", "tick", ())
        self.ticks_left -= 1
        self._since_tick = 0

    def step(self) -> bool:
        """Deliver the oldest pending message; False when nothing is pending."""
        if not self.queue:
            return False
        self.steps += 1
        self._since_tick += 1
        envelope = self.queue.popleft()
        instance = self.instances[envelope.target[0]]
        port = envelope.target[1]
        payload = {"port": port, "message": envelope.message, "args": list(envelope.args)}
        if instance.halted or instance.behavior is None:
            self.emit(instance, "drop", {**payload, "reason": "halted" if instance.halted else "no-behavior"})
            return True
        handle = instance.behavior.find(instance.state, port, envelope.message)
        if handle is None:
            self.emit(instance, "drop", {**payload, "reason": "no-transition"})
            return True
        self.emit(instance, "deliver", {**payload, "from": f"{envelope.source[0]}.{envelope.source[1]}"})
        names = [n for n, _ in instance.spec.messages.get(envelope.message, ())]
        binding = dict(zip(names, envelope.args))

        def react():
            self._fire(instance, handle, binding)
            self._settle(instance)

        self._guarded(instance, react)
        return True

    # -- data analytics

    def _dataset(self, spec: DataAnalyticsSpec) -> str:
        if not spec.dataset:
            raise DataError(f"data_analytics '{spec.name}' has no dataset")
        return rebase(spec.dataset, self.options.dataset_root)

    def dispatch_da_action(self, instance: InstanceState, kind: str, name: str,
                           args: Optional[Sequence[Value]] = None):
        handle = instance.handles.get(name)
        if handle is None:
            raise RuntimeFault(f"instance '{instance.name}' has no data_analytics '{name}'")
        try:
            payload = getattr(self, f"_da_{kind}")(instance, name, handle, args)
        except (MLError, OSError) as e:
            raise RuntimeFault(f"da_{kind} {name}: {e}")
        self.emit(instance, f"da-{kind}", {"da": name, **payload})

    def _da_preprocess(self, instance, name, handle: DaHandle, args) -> Dict:
        if handle.spec.blackbox_ml:
            raise TrainingError("a black-box component is not preprocessed")
        data = load_dataset(handle.spec, self._dataset(handle.spec))
        handle.data, handle.scaler = preprocess(handle.spec, data)
        return {"rows": data.rows, "excluded": data.excluded}

    def _da_train(self, instance, name, handle: DaHandle, args) -> Dict:
        spec = handle.spec
        if spec.blackbox_ml:
            raise TrainingError("a black-box component cannot be trained")
        if handle.data is None:
            self._da_preprocess(instance, name, handle, args)
        model, report = train(spec, handle.data, handle.scaler, now=self.options.now())
        handle.model = model
        save_model(artefact_path(self._dataset(spec), instance.name, name), model)
        if spec.training_results:
            append_training_log(rebase(spec.training_results, self.options.dataset_root), report, now=self.options.now())
        metrics = report.metrics.populated() if report.metrics else {}
        return {"train_size": report.train_size, "test_size": report.test_size, "metrics": metrics}

    def _da_predict(self, instance, name, handle: DaHandle, args) -> Dict:
        spec = handle.spec
        inputs = list(args) if args is not None else [instance.values[f] for f, _ in spec.input_features]
        prediction = predict(handle.model, inputs)
        handle.last_inputs, handle.last_prediction = inputs, prediction
        if spec.prediction_results:
            self.context(instance).assign(spec.prediction_results, prediction, quiet=True)
            prediction = instance.values[spec.prediction_results]
        return {"inputs": inputs, "prediction": prediction}

    def _da_save(self, instance, name, handle: DaHandle, args) -> Dict:
        spec = handle.spec
        inputs = [instance.values[f] for f, _ in spec.input_features]
        prediction = None
        if spec.labels:
            prediction = handle.last_prediction
            if prediction is None and spec.prediction_results:
                prediction = instance.values[spec.prediction_results]
        save_prediction(spec, self._dataset(spec), inputs, prediction, now=self.options.now())
        values = [render(v) for v in inputs]
        if spec.labels:
            values.append("NaN" if prediction is None else render(prediction))
        return {"values": values}


def select_configuration(names: Sequence[str], requested: Optional[str] = None) -> str:
    """The configuration to run: the named one, else the only one."""
    if requested is not None:
        if requested not in names:
            raise ConfigurationError(f"unknown configuration '{requested}'")
        return requested
    if len(names) == 1:
        return names[0]
    if not names:
        raise ConfigurationError("the model declares no configuration")
    raise ConfigurationError(f"several configurations ({', '.join(names)}); choose one with --config")


def instantiate(model: ResolvedModel, config_name: Optional[str] = None,
                options: Optional[RunOptions] = None) -> Network:
    config = model.configurations[select_configuration(list(model.configurations), config_name)]
    specs = []
    for inst in config.instances.values():
        thing = model.things[inst.thing]
        specs.append(InstanceSpec(
            name=inst.name,
            thing=thing.name,
            behavior=ModelBehavior(thing) if thing.behavior is not None else None,
            properties=tuple((p.name, p.type_name) for p in thing.properties.values()),
            messages={m.name: m.parameters for m in thing.messages.values()},
            analytics=dict(thing.analytics),
            clock=thing.builtin and thing.name == CLOCK_THING,
        ))
    network = Network(specs, [c.endpoints for c in config.connectors], options, config.annotations)
    network.start()
    return network


def run(network: Network, max_steps: Optional[int] = None, until_halted: bool = False) -> Trace:
    """Step until quiescence, the step budget, or (optionally) every instance has halted."""
    limit = network.options.max_steps if max_steps is None else max_steps
    while network.steps < limit:
        network.pulse()
        if not network.step():
            break
        if until_halted and network.all_halted():
            break
    logger.info(f"Run stopped after {network.steps} step(s), {len(network.queue)} message(s) pending")
    return network.trace
