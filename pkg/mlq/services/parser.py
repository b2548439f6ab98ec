# mlq/services/parser.py
"""
Recursive-descent parser producing `ast.Unit`.

Errors inside a top-level declaration abandon that declaration; parsing resumes
at the next `thing` / `configuration` keyword (or top-level annotation) so that
several problems are reported in one run.
"""
import logging
import math
from typing import Callable, List, Optional, Tuple, Union

from . import ast
from .diagnostics import CompileError, Diagnostic, NO_SPAN, Span, error, join_spans, sort_diagnostics
from .lexer import Token, TokenKind, tokenize, unescape

logger = logging.getLogger(__name__)

MAX_NESTING = 100

COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")

DA_FIELDS = (
    "labels", "features", "prediction_results", "dataset", "automl", "sequential", "timestamps",
    "preprocess_feature_scaler", "model_algorithm", "training_results",
    "blackbox_ml", "blackbox_ml_model", "blackbox_import_algorithm",
)


class _Abort(Exception):
    """Unwinds to the nearest recovery point after a diagnostic was recorded."""


def _describe(token: Optional[Token]) -> str:
    if token is None:
        return "end of input"
    if token.kind is TokenKind.STRING:
        return f"string {token.lexeme}"
    return f"{token.kind.value} '{token.lexeme}'"


class Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.diagnostics: List[Diagnostic] = list(self.tokens.diagnostics)
        # error tokens already carry a lexical diagnostic
        self.items = [t for t in self.tokens if t.kind is not TokenKind.ERROR]
        self.pos = 0
        self.depth = 0

    # --- token helpers ---------------------------------------------------

    def peek(self, ahead: int = 0) -> Optional[Token]:
        i = self.pos + ahead
        return self.items[i] if i < len(self.items) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.items)

    def advance(self) -> Token:
        token = self.items[self.pos]
        self.pos += 1
        return token

    def last_span(self) -> Span:
        return self.items[self.pos - 1].span if self.pos > 0 else NO_SPAN

    def eof_span(self) -> Span:
        length = len(self.source)
        if not self.items:
            return Span(1, 1, 0, 0)
        last = self.items[-1].span
        return Span(last.line, last.column + last.length, min(last.end, length), 0)

    def float_literal(self, token: Token) -> float:
        value = float(token.lexeme)
        if not math.isfinite(value):
            self.fail(f"float literal {token.lexeme} is out of range", token, code="P007")
        return value

    def fail(self, message: str, token: Optional[Token] = None, code: str = "P001"):
        token = token if token is not None else self.peek()
        span = token.span if token is not None else self.eof_span()
        self.diagnostics.append(error(code, message, span))
        raise _Abort()

    def check_keyword(self, *words: str) -> bool:
        token = self.peek()
        return token is not None and token.is_keyword(*words)

    def check_punct(self, *symbols: str) -> bool:
        token = self.peek()
        return token is not None and token.is_punct(*symbols)

    def expect_keyword(self, word: str) -> Token:
        if not self.check_keyword(word):
            self.fail(f"expected '{word}', found {_describe(self.peek())}")
        return self.advance()

    def expect_punct(self, symbol: str) -> Token:
        if not self.check_punct(symbol):
            self.fail(f"expected '{symbol}', found {_describe(self.peek())}")
        return self.advance()

    def expect_identifier(self, what: str = "identifier") -> Token:
        token = self.peek()
        if token is None or token.kind is not TokenKind.IDENTIFIER:
            self.fail(f"expected {what}, found {_describe(token)}")
        return self.advance()

    def expect_string(self, what: str = "string") -> Tuple[str, Token]:
        token = self.peek()
        if token is None or token.kind is not TokenKind.STRING:
            self.fail(f"expected {what}, found {_describe(token)}")
        self.advance()
        return unescape(token.lexeme[1:-1]), token

    def span_since(self, start: Token) -> Span:
        return join_spans(start.span, self.last_span())

    def nested(self, fn: Callable):
        self.depth += 1
        try:
            if self.depth > MAX_NESTING:
                self.fail("nesting too deep", code="P006")
            return fn()
        finally:
            self.depth -= 1

    # --- top level -------------------------------------------------------

    def parse_unit(self) -> ast.Unit:
        things: List[ast.Thing] = []
        configurations: List[ast.Configuration] = []
        annotations: List[ast.Annotation] = []
        seen = {}
        while not self.at_end():
            token = self.peek()
            try:
                if token.is_keyword("thing"):
                    node = self.parse_thing()
                    things.append(node)
                elif token.is_keyword("configuration"):
                    node = self.parse_configuration()
                    configurations.append(node)
                elif token.kind is TokenKind.ANNOTATION:
                    annotations.append(self.parse_annotation())
                    continue
                else:
                    self.fail(f"expected 'thing' or 'configuration', found {_describe(token)}")
                if node.name in seen:
                    self.diagnostics.append(error("P003", f"duplicate top-level name '{node.name}'", node.span))
                seen.setdefault(node.name, node)
            except _Abort:
                self.recover()
        span = Span(1, 1, 0, len(self.source))
        return ast.Unit(tuple(things), tuple(configurations), tuple(annotations), span)

    def recover(self):
        if not self.at_end():
            self.advance()
        while not self.at_end():
            token = self.peek()
            if token.is_keyword("thing", "configuration") or token.kind is TokenKind.ANNOTATION:
                # annotations inside declarations follow a name; only stop at ones after a closing brace
                if token.kind is not TokenKind.ANNOTATION or self.items[self.pos - 1].is_punct("}"):
                    return
            self.advance()

    def parse_annotation(self) -> ast.Annotation:
        marker = self.advance()
        value, _ = self.expect_string(f"string value for annotation {marker.lexeme}")
        return ast.Annotation(marker.lexeme[1:], value, self.span_since(marker))

    def parse_annotations(self) -> Tuple[ast.Annotation, ...]:
        result = []
        while self.peek() is not None and self.peek().kind is TokenKind.ANNOTATION:
            result.append(self.parse_annotation())
        return tuple(result)

    def parse_identifier_list(self, what: str) -> Tuple[str, ...]:
        names = [self.expect_identifier(what).lexeme]
        while self.check_punct(","):
            self.advance()
            names.append(self.expect_identifier(what).lexeme)
        return tuple(names)

    # --- things ----------------------------------------------------------

    def parse_thing(self) -> ast.Thing:
        start = self.expect_keyword("thing")
        is_fragment = False
        if self.check_keyword("fragment"):
            self.advance()
            is_fragment = True
        name = self.expect_identifier("thing name").lexeme
        includes: Tuple[str, ...] = ()
        if self.check_keyword("includes"):
            self.advance()
            includes = self.parse_identifier_list("fragment name")
        annotations = self.parse_annotations()
        self.expect_punct("{")

        messages, ports, properties, analytics, charts = [], [], [], [], []
        while not self.check_punct("}"):
            token = self.peek()
            if token is None:
                self.fail(f"expected '}}' to close thing '{name}', found end of input")
            if token.is_keyword("message"):
                messages.append(self.parse_message())
            elif token.is_keyword("provided", "required"):
                ports.append(self.parse_port())
            elif token.is_keyword("property"):
                properties.append(self.parse_property())
            elif token.is_keyword("data_analytics"):
                block = self.parse_data_analytics()
                if charts:
                    self.diagnostics.append(error(
                        "P002",
                        f"data_analytics '{block.name}' must appear before the statechart of thing '{name}'",
                        block.span,
                    ))
                analytics.append(block)
            elif token.is_keyword("statechart"):
                chart = self.parse_statechart()
                if charts and not is_fragment:
                    self.diagnostics.append(error("P004", f"thing '{name}' declares more than one statechart", chart.span))
                charts.append(chart)
            else:
                self.fail(f"expected a thing member, found {_describe(token)}")
        self.advance()
        return ast.Thing(
            name, is_fragment, includes, annotations, tuple(messages), tuple(ports),
            tuple(properties), tuple(analytics), tuple(charts), self.span_since(start),
        )

    def parse_message(self) -> ast.Message:
        start = self.expect_keyword("message")
        name = self.expect_identifier("message name").lexeme
        self.expect_punct("(")
        params = []
        if not self.check_punct(")"):
            params.append(self.parse_parameter())
            while self.check_punct(","):
                self.advance()
                params.append(self.parse_parameter())
        self.expect_punct(")")
        return ast.Message(name, tuple(params), self.span_since(start))

    def parse_parameter(self) -> ast.Parameter:
        token = self.expect_identifier("parameter name")
        self.expect_punct(":")
        type_name = self.expect_identifier("type name").lexeme
        return ast.Parameter(token.lexeme, type_name, self.span_since(token))

    def parse_port(self) -> ast.Port:
        start = self.advance()
        self.expect_keyword("port")
        name = self.expect_identifier("port name").lexeme
        self.expect_punct("{")
        receives: List[str] = []
        sends: List[str] = []
        while not self.check_punct("}"):
            if self.check_keyword("receives"):
                self.advance()
                receives.extend(self.parse_identifier_list("message name"))
            elif self.check_keyword("sends"):
                self.advance()
                sends.extend(self.parse_identifier_list("message name"))
            else:
                self.fail(f"expected 'receives', 'sends' or '}}', found {_describe(self.peek())}")
        self.advance()
        return ast.Port(start.lexeme, name, tuple(receives), tuple(sends), self.span_since(start))

    def parse_property(self) -> ast.Property:
        start = self.expect_keyword("property")
        name = self.expect_identifier("property name").lexeme
        self.expect_punct(":")
        type_name = self.expect_identifier("type name").lexeme
        initializer = None
        if self.check_punct("="):
            self.advance()
            initializer = self.parse_expression()
        return ast.Property(name, type_name, initializer, self.span_since(start))

    # --- data analytics --------------------------------------------------

    def parse_switch(self, field_name: str, words: Tuple[str, str]) -> bool:
        token = self.peek()
        if token is not None and token.kind is TokenKind.KEYWORD and token.lexeme.upper() in words:
            self.advance()
            return token.lexeme.upper() == words[0]
        self.fail(f"expected {words[0]} or {words[1]} after '{field_name}', found {_describe(token)}")

    def parse_name_or_string(self, what: str) -> str:
        token = self.peek()
        if token is not None and token.kind is TokenKind.STRING:
            return self.expect_string(what)[0]
        return self.expect_identifier(what).lexeme

    def parse_data_analytics(self) -> ast.DataAnalytics:
        start = self.expect_keyword("data_analytics")
        name = self.expect_identifier("data_analytics name").lexeme
        annotations = self.parse_annotations()
        self.expect_punct("{")
        values = {}
        while not self.check_punct("}"):
            token = self.peek()
            if token is None or not token.is_keyword(*DA_FIELDS):
                self.fail(f"expected a data_analytics parameter, found {_describe(token)}")
            self.advance()
            key = token.lexeme
            if key in values:
                self.diagnostics.append(error("P005", f"parameter '{key}' given twice in data_analytics '{name}'", token.span))
            if key in ("labels", "automl", "timestamps"):
                values[key] = self.parse_switch(key, ("ON", "OFF"))
            elif key in ("sequential", "blackbox_ml"):
                values[key] = self.parse_switch(key, ("TRUE", "FALSE"))
            elif key == "features":
                values[key] = self.parse_identifier_list("feature property")
            elif key == "prediction_results":
                values[key] = self.expect_identifier("property name").lexeme
            elif key in ("dataset", "training_results", "blackbox_ml_model"):
                values[key] = self.expect_string(f"path after '{key}'")[0]
            elif key in ("preprocess_feature_scaler", "blackbox_import_algorithm"):
                values[key] = self.parse_name_or_string(f"name after '{key}'")
            else:
                values[key] = self.parse_model_algorithm(token)
        self.advance()
        return ast.DataAnalytics(name=name, annotations=annotations, span=self.span_since(start), **values)

    def parse_model_algorithm(self, start: Token) -> ast.ModelAlgorithm:
        algorithm = self.expect_identifier("algorithm name").lexeme
        instance_name = self.expect_identifier("algorithm instance name").lexeme
        params = []
        if self.check_punct("("):
            self.advance()
            if not self.check_punct(")"):
                params.append(self.parse_hyperparameter())
                while self.check_punct(","):
                    self.advance()
                    params.append(self.parse_hyperparameter())
            self.expect_punct(")")
        return ast.ModelAlgorithm(algorithm, instance_name, tuple(params), self.span_since(start))

    def parse_hyperparameter(self) -> ast.HyperParameter:
        key_token = self.peek()
        if key_token is None or key_token.kind not in (TokenKind.IDENTIFIER, TokenKind.KEYWORD):
            self.fail(f"expected hyperparameter name, found {_describe(key_token)}")
        self.advance()
        negative = False
        if self.check_punct("-"):
            self.advance()
            negative = True
        token = self.peek()
        if token is None:
            self.fail(f"expected value for hyperparameter '{key_token.lexeme}', found end of input")
        if token.kind is TokenKind.INTEGER:
            value, quoted = int(token.lexeme), False
        elif token.kind is TokenKind.FLOAT:
            value, quoted = self.float_literal(token), False
        elif token.kind is TokenKind.STRING and not negative:
            value, quoted = unescape(token.lexeme[1:-1]), True
        elif token.kind in (TokenKind.IDENTIFIER, TokenKind.KEYWORD) and not negative:
            value, quoted = token.lexeme, False
        else:
            self.fail(f"expected value for hyperparameter '{key_token.lexeme}', found {_describe(token)}")
        self.advance()
        if negative:
            value = -value
        return ast.HyperParameter(key_token.lexeme, value, quoted, self.span_since(key_token))

    # --- statecharts -----------------------------------------------------

    def parse_statechart(self) -> ast.StateChart:
        start = self.expect_keyword("statechart")
        name = self.expect_identifier("statechart name").lexeme
        self.expect_keyword("init")
        initial = self.expect_identifier("initial state name").lexeme
        self.expect_punct("{")
        on_entry: Tuple[ast.Action, ...] = ()
        on_exit: Tuple[ast.Action, ...] = ()
        states = []
        while not self.check_punct("}"):
            if self.check_keyword("on"):
                kind, block = self.parse_handler()
                if kind == "entry":
                    on_entry += block
                else:
                    on_exit += block
            elif self.check_keyword("state", "final"):
                states.append(self.parse_state())
            else:
                self.fail(f"expected 'state', 'on' or '}}', found {_describe(self.peek())}")
        self.advance()
        return ast.StateChart(name, initial, on_entry, on_exit, tuple(states), self.span_since(start))

    def parse_handler(self) -> Tuple[str, Tuple[ast.Action, ...]]:
        self.expect_keyword("on")
        token = self.peek()
        if token is None or not token.is_keyword("entry", "exit"):
            self.fail(f"expected 'entry' or 'exit' after 'on', found {_describe(token)}")
        self.advance()
        return token.lexeme, self.parse_block()

    def parse_state(self) -> ast.State:
        start = self.peek()
        final = False
        if self.check_keyword("final"):
            self.advance()
            final = True
        self.expect_keyword("state")
        name = self.expect_identifier("state name").lexeme
        self.expect_punct("{")
        on_entry: Tuple[ast.Action, ...] = ()
        on_exit: Tuple[ast.Action, ...] = ()
        transitions = []
        while not self.check_punct("}"):
            if self.check_keyword("on"):
                kind, block = self.parse_handler()
                if kind == "entry":
                    on_entry += block
                else:
                    on_exit += block
            elif self.check_keyword("transition"):
                transitions.append(self.parse_transition())
            else:
                self.fail(f"expected 'transition', 'on' or '}}', found {_describe(self.peek())}")
        self.advance()
        return ast.State(name, final, on_entry, on_exit, tuple(transitions), self.span_since(start))

    def parse_transition(self) -> ast.Transition:
        start = self.expect_keyword("transition")
        self.expect_punct("->")
        target = self.expect_identifier("target state").lexeme
        event = None
        if self.check_keyword("event"):
            event_start = self.advance()
            var = None
            first = self.expect_identifier("port name")
            if self.check_punct(":"):
                self.advance()
                var = first.lexeme
                first = self.expect_identifier("port name")
            self.expect_punct("?")
            message = self.expect_identifier("message name").lexeme
            event = ast.Event(first.lexeme, message, var, self.span_since(event_start))
        actions: Tuple[ast.Action, ...] = ()
        if self.check_keyword("action"):
            self.advance()
            actions = self.parse_block()
        return ast.Transition(target, event, actions, self.span_since(start))

    # --- actions ---------------------------------------------------------

    def parse_block(self) -> Tuple[ast.Action, ...]:
        if self.check_keyword("do"):
            self.advance()
            actions = []
            while not self.check_keyword("end"):
                if self.at_end():
                    self.fail("expected 'end' to close action block, found end of input")
                actions.append(self.parse_action())
            self.advance()
            return tuple(actions)
        return (self.parse_action(),)

    def parse_action(self) -> ast.Action:
        return self.nested(self._parse_action)

    def _parse_action(self) -> ast.Action:
        token = self.peek()
        if token is None:
            self.fail("expected an action, found end of input")
        if token.is_keyword("print"):
            self.advance()
            return ast.Print(self.parse_expression(), self.span_since(token))
        if token.is_keyword("if"):
            self.advance()
            self.expect_punct("(")
            condition = self.parse_expression()
            self.expect_punct(")")
            then = self.parse_block()
            otherwise = None
            if self.check_keyword("else"):
                self.advance()
                otherwise = self.parse_block()
            return ast.Conditional(condition, then, otherwise, self.span_since(token))
        if token.is_keyword("da_preprocess", "da_train", "da_save"):
            self.advance()
            da = self.expect_identifier("data_analytics name").lexeme
            node_type = {"da_preprocess": ast.DaPreprocess, "da_train": ast.DaTrain, "da_save": ast.DaSave}[token.lexeme]
            return node_type(da, self.span_since(token))
        if token.is_keyword("da_predict"):
            self.advance()
            da = self.expect_identifier("data_analytics name").lexeme
            args: Tuple[ast.Expr, ...] = ()
            if self.check_punct("("):
                args = self.parse_arguments()
            return ast.DaPredict(da, args, self.span_since(token))
        if token.kind is TokenKind.IDENTIFIER:
            nxt = self.peek(1)
            if nxt is not None and nxt.is_punct("!"):
                self.advance()
                self.advance()
                message = self.expect_identifier("message name").lexeme
                args = self.parse_arguments() if self.check_punct("(") else ()
                return ast.Send(token.lexeme, message, args, self.span_since(token))
            if nxt is not None and nxt.is_punct("="):
                self.advance()
                self.advance()
                return ast.Assign(token.lexeme, self.parse_expression(), self.span_since(token))
        self.fail(f"expected an action, found {_describe(token)}")

    def parse_arguments(self) -> Tuple[ast.Expr, ...]:
        self.expect_punct("(")
        args = []
        if not self.check_punct(")"):
            args.append(self.parse_expression())
            while self.check_punct(","):
                self.advance()
                args.append(self.parse_expression())
        self.expect_punct(")")
        return tuple(args)

    # --- configurations --------------------------------------------------

    def parse_configuration(self) -> ast.Configuration:
        start = self.expect_keyword("configuration")
        name = self.expect_identifier("configuration name").lexeme
        annotations = self.parse_annotations()
        self.expect_punct("{")
        instances, connectors = [], []
        while not self.check_punct("}"):
            token = self.peek()
            if token is None:
                self.fail(f"expected '}}' to close configuration '{name}', found end of input")
            if token.is_keyword("instance"):
                self.advance()
                instance = self.expect_identifier("instance name").lexeme
                self.expect_punct(":")
                thing = self.expect_identifier("thing name").lexeme
                instances.append(ast.Instance(instance, thing, self.span_since(token)))
            elif token.is_keyword("connector"):
                self.advance()
                source = self.parse_endpoint()
                self.expect_punct("=>")
                target = self.parse_endpoint()
                connectors.append(ast.Connector(*source, *target, self.span_since(token)))
            else:
                self.fail(f"expected 'instance', 'connector' or '}}', found {_describe(token)}")
        self.advance()
        return ast.Configuration(name, annotations, tuple(instances), tuple(connectors), self.span_since(start))

    def parse_endpoint(self) -> Tuple[str, str]:
        instance = self.expect_identifier("instance name").lexeme
        self.expect_punct(".")
        port = self.expect_identifier("port name").lexeme
        return instance, port

    # --- expressions -----------------------------------------------------

    def parse_expression(self) -> ast.Expr:
        return self.nested(self.parse_or)

    def _binary_chain(self, operand: Callable[[], ast.Expr], match: Callable[[], Optional[str]]) -> ast.Expr:
        start = self.peek()
        left = operand()
        while True:
            op = match()
            if op is None:
                return left
            self.advance()
            right = operand()
            left = ast.Binary(op, left, right, self.span_since(start))

    def _keyword_op(self, word: str) -> Callable[[], Optional[str]]:
        return lambda: word if self.check_keyword(word) else None

    def _punct_op(self, *symbols: str) -> Callable[[], Optional[str]]:
        def match():
            token = self.peek()
            return token.lexeme if token is not None and token.is_punct(*symbols) else None
        return match

    def parse_or(self) -> ast.Expr:
        return self._binary_chain(self.parse_and, self._keyword_op("or"))

    def parse_and(self) -> ast.Expr:
        return self._binary_chain(self.parse_not, self._keyword_op("and"))

    def parse_not(self) -> ast.Expr:
        if self.check_keyword("not"):
            start = self.advance()
            operand = self.nested(self.parse_not)
            return ast.Unary("not", operand, self.span_since(start))
        return self.parse_comparison()

    def parse_comparison(self) -> ast.Expr:
        start = self.peek()
        left = self.parse_additive()
        if self.check_punct(*COMPARISON_OPS):
            op = self.advance().lexeme
            right = self.parse_additive()
            left = ast.Binary(op, left, right, self.span_since(start))
            if self.check_punct(*COMPARISON_OPS):
                self.fail("comparison operators cannot be chained")
        return left

    def parse_additive(self) -> ast.Expr:
        return self._binary_chain(self.parse_multiplicative, self._punct_op("+", "-"))

    def parse_multiplicative(self) -> ast.Expr:
        return self._binary_chain(self.parse_unary, self._punct_op("*", "/"))

    def parse_unary(self) -> ast.Expr:
        if self.check_punct("-"):
            start = self.advance()
            operand = self.nested(self.parse_unary)
            return ast.Unary("-", operand, self.span_since(start))
        return self.parse_primary()

    def parse_primary(self) -> ast.Expr:
        token = self.peek()
        if token is None:
            self.fail("expected an expression, found end of input")
        if token.kind is TokenKind.INTEGER:
            self.advance()
            return ast.Literal(int(token.lexeme), token.span)
        if token.kind is TokenKind.FLOAT:
            self.advance()
            return ast.Literal(self.float_literal(token), token.span)
        if token.kind is TokenKind.STRING:
            self.advance()
            return ast.Literal(unescape(token.lexeme[1:-1]), token.span)
        if token.is_keyword("true", "TRUE", "false", "FALSE"):
            self.advance()
            return ast.Literal(token.lexeme.lower() == "true", token.span)
        if token.is_punct("("):
            self.advance()
            inner = self.parse_expression()
            self.expect_punct(")")
            return inner
        if token.kind is TokenKind.IDENTIFIER:
            self.advance()
            if self.check_punct("."):
                self.advance()
                param = self.expect_identifier("message parameter name").lexeme
                return ast.ParamRef(token.lexeme, param, self.span_since(token))
            return ast.Name(token.lexeme, token.span)
        self.fail(f"expected an expression, found {_describe(token)}")


def parse_model(source: Union[str, bytes], path: Optional[str] = None) -> ast.Unit:
    """Parse model text into an `ast.Unit`; raises `CompileError` with every diagnostic found."""
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    parser = Parser(source)
    try:
        unit = parser.parse_unit()
    except RecursionError:
        parser.diagnostics.append(error("P006", "nesting too deep", parser.eof_span()))
        unit = None
    if parser.diagnostics:
        raise CompileError(sort_diagnostics(d.with_path(path) for d in parser.diagnostics))
    logger.info(f"Parsed {path or '<input>'}: {len(unit.things)} thing(s), {len(unit.configurations)} configuration(s)")
    return unit
