"""Text format for reaction networks.

Example::

    # birth-death process
    species S;
    param mu = 200;
    param gamma = 1;
    0 -> S @ mass_action(mu);
    S -> 0 @ mass_action(gamma);
    lyapunov g = S^2;

Statements end with ``;``.  Mode species are declared with the feasible
joint values, e.g. ``modes D, DP1 in {(1,0),(0,1)};``.  Rate laws are
``mass_action(<constant expr>)`` or ``rate(<polynomial>)`` where the
polynomial may instead be a registered custom law call such as
``michaelis_menten(k3, Mdm2, p53, k7)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .model import (
    CUSTOM_LAWS,
    CUSTOM_SIGNATURES,
    CustomRate,
    MassAction,
    ModelError,
    PolynomialRate,
    Reaction,
    ReactionNetwork,
    Species,
    _fmt,
    validate_polynomial_rates,
)
from .polynomial import Polynomial


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<newline>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<arrow>->)
  | (?P<op>[,;=(){}+\-*/^@])
    """,
    re.VERBOSE,
)

KEYWORDS = {"species", "modes", "param", "lyapunov", "in", "mass_action", "rate"}


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col, pos = 1, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "newline":
            line, col = line + 1, 1
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind if kind != "op" else chunk, chunk, line, col))
            col += len(chunk)
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.species: list[Species] = []
        self.params: dict[str, Fraction] = {}
        self.mode_values: tuple[tuple[int, ...], ...] = ()
        self.reactions: list[Reaction] = []
        self.lyapunov: Polynomial | None = None
        self._reaction_tokens: list[Token] = []

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ModelSyntaxError(message, tok.line, tok.column)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            self.pos += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            want = text or kind
            got = self.tok.text or self.tok.kind
            self.error(f"expected {want!r}, found {got!r}")
        return t

    @property
    def species_names(self) -> list[str]:
        return [s.name for s in self.species]

    # statements
    def parse(self) -> ReactionNetwork:
        if self.tok.kind == "eof":
            self.error("empty model")
        while self.tok.kind != "eof":
            self.statement()
        if not self.species:
            self.error("no species declared")
        if not self.reactions:
            self.error("no reactions declared")
        network = ReactionNetwork(
            species=tuple(self.species),
            reactions=tuple(self.reactions),
            parameters=dict(self.params),
            mode_values=self.mode_values,
            lyapunov=self.lyapunov,
        )
        validate_polynomial_rates(network)
        return network

    def statement(self):
        t = self.tok
        if t.kind == "ident" and t.text == "species":
            self.pos += 1
            self.declare_species(mode=False)
        elif t.kind == "ident" and t.text == "modes":
            self.pos += 1
            self.declare_modes()
        elif t.kind == "ident" and t.text == "param":
            self.pos += 1
            name = self.expect("ident")
            self.check_fresh(name)
            self.expect("=")
            self.params[name.text] = self.constant_expr()
        elif t.kind == "ident" and t.text == "lyapunov":
            self.pos += 1
            name = self.expect("ident")
            if name.text != "g":
                self.error("Lyapunov function must be named 'g'", name)
            self.expect("=")
            self.lyapunov = self.expr(allow_species=True)
        else:
            self.reaction()
        self.expect(";")

    def check_fresh(self, tok: Token):
        if tok.text in KEYWORDS:
            self.error(f"{tok.text!r} is a reserved word", tok)
        if tok.text in self.params or tok.text in self.species_names:
            self.error(f"name {tok.text!r} already defined", tok)

    def _require_no_reactions(self, tok: Token):
        if self.reactions or self.lyapunov is not None:
            self.error("species must be declared before reactions", tok)

    def declare_species(self, mode: bool) -> list[Token]:
        names = []
        while True:
            name = self.expect("ident")
            self._require_no_reactions(name)
            self.check_fresh(name)
            self.species.append(Species(name.text, mode))
            names.append(name)
            if not self.accept(","):
                return names

    def declare_modes(self):
        if self.mode_values:
            self.error("modes declared twice")
        names = self.declare_species(mode=True)
        self.expect("ident", "in")
        self.expect("{")
        combos = []
        while True:
            start = self.expect("(")
            values = [self.integer()]
            while self.accept(","):
                values.append(self.integer())
            self.expect(")")
            if len(values) != len(names):
                self.error(f"mode value has {len(values)} entries, expected {len(names)}", start)
            combos.append(tuple(values))
            if not self.accept(","):
                break
        self.expect("}")
        if len(set(combos)) != len(combos):
            self.error("duplicate mode combination")
        self.mode_values = tuple(combos)

    def integer(self) -> int:
        t = self.expect("number")
        try:
            return int(t.text)
        except ValueError:
            self.error("expected an integer", t)

    def reaction(self):
        start = self.tok
        if not self.species:
            self.error("reaction before any species declaration")
        consume = self.side()
        self.expect("arrow")
        produce = self.side()
        self.expect("@")
        kind = self.expect("ident")
        self.expect("(")
        if kind.text == "mass_action":
            tok = self.tok
            value = self.constant_expr()
            if value < 0:
                self.error("negative rate constant", tok)
            rate = MassAction(value)
        elif kind.text == "rate":
            rate = self.rate_body()
        else:
            self.error(f"unknown rate law {kind.text!r}", kind)
        self.expect(")")
        try:
            self.reactions.append(Reaction(tuple(consume), tuple(produce), rate))
        except ModelError as exc:
            self.error(str(exc), start)

    def side(self) -> list[int]:
        vec = [0] * len(self.species)
        if self.tok.kind == "number" and self.tok.text == "0" and self.tokens[self.pos + 1].kind in ("arrow", "@"):
            self.pos += 1
            return vec
        while True:
            coef = 1
            if self.tok.kind == "number":
                coef = self.integer()
                self.accept("*")
            name = self.expect("ident")
            if name.text not in self.species_names:
                self.error(f"undefined species {name.text!r}", name)
            vec[self.species_names.index(name.text)] += coef
            if not self.accept("+"):
                return vec

    def rate_body(self) -> PolynomialRate | CustomRate:
        t = self.tok
        if t.kind == "ident" and t.text in CUSTOM_LAWS and self.tokens[self.pos + 1].kind == "(":
            self.pos += 2
            sig = CUSTOM_SIGNATURES[t.text]
            args = []
            for i, kind in enumerate(sig):
                if i:
                    self.expect(",")
                if kind == "s":
                    name = self.expect("ident")
                    if name.text not in self.species_names:
                        self.error(f"undefined species {name.text!r}", name)
                    args.append(self.species_names.index(name.text))
                else:
                    args.append(self.constant_expr())
            self.expect(")")
            try:
                return CustomRate(CUSTOM_LAWS[t.text](*args))
            except ModelError as exc:
                self.error(str(exc), t)
        if t.kind == "ident" and self.tokens[self.pos + 1].kind == "(" and t.text not in self.params:
            self.error(f"unknown custom rate law {t.text!r}", t)
        return PolynomialRate(self.expr(allow_species=True))

    # expressions
    def constant_expr(self) -> Fraction:
        tok = self.tok
        poly = self.expr(allow_species=False)
        if not poly.is_constant():
            self.error("expected a constant expression", tok)
        return poly.constant_term()

    def expr(self, allow_species: bool) -> Polynomial:
        out = self.term(allow_species)
        while True:
            if self.accept("+"):
                out = out + self.term(allow_species)
            elif self.accept("-"):
                out = out - self.term(allow_species)
            else:
                return out

    def term(self, allow_species: bool) -> Polynomial:
        out = self.unary(allow_species)
        while True:
            if self.accept("*"):
                out = out * self.unary(allow_species)
            elif self.tok.kind == "/":
                tok = self.expect("/")
                rhs = self.unary(allow_species)
                if not rhs.is_constant() or rhs.constant_term() == 0:
                    self.error("division by zero or by a non-constant", tok)
                out = out / rhs
            else:
                return out

    def unary(self, allow_species: bool) -> Polynomial:
        if self.accept("-"):
            return -self.unary(allow_species)
        if self.accept("+"):
            return self.unary(allow_species)
        return self.power(allow_species)

    def power(self, allow_species: bool) -> Polynomial:
        base = self.atom(allow_species)
        if self.accept("^"):
            tok = self.tok
            exponent = self.unary(allow_species=False)
            value = exponent.constant_term()
            if not exponent.is_constant() or value.denominator != 1 or value < 0:
                self.error("exponent must be a nonnegative integer", tok)
            return base ** int(value)
        return base

    def atom(self, allow_species: bool) -> Polynomial:
        n = len(self.species)
        t = self.tok
        if self.accept("number"):
            return Polynomial.constant(n, Fraction(t.text))
        if self.accept("("):
            inner = self.expr(allow_species)
            self.expect(")")
            return inner
        if self.accept("ident"):
            if t.text in self.params:
                return Polynomial.constant(n, self.params[t.text])
            if t.text in self.species_names:
                if not allow_species:
                    self.error(f"species {t.text!r} not allowed in a constant expression", t)
                return Polynomial.variable(n, self.species_names.index(t.text))
            self.error(f"undefined name {t.text!r}", t)
        self.error(f"unexpected {t.text or t.kind!r}")


def parse_model(text: str) -> ReactionNetwork:
    """Parse model text into a validated network."""
    return _Parser(text).parse()


def load_model(path: str | Path) -> ReactionNetwork:
    return parse_model(Path(path).read_text(encoding="utf-8"))


def format_model(network: ReactionNetwork) -> str:
    """Inverse of :func:`parse_model` (rate constants are written as resolved values)."""
    names = network.names
    lines = []
    runs: list[tuple[bool, list[str]]] = []
    for s in network.species:
        if runs and runs[-1][0] == s.mode_flag:
            runs[-1][1].append(s.name)
        else:
            runs.append((s.mode_flag, [s.name]))
    for is_mode, run in runs:
        if is_mode:
            combos = ",".join("(" + ",".join(str(v) for v in c) + ")" for c in network.mode_values)
            lines.append(f"modes {', '.join(run)} in {{{combos}}};")
        else:
            lines.append(f"species {', '.join(run)};")
    for name, value in network.parameters.items():
        lines.append(f"param {name} = {_fmt(value)};")

    def side(vec):
        parts = [(name if k == 1 else f"{k}*{name}") for name, k in zip(names, vec) if k]
        return " + ".join(parts) if parts else "0"

    for r in network.reactions:
        if isinstance(r.rate, MassAction):
            law = f"mass_action({_fmt(r.rate.constant)})"
        elif isinstance(r.rate, PolynomialRate):
            law = f"rate({r.rate.poly.format(names)})"
        else:
            law = f"rate({r.rate.law.format(names)})"
        lines.append(f"{side(r.consume)} -> {side(r.produce)} @ {law};")
    if network.lyapunov is not None:
        lines.append(f"lyapunov g = {network.lyapunov.format(names)};")
    return "\n".join(lines) + "\n"
