"""
Reader for the model file format:

    model "name" {
        ambient 2;
        codim 1;
        im w1 = z1*conj(z1);
    }

Declarations are either `rho INT: expr;` (a complexified defining function
in z1..zn, w1..wd, chi1..chin, tau1..taud) or `im w INT = expr;` (real form in
z_i, conj(z_i) and re(w_j)).  The index after `w` is optional when d = 1 and
bare `z`/`w` stand for z1/w1.  `#` starts a comment.
"""

import re
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from sympy import I, Symbol, Float, expand
from sympy.parsing.sympy_parser import parse_expr, standard_transformations, convert_xor

from .errors import ModelError

__all__ = ['Declaration', 'ModelSpec', 'tokenize', 'read_model', 'model_symbols', 'complexify']


logger = logging.getLogger(__name__)


_TOKEN_RE = re.compile(r"""
    (?P<space>[ \t\r\f]+)
  | (?P<newline>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<punct>[{};:=])
""", re.VERBOSE)


_EXPR_RE = re.compile(r"""
    (?P<space>[ \t\r\f]+)
  | (?P<newline>\n)
  | (?P<number>\d+(?:\.\d*)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^()])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    column: int
    offset: int


@dataclass
class Declaration:
    """
    One `rho` or `im w` declaration with the position of its expression.
    """

    kind: str
    index: int
    expr: str
    line: int
    column: int


@dataclass
class ModelSpec:
    label: str
    ambient: int
    codim: int
    declarations: List[Declaration] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.ambient - self.codim


def tokenize(text: str) -> List[Token]:
    """
    Split `text` into tokens, tracking line and column (both 1-based).
    Expression bodies are not tokenized here; the parser slices them out of
    the source by offset.
    """

    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        mtch = _TOKEN_RE.match(text, pos)
        if mtch is None:
            tokens.append(Token('other', text[pos], line, pos - line_start + 1, pos))
            pos += 1
            continue
        kind = mtch.lastgroup
        if kind == 'newline':
            line += 1
            line_start = mtch.end()
        elif kind not in ('space', 'comment'):
            tokens.append(Token(kind, mtch.group(), line, pos - line_start + 1, pos))
        pos = mtch.end()
    return tokens


class _Reader(object):
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    def _error(self, message: str, token: Optional[Token]=None):
        if token is None:
            token = self.tokens[self.pos] if self.pos < len(self.tokens) else None
        if token is None:
            lines = self.text.split('\n')
            raise ModelError(f"{message} (unexpected end of input)", len(lines), len(lines[-1]) + 1)
        raise ModelError(message, token.line, token.column)

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def expect(self, kind: str, text: Optional[str]=None) -> Token:
        token = self.peek()
        if token is None or token.kind != kind or (text is not None and token.text != text):
            wanted = repr(text) if text is not None else kind
            found = repr(token.text) if token is not None else 'nothing'
            self._error(f"expected {wanted}, found {found}")
        self.pos += 1
        return token

    def expression(self) -> Tuple[str, int, int]:
        """
        Consume tokens up to the next ';' and return the raw source between.
        """

        start = self.peek()
        if start is None or start.text == ';':
            self._error("expected an expression")
        while self.peek() is not None and self.peek().text not in (';', '}'):
            self.pos += 1
        end = self.expect('punct', ';')
        return self.text[start.offset:end.offset].strip(), start.line, start.column

    def model(self) -> ModelSpec:
        self.expect('name', 'model')
        label = self.expect('string').text[1:-1]
        self.expect('punct', '{')
        self.expect('name', 'ambient')
        ambient = int(self.expect('int').text)
        self.expect('punct', ';')
        self.expect('name', 'codim')
        codim = int(self.expect('int').text)
        self.expect('punct', ';')
        spec = ModelSpec(label, ambient, codim)

        while True:
            token = self.peek()
            if token is None:
                self._error("missing '}'")
            if token.text == '}':
                self.pos += 1
                break
            if token.text == 'rho':
                self.pos += 1
                index = int(self.expect('int').text)
                self.expect('punct', ':')
                expr, line, col = self.expression()
                spec.declarations.append(Declaration('rho', index, expr, line, col))
            elif token.text == 'im':
                self.pos += 1
                target = self.expect('name')
                mtch = re.fullmatch(r'w(\d*)', target.text)
                if mtch is None:
                    self._error(f"expected 'w' after 'im', found '{target.text}'", target)
                index = int(mtch.group(1)) if mtch.group(1) else None
                if index is None and self.peek() is not None and self.peek().kind == 'int':
                    index = int(self.expect('int').text)
                if index is None:
                    index = 1
                self.expect('punct', '=')
                expr, line, col = self.expression()
                spec.declarations.append(Declaration('imw', index, expr, line, col))
            else:
                self._error(f"expected 'rho', 'im' or '}}', found '{token.text}'")

        if self.peek() is not None:
            self._error("trailing input after model")
        return spec


def read_model(text: str) -> ModelSpec:
    """
    Parse the block structure of a model file.  Expression bodies are kept as
    text; see complexify().
    """

    spec = _Reader(text).model()
    if spec.ambient < 1 or not (1 <= spec.codim < spec.ambient):
        raise ModelError(f"need 1 ≤ codim < ambient, got ambient {spec.ambient} and codim {spec.codim}")
    indices = sorted(d.index for d in spec.declarations)
    if indices != list(range(1, spec.codim + 1)):
        raise ModelError(f"expected one declaration for each index 1..{spec.codim}, got {indices}")
    if len(set(d.kind for d in spec.declarations)) > 1:
        raise ModelError("mixing 'rho' and 'im w' declarations is not supported")
    return spec


def model_symbols(n: int, d: int) -> Dict[str, List[Symbol]]:
    """
    The sympy symbols z1..zn, w1..wd, chi1..chin, tau1..taud.
    """

    return {'z': [Symbol(f"z{i+1}") for i in range(n)],
            'w': [Symbol(f"w{j+1}") for j in range(d)],
            'chi': [Symbol(f"chi{i+1}") for i in range(n)],
            'tau': [Symbol(f"tau{j+1}") for j in range(d)]}


def _namespace(n: int, d: int, real_form: bool) -> Dict[str, object]:
    syms = model_symbols(n, d)
    swap = {}
    for a,b in zip(syms['z'] + syms['w'], syms['chi'] + syms['tau']):
        swap[a] = b
        swap[b] = a

    def conj(expr):
        return expand(expr).xreplace(swap).subs(I, -I)

    def re_(expr):
        return (expr + conj(expr))/2

    def im_(expr):
        return (expr - conj(expr))/(2*I)

    namespace = {'I': I, 'i': I, 'conj': conj, 're': re_, 'im': im_}
    for group in syms.values():
        for sym in group:
            namespace[str(sym)] = sym
    namespace['z'] = syms['z'][0]
    namespace['w'] = syms['w'][0]
    if real_form:
        # Only the holomorphic coordinates are user-facing in the real form
        for sym in syms['chi'] + syms['tau']:
            del namespace[str(sym)]
    return namespace


def _check_expression(decl: Declaration, namespace: Dict[str, object]):
    # Only names from the namespace, numbers, + - * / ^ ** and parentheses
    line, column, pos = decl.line, decl.column, 0
    text = decl.expr
    while pos < len(text):
        mtch = _EXPR_RE.match(text, pos)
        if mtch is None:
            raise ModelError(f"unexpected character '{text[pos]}' in expression", line, column)
        kind = mtch.lastgroup
        if kind == 'name' and mtch.group() not in namespace:
            raise ModelError(f"unknown name '{mtch.group()}'", line, column)
        if kind == 'newline':
            line, column = line + 1, 1
        else:
            column += mtch.end() - pos
        pos = mtch.end()


def complexify(spec: ModelSpec) -> List:
    """
    Complexified defining functions ρ¹..ρ^d as sympy expressions, ordered by
    index.  The real form Im w_j = φ_j becomes (w_j - τ_j)/(2i) - φ_j^c.
    """

    n, d = spec.n, spec.codim
    syms = model_symbols(n, d)
    rho = {}
    for decl in spec.declarations:
        namespace = _namespace(n, d, decl.kind == 'imw')
        _check_expression(decl, namespace)
        try:
            expr = parse_expr(decl.expr, local_dict=namespace,
                              transformations=standard_transformations + (convert_xor,))
        except Exception as e:
            raise ModelError(f"cannot parse expression '{decl.expr}': {e}", decl.line, decl.column)
        expr = expand(expr)
        if expr.atoms(Float):
            raise ModelError("floating point constants are not allowed, use rationals", decl.line, decl.column)
        allowed = set(namespace.values())
        unknown = [s for s in expr.free_symbols if s not in allowed and s not in syms['chi'] + syms['tau']]
        if unknown:
            raise ModelError(f"unknown symbols {sorted(str(s) for s in unknown)}", decl.line, decl.column)

        if decl.kind == 'imw':
            w, tau = syms['w'][decl.index-1], syms['tau'][decl.index-1]
            expr = expand((w - tau)/(2*I) - expr)
        rho[decl.index] = expr
        logger.debug("rho%i = %s", decl.index, expr)
    return [rho[j] for j in range(1, d + 1)]
