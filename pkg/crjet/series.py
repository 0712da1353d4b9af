"""
Exact truncated multivariate power series with Gaussian rational coefficients.

A TruncSeries wraps a sparse sympy polynomial over QQ_I together with the
largest total degree (`order`) up to which its coefficients are known.  Two
refinements of plain total-degree truncation are supported:

 * `exact` series are polynomials whose stored terms are the whole function
   (model defining functions, jets, coordinate functions).  Ring operations
   between exact series never truncate.
 * `caps` bound the degree in groups of variables.  The set of monomials
   violating a cap is an ideal, so capped truncation is compatible with all
   ring operations; the reflection pipeline uses it to bound displacement and
   scaling degrees separately from the total degree.
"""

import logging
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import Rational, binomial, sympify, Poly, Symbol
from sympy.polys.domains import QQ, QQ_I
from sympy.polys.domains.gaussiandomains import GaussianRational
from sympy.polys.matrices import DomainMatrix
from sympy.polys.orderings import grlex
from sympy.polys.rings import PolyRing

from .errors import BudgetError

__all__ = ['GaussRational', 'gauss', 'conj', 'to_complex', 'random_gauss', 'TruncSeries', 'LaurentSeries',
           'add', 'mul', 'differentiate', 'substitute', 'truncate', 'solve_implicit',
           'vanishing_order', 'laurent_c0', 'laurent_c0_order_bound', 'reciprocal',
           'unit_root', 'conjugate', 'coefficient', 'embed', 'rename', 'evaluate',
           'homogeneous_part', 'merge_caps', 'multi_indices']


logger = logging.getLogger(__name__)


GaussRational = GaussianRational

#: Caps are stored as a sorted tuple of (variable names, maximal degree) pairs
Caps = Tuple[Tuple[Tuple[str, ...], int], ...]


def gauss(value, max_denominator: Optional[int]=None) -> GaussRational:
    """
    Coerce `value` into an element of QQ_I.  Accepts Gaussian rationals, ints,
    sympy numbers/expressions (e.g. "1/2 - 3*I") and Python/numpy floats and
    complex numbers.  Floats are converted to the exact binary fraction unless
    `max_denominator` is given, in which case the closest fraction with a
    bounded denominator is used.
    """

    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError(f"Cannot interpret boolean {value!r} as a Gaussian rational")
    if isinstance(value, (int, np.integer)):
        return QQ_I(int(value), 0)
    if isinstance(value, (float, np.floating, complex, np.complexfloating)):
        value = complex(value)
        parts = []
        for part in (value.real, value.imag):
            part = Rational(part)
            if max_denominator is not None:
                part = part.limit_denominator(max_denominator)
            parts.append(QQ.from_sympy(part))
        return QQ_I(*parts)

    expr = sympify(value).expand()
    try:
        return QQ_I.from_sympy(expr)
    except Exception:
        raise ValueError(f"Cannot interpret '{value}' as a Gaussian rational")


def conj(value: GaussRational) -> GaussRational:
    return QQ_I(value.x, -value.y)


def to_complex(value: GaussRational) -> complex:
    """
    Convert a Gaussian rational into a Python complex.
    """

    return complex(float(QQ.to_sympy(value.x)), float(QQ.to_sympy(value.y)))


def random_gauss(rng: np.random.Generator, bound: int=10**4, real: bool=False) -> GaussRational:
    """
    Draw a random Gaussian rational with numerators in [-bound, bound] and
    denominators in [1, bound].
    """

    nums = rng.integers(-bound, bound, size=2, endpoint=True)
    dens = rng.integers(1, bound, size=2, endpoint=True)
    re = QQ(int(nums[0]), int(dens[0]))
    im = QQ(0) if real else QQ(int(nums[1]), int(dens[1]))
    return QQ_I(re, im)


@lru_cache(maxsize=256)
def _ring(vars: Tuple[str, ...]) -> PolyRing:
    if len(vars) == 0:
        raise ValueError("A series needs at least one variable")
    return PolyRing(vars, QQ_I, grlex)


def merge_caps(*caps_list: Iterable) -> Caps:
    """
    Combine several cap specifications, keeping the tightest cap per group.
    Accepts tuples of (names, cap) pairs or dictionaries.
    """

    merged = {}
    for caps in caps_list:
        if caps is None:
            continue
        if isinstance(caps, dict):
            caps = caps.items()
        for names, cap in caps:
            names = tuple(names)
            if cap < 0:
                raise BudgetError(f"Degree cap for {names} exhausted")
            merged[names] = min(cap, merged.get(names, cap))
    return tuple(sorted(merged.items()))


class TruncSeries(object):
    """
    Truncated power series in the variables `vars` with exact QQ_I
    coefficients, known up to total degree `order`.
    """

    __slots__ = ('vars', 'ring', 'poly', 'order', 'exact', 'caps')

    def __init__(self, vars: Sequence[str], poly=None, order: Optional[int]=None, exact: bool=False, caps=None):
        self.vars = tuple(vars)
        self.ring = _ring(self.vars)
        if poly is None:
            poly = self.ring.zero
        elif isinstance(poly, dict) and not hasattr(poly, 'ring'):
            poly = self.ring.from_dict({tuple(k): QQ_I.convert(v) for k,v in poly.items()})
        elif poly.ring is not self.ring:
            raise ValueError("Polynomial belongs to a different ring")

        self.exact = bool(exact)
        if self.exact:
            self.caps = ()
            self.order = max([sum(m) for m in poly.keys()], default=0)
            if order is not None:
                self.order = max(self.order, int(order))
            self.poly = poly
        else:
            if order is None:
                raise ValueError("A truncated series needs an order")
            self.order = int(order)
            if self.order < 0:
                raise BudgetError("Truncation order exhausted")
            self.caps = merge_caps(caps)
            for names,_ in self.caps:
                for name in names:
                    if name not in self.vars:
                        raise ValueError(f"Cap refers to unknown variable '{name}'")
            self.poly = self._trim(poly)

    ## Construction helpers
    @classmethod
    def zero(cls, vars: Sequence[str], order: Optional[int]=None, caps=None) -> 'TruncSeries':
        if order is None:
            return cls(vars, exact=True)
        return cls(vars, order=order, caps=caps)

    @classmethod
    def constant(cls, vars: Sequence[str], value=1) -> 'TruncSeries':
        ring = _ring(tuple(vars))
        return cls(vars, ring.ground_new(gauss(value)), exact=True)

    @classmethod
    def variable(cls, vars: Sequence[str], name: str) -> 'TruncSeries':
        ring = _ring(tuple(vars))
        try:
            i = list(vars).index(name)
        except ValueError:
            raise ValueError(f"Unknown variable '{name}'")
        return cls(vars, ring.gens[i], exact=True)

    @classmethod
    def from_expr(cls, vars: Sequence[str], expr, order: Optional[int]=None) -> 'TruncSeries':
        """
        Build an exact series from a polynomial sympy expression (or string) in
        `vars`.  With `order` the result is truncated there instead.
        """

        expr = sympify(expr).expand()
        symbols = [Symbol(v) for v in vars]
        unknown = expr.free_symbols - set(symbols)
        if unknown:
            raise ValueError(f"Expression uses unknown symbols {sorted(str(s) for s in unknown)}")
        terms = Poly(expr, *symbols, domain=QQ_I).as_dict(native=True)
        series = cls(vars, dict(terms), exact=True)
        if order is not None:
            series = truncate(series, order)
        return series

    ## Internal
    def _index(self, name: str) -> int:
        try:
            return self.vars.index(name)
        except ValueError:
            raise ValueError(f"Unknown variable '{name}'")

    def _groups(self) -> List[Tuple[Tuple[int, ...], int]]:
        groups = [(tuple(range(len(self.vars))), self.order)]
        for names,cap in self.caps:
            groups.append((tuple(self.vars.index(n) for n in names), cap))
        return groups

    def _trim(self, poly):
        groups = self._groups()
        drop = [m for m in poly.keys() if any(sum(m[i] for i in idx) > cap for idx,cap in groups)]
        if drop:
            poly = poly.copy()
            for m in drop:
                del poly[m]
        return poly

    ## Inspection
    @property
    def coeffs(self) -> Dict[Tuple[int, ...], GaussRational]:
        return dict(self.poly.items())

    def is_zero(self) -> bool:
        return not self.poly

    def valuation(self) -> Optional[int]:
        """
        Lowest total degree of a nonzero term, or None for the zero series.
        """

        if not self.poly:
            return None
        return min(sum(m) for m in self.poly.keys())

    def constant_term(self) -> GaussRational:
        return self.poly.get((0,)*len(self.vars), QQ_I.zero)

    def degree(self) -> int:
        return max([sum(m) for m in self.poly.keys()], default=0)

    def terms(self) -> List[Tuple[Tuple[int, ...], GaussRational]]:
        """
        Terms in graded-lexicographic order, lowest degree first.
        """

        return sorted(self.poly.items(), key=lambda t: (sum(t[0]), tuple(-e for e in t[0])))

    def as_expr(self):
        return self.poly.as_expr()

    def __repr__(self):
        kind = 'exact' if self.exact else f"order={self.order}"
        return f"TruncSeries({self.as_expr()}, vars={self.vars}, {kind})"

    def __eq__(self, other):
        if isinstance(other, TruncSeries):
            return self.vars == other.vars and self.poly == other.poly
        try:
            return self.poly == self.ring.ground_new(gauss(other))
        except (TypeError, ValueError):
            return NotImplemented

    __hash__ = None

    ## Arithmetic
    def __add__(self, other):
        if not isinstance(other, TruncSeries):
            other = TruncSeries.constant(self.vars, other)
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.poly)

    def __sub__(self, other):
        if not isinstance(other, TruncSeries):
            other = TruncSeries.constant(self.vars, other)
        return add(self, -other)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, TruncSeries):
            return mul(self, other)
        return self._like(self.poly.mul_ground(gauss(other)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        value = gauss(other)
        if not value:
            raise ZeroDivisionError("Division of a series by zero")
        return self._like(self.poly.mul_ground(QQ_I.one/value))

    def __pow__(self, exponent: int):
        if not isinstance(exponent, (int, np.integer)) or exponent < 0:
            raise ValueError(f"Only non-negative integer powers are supported, got {exponent}")
        result = TruncSeries.constant(self.vars, 1)
        base = self
        while exponent:
            if exponent & 1:
                result = mul(result, base)
            exponent >>= 1
            if exponent:
                base = mul(base, base)
        return result

    def _like(self, poly) -> 'TruncSeries':
        if self.exact:
            return TruncSeries(self.vars, poly, exact=True)
        return TruncSeries(self.vars, poly, order=self.order, caps=self.caps)


def _check_vars(a: TruncSeries, b: TruncSeries):
    if a.vars != b.vars:
        raise ValueError(f"Variable mismatch: {a.vars} vs. {b.vars}")


def _combined_meta(series: Sequence[TruncSeries], exact_order: int) -> Tuple[bool, int, Caps]:
    inexact = [s for s in series if not s.exact]
    if not inexact:
        return True, exact_order, ()
    order = min(s.order for s in inexact)
    return False, order, merge_caps(*[s.caps for s in inexact])


def add(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    """
    Coefficientwise sum; the order is the smaller of the two orders (exact
    operands do not limit it).
    """

    _check_vars(a, b)
    exact, order, caps = _combined_meta((a, b), max(a.order, b.order))
    if exact:
        return TruncSeries(a.vars, a.poly + b.poly, exact=True)
    return TruncSeries(a.vars, a.poly + b.poly, order=order, caps=caps)


def _split(poly, groups):
    ring = poly.ring
    parts = {}
    for monom,coeff in poly.items():
        key = tuple(sum(monom[i] for i in idx) for idx,_ in groups)
        parts.setdefault(key, {})[monom] = coeff
    return [(key, ring.from_dict(terms)) for key,terms in parts.items()]


def mul(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    """
    Truncated Cauchy product.  Both operands are split into blocks of constant
    degree per truncation group and only block pairs whose degrees fit under
    every cap are multiplied.
    """

    _check_vars(a, b)
    exact, order, caps = _combined_meta((a, b), a.order + b.order)
    if exact:
        return TruncSeries(a.vars, a.poly*b.poly, exact=True)

    result = TruncSeries(a.vars, order=order, caps=caps)
    groups = result._groups()
    limits = [cap for _,cap in groups]
    blocks_a, blocks_b = _split(a.poly, groups), _split(b.poly, groups)
    poly = a.ring.zero
    for ka,pa in blocks_a:
        for kb,pb in blocks_b:
            if all(x + y <= c for x,y,c in zip(ka, kb, limits)):
                poly += pa*pb
    result.poly = poly
    return result


def differentiate(a: TruncSeries, var: str) -> TruncSeries:
    """
    Formal partial derivative.  The order drops by one, as does every cap on
    a group that contains `var`.
    """

    i = a._index(var)
    poly = a.poly.diff(a.ring.gens[i])
    if a.exact:
        return TruncSeries(a.vars, poly, exact=True)
    if a.order < 1:
        raise BudgetError(f"Cannot differentiate an order-{a.order} series")
    caps = tuple((names, cap - 1 if var in names else cap) for names,cap in a.caps)
    return TruncSeries(a.vars, poly, order=a.order-1, caps=caps)


def truncate(a: TruncSeries, order: Optional[int]=None, caps=None) -> TruncSeries:
    """
    Forget all information above `order` and beyond `caps`.
    """

    if order is None:
        order = a.order
    order = min(order, a.order) if not a.exact else order
    caps = merge_caps(a.caps, caps)
    return TruncSeries(a.vars, a.poly, order=order, caps=caps)


def homogeneous_part(a: TruncSeries, degree: int) -> TruncSeries:
    """
    Exact polynomial holding the terms of total degree `degree`.
    """

    if not a.exact and degree > a.order:
        raise BudgetError(f"Degree {degree} is beyond the truncation order {a.order}")
    terms = {m: c for m,c in a.poly.items() if sum(m) == degree}
    return TruncSeries(a.vars, a.ring.from_dict(terms), exact=True)


def conjugate(a: TruncSeries) -> TruncSeries:
    """
    Conjugate every coefficient (the series ā with ā(Z) = conj(a(conj Z))).
    """

    poly = a.ring.from_dict({m: conj(c) for m,c in a.poly.items()})
    return a._like(poly)


def embed(a: TruncSeries, vars: Sequence[str]) -> TruncSeries:
    """
    View `a` as a series in the larger variable list `vars`.
    """

    vars = tuple(vars)
    missing = [v for v in a.vars if v not in vars]
    if missing:
        raise ValueError(f"Variables {missing} are not part of {vars}")
    position = [vars.index(v) for v in a.vars]
    ring = _ring(vars)
    terms = {}
    for monom,coeff in a.poly.items():
        new = [0]*len(vars)
        for p,e in zip(position, monom):
            new[p] = e
        terms[tuple(new)] = coeff
    poly = ring.from_dict(terms)
    if a.exact:
        return TruncSeries(vars, poly, exact=True)
    return TruncSeries(vars, poly, order=a.order, caps=a.caps)


def rename(a: TruncSeries, mapping: Dict[str, str]) -> TruncSeries:
    """
    Rename variables, keeping their positions.
    """

    vars = tuple(mapping.get(v, v) for v in a.vars)
    if len(set(vars)) != len(vars):
        raise ValueError(f"Renaming produces duplicate variables: {vars}")
    poly = _ring(vars).from_dict(dict(a.poly.items()))
    if a.exact:
        return TruncSeries(vars, poly, exact=True)
    caps = tuple((tuple(mapping.get(n, n) for n in names), cap) for names,cap in a.caps)
    return TruncSeries(vars, poly, order=a.order, caps=caps)


def coefficient(a: TruncSeries, exponents: Dict[str, int]) -> TruncSeries:
    """
    Coefficient of the monomial ∏ v^e (v, e from `exponents`) as a series in
    the remaining variables.
    """

    idx = [a._index(v) for v in exponents]
    exps = [exponents[v] for v in exponents]
    keep = [i for i in range(len(a.vars)) if i not in idx]
    if not keep:
        raise ValueError("At least one variable has to remain")
    vars = tuple(a.vars[i] for i in keep)
    total = sum(exps)
    terms = {}
    for monom,coeff in a.poly.items():
        if all(monom[i] == e for i,e in zip(idx, exps)):
            terms[tuple(monom[i] for i in keep)] = coeff
    poly = _ring(vars).from_dict(terms)
    if a.exact:
        return TruncSeries(vars, poly, exact=True)
    caps = []
    for names,cap in a.caps:
        rest = tuple(n for n in names if n in vars)
        if rest:
            caps.append((rest, cap - sum(exponents.get(n, 0) for n in names)))
    return TruncSeries(vars, poly, order=a.order-total, caps=caps)


def evaluate(a: TruncSeries, point: Sequence) -> GaussRational:
    """
    Value of the stored polynomial at `point` (one entry per variable).
    """

    if len(point) != len(a.vars):
        raise ValueError(f"Point has {len(point)} entries, expected {len(a.vars)}")
    values = [gauss(p) for p in point]
    total = QQ_I.zero
    for monom,coeff in a.poly.items():
        term = coeff
        for v,e in zip(values, monom):
            if e:
                term = term*v**e
        total += term
    return total


def substitute(a: TruncSeries, assignment: Dict[str, Union[TruncSeries, object]],
               vars: Optional[Sequence[str]]=None, caps=None) -> TruncSeries:
    """
    Compose `a` with the series in `assignment`.

    The result lives in the variables of the assigned series (or `vars`);
    variables of `a` that are not assigned must also be variables of the
    result and are kept.  Order rule, with v the smallest valuation of the
    assigned series and o the smallest order of the inexact ones:

      * `a` exact:   order = o
      * otherwise:   order = min(o, (a.order + 1)*v - 1)

    Assigned series with a nonzero constant term (including plain numbers)
    are only allowed when `a` is exact, since otherwise infinitely many
    terms of `a` would contribute to every coefficient.

    Caps of the assigned series carry over.  Caps of a capped `a` cannot be
    translated automatically: the caller passes the result `caps` whose
    soundness follows from the valuations of the substituted series.
    """

    images = {}
    for name,value in assignment.items():
        if name not in a.vars:
            raise ValueError(f"Cannot substitute unknown variable '{name}'")
        images[name] = value
    series_images = [s for s in images.values() if isinstance(s, TruncSeries)]
    if vars is None:
        vars = series_images[0].vars if series_images else a.vars
    vars = tuple(vars)
    for s in series_images:
        if s.vars != vars:
            raise ValueError(f"Substituted series use {s.vars}, expected {vars}")
    for name in a.vars:
        if name not in images:
            if name not in vars:
                raise ValueError(f"Variable '{name}' is neither substituted nor kept")
            images[name] = TruncSeries.variable(vars, name)
        elif not isinstance(images[name], TruncSeries):
            images[name] = TruncSeries.constant(vars, images[name])
    ordered = [images[name] for name in a.vars]

    # Order bookkeeping
    valuations = [s.valuation() for s in ordered]
    has_constant = any(v == 0 for v in valuations)
    if has_constant and not a.exact:
        raise ValueError("Substituting a series with nonzero constant term into a truncated series")
    if a.caps and caps is None:
        raise ValueError("Substitution into a capped series needs explicit result caps")
    inexact = [s for s in ordered if not s.exact]
    exact = a.exact and not inexact
    order = min([s.order for s in inexact], default=None)
    if not a.exact:
        v = min([val for val in valuations if val is not None], default=None)
        bound = a.order if v is None else (a.order + 1)*v - 1
        order = bound if order is None else min(order, bound)
    result_caps = merge_caps(caps, *[s.caps for s in inexact])

    ring = _ring(vars)
    if exact:
        template = None
        one = TruncSeries(vars, ring.one, exact=True)
    else:
        template = TruncSeries(vars, order=order, caps=result_caps)
        one = TruncSeries(vars, ring.one, order=order, caps=result_caps)
        ordered = [s if s.exact else truncate(s, order, result_caps) for s in ordered]
        ordered = [TruncSeries(vars, s.poly, order=order, caps=result_caps) if s.exact else s for s in ordered]

    ## Evaluate monomials through a prefix cache of partial products
    powers = {}
    def power(i, e):
        key = (i, e)
        if key not in powers:
            powers[key] = ordered[i] if e == 1 else power(i, e - 1)*ordered[i]
        return powers[key]

    low = [val if val is not None else 0 for val in valuations]
    cache = {(): one}
    poly = ring.zero
    for monom,coeff in sorted(a.poly.items()):
        if not exact and sum(l*e for l,e in zip(low, monom)) > order:
            continue
        if not exact and any(val is None and e > 0 for val,e in zip(valuations, monom)):
            continue
        prefix = ()
        for i,e in enumerate(monom):
            parent = prefix
            prefix = prefix + (e,)
            if prefix not in cache:
                cache[prefix] = cache[parent] if e == 0 else cache[parent]*power(i, e)
        poly += cache[prefix].poly.mul_ground(coeff)

    if exact:
        return TruncSeries(vars, poly, exact=True)
    template.poly = template._trim(poly)
    return template


def _constant_jacobian(F: Sequence[TruncSeries], unknowns: Sequence[str]) -> DomainMatrix:
    rows = []
    for f in F:
        row = []
        for u in unknowns:
            monom = [0]*len(f.vars)
            monom[f._index(u)] = 1
            row.append(f.poly.get(tuple(monom), QQ_I.zero))
        rows.append(row)
    return DomainMatrix(rows, (len(F), len(unknowns)), QQ_I)


def solve_implicit(F: Sequence[TruncSeries], unknowns: Sequence[str], order: Optional[int]=None,
                   caps=None) -> List[TruncSeries]:
    """
    Solve F(u, x) = 0 for u = u(x) with u(0) = 0 by the implicit function
    theorem.  All F share their variables; `unknowns` lists the u-variables,
    the remaining variables are the parameters x.  The iteration
    u <- u - J0^-1 F(u, x), with J0 the constant Jacobian in u, gains at least
    one degree per step and stops once a correction vanishes.

    Truncated equations must share one order; systems made only of exact
    polynomials need an explicit `order` for the solution.
    """

    F = list(F)
    unknowns = list(unknowns)
    if len(F) != len(unknowns) or not F:
        raise ValueError(f"Need a square system, got {len(F)} equations in {len(unknowns)} unknowns")
    vars = F[0].vars
    for f in F:
        _check_vars(F[0], f)
    for u in unknowns:
        if u not in vars:
            raise ValueError(f"Unknown '{u}' is not a variable of the system")
    params = tuple(v for v in vars if v not in unknowns)
    if not params:
        raise ValueError("The system has no parameters")
    for f in F:
        if f.constant_term():
            raise ValueError("F(0, 0) must vanish")
        for names,_ in f.caps:
            if any(n in unknowns for n in names):
                raise ValueError("Caps on unknowns are not supported")

    inexact = [f for f in F if not f.exact]
    if len(set(f.order for f in inexact)) > 1:
        raise ValueError("Inconsistent truncation orders: " + ", ".join(str(f.order) for f in inexact))
    if inexact:
        if order is not None and order > inexact[0].order:
            raise BudgetError(f"Requested order {order} exceeds the equations' order {inexact[0].order}")
        order = inexact[0].order if order is None else order
    elif order is None:
        raise ValueError("Solving an exact system needs an explicit order")
    caps = merge_caps(caps, *[f.caps for f in F])

    J0 = _constant_jacobian(F, unknowns)
    if J0.rank() != len(unknowns):
        raise ValueError("Jacobian with respect to the unknowns is singular at the origin")
    J0inv = J0.inv().to_Matrix().tolist()
    J0inv = [[QQ_I.from_sympy(v) for v in row] for row in J0inv]

    max_iter = order + 1
    covered = set(n for names,_ in caps for n in names)
    if caps and covered.issuperset(params):
        max_iter = min(max_iter, sum(cap for _,cap in caps) + 1)
    solution = [TruncSeries(params, order=order, caps=caps) for _ in unknowns]
    for step in range(max_iter + 1):
        assignment = dict(zip(unknowns, solution))
        residual = [substitute(f, assignment, vars=params, caps=caps) for f in F]
        if all(r.is_zero() for r in residual):
            break
        new = []
        for i,u in enumerate(solution):
            correction = u
            for j,r in enumerate(residual):
                if J0inv[i][j]:
                    correction = correction - r*J0inv[i][j]
            new.append(correction)
        solution = new
    else:
        logger.debug("solve_implicit stopped after %i iterations", max_iter + 1)
    return solution


def vanishing_order(a: TruncSeries, direction: Sequence) -> Optional[int]:
    """
    Lowest power of λ in a(λ·direction); None means that every coefficient up
    to the truncation order vanishes ("beyond truncation").
    """

    if len(direction) != len(a.vars):
        raise ValueError(f"Direction has {len(direction)} entries, expected {len(a.vars)}")
    direction = [gauss(d) for d in direction]
    values = {}
    for monom,coeff in a.poly.items():
        degree = sum(monom)
        if not a.exact and degree > a.order:
            continue
        term = coeff
        for v,e in zip(direction, monom):
            if e:
                term = term*v**e
        values[degree] = values.get(degree, QQ_I.zero) + term
    nonzero = [d for d,v in values.items() if v]
    return min(nonzero) if nonzero else None


def laurent_c0(P: TruncSeries, lam: str, m: int) -> TruncSeries:
    """
    Constant term in λ of P(λ, t/λ^m): the sum of P_{ν,α} t^α over ν = m|α|.
    The result is known up to |α| ≤ floor(order/(m+1)), further limited by
    any caps of P.
    """

    if m < 1:
        raise ValueError(f"Weight m must be at least 1, got {m}")
    li = P._index(lam)
    keep = [i for i in range(len(P.vars)) if i != li]
    vars = tuple(P.vars[i] for i in keep)
    terms = {}
    for monom,coeff in P.poly.items():
        alpha = tuple(monom[i] for i in keep)
        if monom[li] == m*sum(alpha):
            terms[alpha] = coeff
    poly = _ring(vars).from_dict(terms)
    if P.exact:
        return TruncSeries(vars, poly, exact=True)
    order = P.order//(m + 1)
    for names,cap in P.caps:
        weight = (m if lam in names else 0) + (1 if any(n != lam for n in names) else 0)
        if weight:
            order = min(order, cap//weight)
    return TruncSeries(vars, poly, order=order)


def reciprocal(a: TruncSeries) -> TruncSeries:
    """
    1/a for a series with nonzero constant term.
    """

    c = a.constant_term()
    if not c:
        raise ZeroDivisionError("Series is not a unit")
    if a.exact and a.degree() == 0:
        return TruncSeries.constant(a.vars, QQ_I.one/c)
    inv = QQ_I.one/c
    result = TruncSeries(a.vars, a.ring.ground_new(inv), order=a.order, caps=a.caps)
    # Newton iteration b <- b (2 - a b) doubles the number of correct degrees
    correct = 1
    while correct <= a.order:
        result = result*(2 - a*result)
        correct *= 2
    return result


def unit_root(a: TruncSeries, m: int) -> TruncSeries:
    """
    The m-th root of a series with constant term 1, from the binomial series
    of (1 + x)^(1/m).
    """

    if a.constant_term() != QQ_I.one:
        raise ValueError("unit_root needs a series with constant term 1")
    x = a - 1
    exponent = Rational(1, m)
    result = TruncSeries.constant(a.vars, 1)
    power = TruncSeries.constant(a.vars, 1)
    for j in range(1, a.order + 1):
        power = power*x
        if power.is_zero():
            break
        result = result + power*gauss(binomial(exponent, j))
    if a.exact:
        result = truncate(result, a.order)
    return result


def laurent_c0_order_bound(R: TruncSeries, h: int, delta: TruncSeries, lam: str) -> Tuple[TruncSeries, bool]:
    """
    Constant term in λ of R(λ, t/δ(λ)) together with the certificate that its
    vanishing order exceeds h/(g+1), g being the vanishing order of δ.

    R must vanish to order h, i.e. all terms of degree ≤ h are zero; δ is a
    univariate series in λ.
    """

    if delta.vars != (lam,):
        raise ValueError(f"δ must be a univariate series in '{lam}'")
    if not R.exact and R.order < h:
        raise BudgetError(f"A series of order {R.order} cannot certify o(|.|^{h})")
    low = R.valuation()
    if low is not None and low <= h:
        raise ValueError(f"R has a nonzero term of degree {low} ≤ {h}")
    g = delta.valuation()
    if g is None:
        raise ValueError("δ vanishes identically")

    li = R._index(lam)
    keep = [i for i in range(len(R.vars)) if i != li]
    vars = tuple(R.vars[i] for i in keep)
    order = R.degree() if R.exact else R.order//(g + 1)
    if not delta.exact and g > 0:
        order = min(order, (delta.order - g)//g)

    ## δ = λ^g u(λ) with u a unit; expand with powers of 1/u
    u_order = g*order if delta.exact else delta.order - g
    u = TruncSeries(delta.vars, {(e - g,): c for (e,),c in delta.poly.items()}, order=max(u_order, 0))
    uinv = reciprocal(u)

    inv_powers = {0: TruncSeries.constant(delta.vars, 1)}
    terms = {}
    for monom,coeff in R.poly.items():
        alpha = tuple(monom[i] for i in keep)
        size = sum(alpha)
        if size > order:
            continue
        shift = g*size - monom[li]
        if shift < 0:
            continue
        if size not in inv_powers:
            inv_powers[size] = inv_powers[size - 1]*uinv if size - 1 in inv_powers else uinv**size
        c = inv_powers[size].poly.get((shift,), QQ_I.zero)
        if c:
            terms[alpha] = terms.get(alpha, QQ_I.zero) + coeff*c
    c0 = TruncSeries(vars, _ring(vars).from_dict({k: v for k,v in terms.items() if v}), order=order)
    low = c0.valuation()
    certified = low is None or (g + 1)*low > h
    return c0, certified


class LaurentSeries(object):
    """
    Laurent expansion Σ_k c_k λ^k whose coefficients are truncated series in
    the remaining variables.  Each coefficient carries its own order, since
    fewer coefficients of the source series feed high powers of λ.
    """

    def __init__(self, terms: Dict[int, TruncSeries]):
        terms = {k: v for k,v in terms.items() if not v.is_zero()}
        self.terms = terms
        self.min_exp = min(terms) if terms else 0
        self.max_exp = max(terms) if terms else 0

    @classmethod
    def expand(cls, P: TruncSeries, lam: str, m: int) -> 'LaurentSeries':
        """
        Expansion of P(λ, t/λ^m).
        """

        li = P._index(lam)
        keep = [i for i in range(len(P.vars)) if i != li]
        vars = tuple(P.vars[i] for i in keep)
        grouped = {}
        for monom,coeff in P.poly.items():
            alpha = tuple(monom[i] for i in keep)
            k = monom[li] - m*sum(alpha)
            grouped.setdefault(k, {})[alpha] = coeff
        terms = {}
        for k,coeffs in grouped.items():
            poly = _ring(vars).from_dict(coeffs)
            if P.exact:
                terms[k] = TruncSeries(vars, poly, exact=True)
            else:
                order = (P.order - k)//(m + 1) if k <= P.order else 0
                terms[k] = TruncSeries(vars, poly, order=max(order, 0))
        return cls(terms)

    def coefficient(self, k: int) -> Optional[TruncSeries]:
        return self.terms.get(k, None)

    def constant_term(self) -> Optional[TruncSeries]:
        return self.terms.get(0, None)

    def __repr__(self):
        return f"LaurentSeries(exponents {self.min_exp}..{self.max_exp}, {len(self.terms)} terms)"


def multi_indices(nvars: int, max_degree: int, min_degree: int=0) -> List[Tuple[int, ...]]:
    """
    All exponent vectors in `nvars` variables with min_degree ≤ |α| ≤
    max_degree, in graded-lexicographic order.
    """

    def build(count, budget):
        if count == 0:
            yield ()
            return
        for first in range(budget, -1, -1):
            for rest in build(count - 1, budget - first):
                yield (first,) + rest

    out = [alpha for alpha in build(nvars, max_degree) if sum(alpha) >= min_degree]
    return sorted(out, key=lambda a: (sum(a), tuple(-e for e in a)))
