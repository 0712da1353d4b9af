"""
Jets of holomorphic maps between model manifolds: storage, the CR and
"sends M into M'" tests, conversion to jet coordinates and JSON IO.
"""

import os
import json
import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Dict, List, Optional, Sequence, Tuple

from sympy.polys.domains import QQ, QQ_I

from .series import TruncSeries, gauss, substitute, embed, rename, conjugate, multi_indices, GaussRational
from .manifold import ManifoldModel, solved_form

__all__ = ['MapJet', 'CRCheck', 'check_cr_jet', 'jet_indices', 'format_gauss', 'parse_gauss',
           'read_jet', 'write_jet']


logger = logging.getLogger(__name__)


def jet_indices(nvars: int, order: int) -> List[Tuple[int, ...]]:
    """
    Source exponents |α| ≤ order in graded-lexicographic order.
    """

    return multi_indices(nvars, order)


def _alpha_factorial(alpha: Sequence[int]) -> int:
    out = 1
    for a in alpha:
        out *= factorial(a)
    return out


def format_gauss(value: GaussRational) -> List[str]:
    """
    [re, im] as exact rational strings, e.g. ["1/2", "-3"].
    """

    value = gauss(value)
    return [str(QQ.to_sympy(value.x)), str(QQ.to_sympy(value.y))]


def parse_gauss(pair: Sequence) -> GaussRational:
    if len(pair) != 2:
        raise ValueError(f"Expected a [re, im] pair, got {pair!r}")
    re, im = (gauss(str(p)) for p in pair)
    if re.y or im.y:
        raise ValueError(f"Real and imaginary parts must be real, got {pair!r}")
    return QQ_I(re.x, im.x)


@dataclass
class MapJet:
    """
    The r-jet at the origin of a holomorphic map F: (C^N, 0) -> C^N',
    stored by its Taylor coefficients: `coefficients[α]` is the vector of
    coefficients of Z^α in the N' components of F.
    """

    source: ManifoldModel
    target: ManifoldModel
    order: int
    coefficients: Dict[Tuple[int, ...], List[GaussRational]] = field(default_factory=dict)
    is_cr: Optional[bool] = None
    sends_order: Optional[int] = None

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"Jet order must be non-negative, got {self.order}")
        N, Np = self.source.N, self.target.N
        clean = {}
        for alpha,vec in self.coefficients.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != N:
                raise ValueError(f"Exponent {alpha} does not match the source dimension {N}")
            if sum(alpha) > self.order:
                raise ValueError(f"Exponent {alpha} exceeds the jet order {self.order}")
            if len(vec) != Np:
                raise ValueError(f"Coefficient vector for {alpha} has {len(vec)} entries, expected {Np}")
            vec = [gauss(v) for v in vec]
            if any(vec):
                clean[alpha] = vec
        self.coefficients = clean

    ## Construction
    @classmethod
    def from_polynomials(cls, source: ManifoldModel, target: ManifoldModel, F: Sequence[TruncSeries],
                         order: int) -> 'MapJet':
        """
        The jet of order `order` of the map with components F (series in the
        source coordinates Z).
        """

        if len(F) != target.N:
            raise ValueError(f"Expected {target.N} components, got {len(F)}")
        coeffs = {}
        for j,f in enumerate(F):
            f = embed(f, source.Z) if f.vars != source.Z else f
            if not f.exact and f.order < order:
                raise ValueError(f"Component {j+1} is only known to order {f.order} < {order}")
            for alpha,c in f.coeffs.items():
                if sum(alpha) <= order:
                    coeffs.setdefault(alpha, [QQ_I.zero]*target.N)[j] = c
        return cls(source, target, order, coeffs)

    @classmethod
    def from_expressions(cls, source: ManifoldModel, target: ManifoldModel, exprs: Sequence, order: int) -> 'MapJet':
        """
        Jet of a polynomial map given as sympy expressions or strings in the
        source coordinates, e.g. ["2*z1", "4*w1"].
        """

        F = [TruncSeries.from_expr(source.Z, e) for e in exprs]
        return cls.from_polynomials(source, target, F, order)

    @classmethod
    def identity(cls, model: ManifoldModel, order: int) -> 'MapJet':
        F = [TruncSeries.variable(model.Z, v) for v in model.Z]
        return cls.from_polynomials(model, model, F, order)

    @classmethod
    def at_point(cls, source: ManifoldModel, target: ManifoldModel, F: Sequence[TruncSeries], point: Sequence,
                 order: int) -> 'MapJet':
        """
        The jet at the point p of M of the polynomial map F: the Taylor
        coefficients of F(p + Z), with the source model translated to p.
        """

        point = [gauss(v) for v in point]
        moved = source.translate(point)
        shift = {v: TruncSeries.variable(source.Z, v) + c for v,c in zip(source.Z, point)}
        G = [substitute(f if f.vars == source.Z else embed(f, source.Z), shift, vars=source.Z) for f in F]
        return cls.from_polynomials(moved, target, G, order)

    @classmethod
    def from_coordinates(cls, source: ManifoldModel, target: ManifoldModel, order: int,
                         values: Sequence) -> 'MapJet':
        """
        Inverse of coordinates(): Λ^α_i = ∂^α F_i(0).
        """

        indices = jet_indices(source.N, order)
        if len(values) != target.N*len(indices):
            raise ValueError(f"Expected {target.N*len(indices)} jet coordinates, got {len(values)}")
        coeffs = {}
        for i in range(target.N):
            for k,alpha in enumerate(indices):
                v = gauss(values[i*len(indices) + k])/_alpha_factorial(alpha)
                if v:
                    coeffs.setdefault(alpha, [QQ_I.zero]*target.N)[i] = v
        return cls(source, target, order, coeffs)

    ## Views
    def polynomials(self, vars: Optional[Sequence[str]]=None) -> List[TruncSeries]:
        """
        The components of the jet as exact polynomials in the source Z.
        """

        vars = tuple(vars) if vars is not None else self.source.Z
        out = []
        for j in range(self.target.N):
            terms = {alpha: vec[j] for alpha,vec in self.coefficients.items() if vec[j]}
            out.append(TruncSeries(self.source.Z, terms, exact=True))
        if vars != self.source.Z:
            out = [embed(f, vars) for f in out]
        return out

    def conjugate_polynomials(self) -> List[TruncSeries]:
        """
        F̄(ζ) as exact polynomials in the source ζ variables.
        """

        src = self.source
        return [rename(conjugate(f), dict(zip(src.Z, src.zeta))) for f in self.polynomials()]

    def value(self) -> List[GaussRational]:
        return list(self.coefficients.get((0,)*self.source.N, [QQ_I.zero]*self.target.N))

    def coordinates(self) -> List[GaussRational]:
        """
        Jet coordinates Λ^α_i = ∂^α F_i(0) ordered by (component, graded-lex α).
        """

        out = []
        zero = [QQ_I.zero]*self.target.N
        for i in range(self.target.N):
            for alpha in jet_indices(self.source.N, self.order):
                out.append(self.coefficients.get(alpha, zero)[i]*_alpha_factorial(alpha))
        return out

    def truncated(self, order: int) -> 'MapJet':
        if order > self.order:
            raise ValueError(f"Cannot raise the jet order from {self.order} to {order}")
        coeffs = {a: v for a,v in self.coefficients.items() if sum(a) <= order}
        return MapJet(self.source, self.target, order, coeffs)

    def __eq__(self, other):
        if not isinstance(other, MapJet):
            return NotImplemented
        return self.order == other.order and self.coefficients == other.coefficients

    ## JSON
    def to_json(self, source_name: Optional[str]=None, target_name: Optional[str]=None) -> dict:
        coefficients = []
        for alpha in jet_indices(self.source.N, self.order):
            if alpha in self.coefficients:
                coefficients.append({'alpha': list(alpha),
                                     'value_re_im_pairs': [format_gauss(v) for v in self.coefficients[alpha]]})
        return {'source_model': source_name or self.source.label,
                'target_model': target_name or self.target.label,
                'order': self.order,
                'coefficients': coefficients}

    @classmethod
    def from_json(cls, data: dict, source: ManifoldModel, target: ManifoldModel) -> 'MapJet':
        for key in ('order', 'coefficients'):
            if key not in data:
                raise ValueError(f"Jet file is missing '{key}'")
        coeffs = {}
        for entry in data['coefficients']:
            coeffs[tuple(entry['alpha'])] = [parse_gauss(p) for p in entry['value_re_im_pairs']]
        return cls(source, target, int(data['order']), coeffs)


def read_jet(path: str, resolver) -> MapJet:
    """
    Load a jet file; `resolver` maps the model names stored in the file to
    ManifoldModel instances.
    """

    if not os.path.exists(path):
        raise FileNotFoundError(f"Jet file '{path}' does not exist")
    with open(path, 'r', encoding='utf-8') as fh:
        data = json.load(fh)
    source = resolver(data['source_model'])
    target = resolver(data['target_model'])
    return MapJet.from_json(data, source, target)


def write_jet(jet: MapJet, path: str, source_name: Optional[str]=None, target_name: Optional[str]=None):
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(jet.to_json(source_name, target_name), fh, indent=2)
        fh.write('\n')


@dataclass
class CRCheck:
    is_cr: bool
    sends_order: int
    truncation_order: int


def check_cr_jet(jet: MapJet) -> CRCheck:
    """
    Exact residual orders of a jet.  Holomorphic polynomial representatives
    are annihilated by every (0,1) field, so the tangential residuals vanish
    identically and the CR test reduces to the order to which ρ'(F, F̄)
    vanishes on M, computed on the solved form w = Q(z, χ, τ).  The jet is
    accepted as a CR r-jet when that order reaches r.
    """

    source, target = jet.source, jet.target
    Q = solved_form(source)
    params = source.z + source.chi + source.tau
    on_M = {}
    for v in source.z + source.chi + source.tau:
        on_M[v] = TruncSeries.variable(params, v)
    for j,v in enumerate(source.w):
        on_M[v] = Q[j]

    F = jet.polynomials(source.vars)
    Fbar = [embed(f, source.vars) for f in jet.conjugate_polynomials()]
    assignment = dict(zip(target.Z, F))
    assignment.update(zip(target.zeta, Fbar))

    lows, orders = [], []
    for r in target.rho:
        composed = substitute(r, assignment, vars=source.vars, caps=() if r.caps else None)
        restricted = substitute(composed, on_M, vars=params, caps=() if composed.caps else None)
        orders.append(source.kappa_trunc if restricted.exact else restricted.order)
        low = restricted.valuation()
        if low is not None:
            lows.append(low)
    truncation = min(orders)
    sends_order = min(lows) - 1 if lows else truncation
    sends_order = min(sends_order, truncation)
    is_cr = sends_order >= jet.order
    jet.is_cr, jet.sends_order = is_cr, sends_order
    logger.debug("check_cr_jet: sends M into M' to order %i (jet order %i)", sends_order, jet.order)
    return CRCheck(is_cr, sends_order, truncation)
