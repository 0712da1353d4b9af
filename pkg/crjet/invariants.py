"""
Pointwise CR invariants at the origin: Levi form, Hörmander numbers and
type, finite nondegeneracy of manifolds and of map jets, nondegeneracy in
dimension 1, and the order bounds derived from them.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Tuple, Union

from sympy import Matrix, Poly, Symbol, groebner
from sympy.polys.domains import QQ_I
from sympy.polys.matrices import DomainMatrix

from .errors import BudgetError, StageError
from .series import TruncSeries, GaussRational, conj, substitute, differentiate, embed, multi_indices
from .manifold import ManifoldModel, CRFieldBasis, tangential_fields, apply_field, bracket
from .jets import MapJet, check_cr_jet

__all__ = ['LeviForm', 'levi_form', 'levi_nondegenerate', 'HoermanderData', 'hoermander_numbers',
           'NondegReport', 'finite_nondegeneracy', 'jet_nondegeneracy', 'Dimension1Report',
           'nondeg_in_dimension_1', 'Bounds', 'bounds', 'UNDECIDED']


logger = logging.getLogger(__name__)


#: Verdict of nondeg_in_dimension_1 when elimination is not available
UNDECIDED = 'undecided'


def _rank(vectors: List[List[GaussRational]], width: int) -> int:
    if not vectors:
        return 0
    return DomainMatrix(vectors, (len(vectors), width), QQ_I).rank()


def _at_origin(vector: List[TruncSeries]) -> List[GaussRational]:
    return [c.constant_term() for c in vector]


def _transverse(model: ManifoldModel, field: List[TruncSeries]) -> List[GaussRational]:
    # ρ_Z(0)·X_Z(0): the component of X outside T^c_0 M ⊗ C, up to the factor 2i
    grad = model.rho_Z0().to_Matrix().tolist()
    X = _at_origin(field[:model.N])
    out = []
    for row in grad:
        total = QQ_I.zero
        for g,x in zip(row, X):
            total += QQ_I.from_sympy(g)*x
        out.append(total)
    return out


## Levi form

@dataclass
class LeviForm:
    """
    Values (1/2i)·π[L̄_i, L_j](0) ∈ C^d of the Levi form on the field basis;
    `matrix[i][j]` is a list of d Gaussian rationals.
    """

    matrix: List[List[List[GaussRational]]]
    basis: CRFieldBasis

    @property
    def n(self) -> int:
        return len(self.matrix)

    @property
    def d(self) -> int:
        return self.basis.model.d

    def is_hermitian(self) -> bool:
        for i in range(self.n):
            for j in range(self.n):
                for a,b in zip(self.matrix[i][j], self.matrix[j][i]):
                    if a != conj(b):
                        return False
        return True

    def component(self, c: int) -> List[List[GaussRational]]:
        """
        The n x n Hermitian matrix of the c-th scalar component.
        """

        return [[self.matrix[i][j][c] for j in range(self.n)] for i in range(self.n)]

    def rank(self) -> int:
        """
        Rank of L ↦ 𝓛(L, ·), the size of the image of the null space test.
        """

        rows = []
        for j in range(self.n):
            for c in range(self.d):
                rows.append([self.matrix[i][j][c] for i in range(self.n)])
        return _rank(rows, self.n)

    def span_dimension(self) -> int:
        return _rank([self.matrix[i][j] for i in range(self.n) for j in range(self.n)], self.d)


def levi_form(model: ManifoldModel, basis: Optional[CRFieldBasis]=None) -> LeviForm:
    """
    Levi form at the origin on the basis of tangential fields.
    """

    if basis is None:
        basis = tangential_fields(model)
    hol, anti = basis.holomorphic(), basis.antiholomorphic()
    matrix = []
    for Lb in anti:
        row = []
        for L in hol:
            row.append(_transverse(model, bracket(Lb, L, model.vars)))
        matrix.append(row)
    form = LeviForm(matrix, basis)
    if not form.is_hermitian():
        raise StageError("Levi form is not Hermitian; check the reality of ρ", stage='invariants')
    return form


def levi_nondegenerate(form: LeviForm) -> bool:
    """
    Both conditions: 𝓛(L1, ·) = 0 forces L1 = 0, and the values span C^d.
    """

    return form.rank() == form.n and form.span_dimension() == form.d


## Hörmander numbers

@dataclass
class HoermanderData:
    """
    Bracket filtration at the origin.  `dims[μ-1]` is the dimension of the
    span of all brackets of length ≤ μ of L_j and L̄_j; `words` names one
    bracket realizing each jump.
    """

    mu: List[int]
    nu: Optional[int]
    dims: List[int]
    finite_type: bool
    words: List[Tuple[int, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {'mu': self.mu, 'nu': self.nu, 'dims': self.dims, 'finite_type': self.finite_type,
                'words': [{'length': l, 'bracket': w} for l,w in self.words]}


def _nonzero(field: List[TruncSeries]) -> bool:
    return any(not c.is_zero() for c in field)


def hoermander_numbers(model: ManifoldModel, max_len: int, basis: Optional[CRFieldBasis]=None) -> HoermanderData:
    """
    Iterated bracket filtration g_1 = span{L_j, L̄_j}, g_{μ+1} = g_μ + [g_1, g_μ]
    evaluated at 0.  Complex spans of (L_j, L̄_j) brackets have the real
    dimensions of the filtration of Re L_j, Im L_j.
    """

    if basis is None:
        basis = tangential_fields(model)
    inexact = [c for L in basis.fields for c in L if not c.exact]
    if inexact and max_len > model.kappa_trunc - 1:
        raise BudgetError(f"bracket length {max_len} exceeds the truncation budget {model.kappa_trunc - 1}")

    n, d = model.n, model.d
    vars = model.vars
    width = 2*model.N
    generators = [(f"L{j+1}", L) for j,L in enumerate(basis.holomorphic())]
    generators += [(f"Lbar{j+1}", L) for j,L in enumerate(basis.antiholomorphic())]

    values = [_at_origin(L) for _,L in generators]
    dims = [_rank(values, width)]
    if dims[0] != 2*n:
        raise StageError(f"tangential fields span {dims[0]} dimensions at 0, expected {2*n}", stage='invariants')

    mu, words = [], []
    level = generators
    length = 1
    while dims[-1] < 2*n + d and length < max_len:
        length += 1
        new_level = []
        for gname,G in generators:
            for name,X in level:
                B = bracket(G, X, vars)
                if not _nonzero(B):
                    continue
                for r in model.rho:
                    residual = apply_field(B, r, vars)
                    if residual.valuation() is not None:
                        raise StageError(f"bracket [{gname}, {name}] is not tangent to M", stage='invariants')
                word = f"[{gname}, {name}]"
                new_level.append((word, B))
                candidate = _at_origin(B)
                if _rank(values + [candidate], width) > _rank(values, width):
                    values.append(candidate)
                    mu.append(length)
                    words.append((length, word))
        dims.append(_rank(values, width))
        level = new_level
        logger.debug("hoermander_numbers: length %i, %i brackets, span %i", length, len(level), dims[-1])
        if not level:
            break

    finite_type = dims[-1] == 2*n + d
    nu = max(mu) if finite_type and mu else None
    if not finite_type:
        logger.warning("bracket filtration stalls at dimension %i < %i within length %i",
                       dims[-1], 2*n + d, length)
    return HoermanderData(sorted(mu), nu, dims, finite_type, words)


## Finite nondegeneracy

@dataclass
class NondegReport:
    """
    Span dimensions of L̄^α ρ_Z at 0 for |α| ≤ q, q = 0..l_max.  `l` is the
    first q reaching `target_dim`, None if not reached within l_max;
    `absolute` marks a negative verdict that holds for every order.
    """

    l: Optional[int]
    span_dims: List[int]
    target_dim: int
    l_max: int
    absolute: bool = False

    @property
    def nondegenerate(self) -> bool:
        return self.l is not None

    def verdict(self) -> Union[int, str]:
        if self.l is not None:
            return self.l
        qualifier = 'stabilized: absolute' if self.absolute else 'relative to budget'
        return f"none ≤ {self.l_max} ({qualifier})"


def _gradient_spans(gradients: List[List[TruncSeries]], conj_fields: List[List[TruncSeries]],
                    vars, l_max: int, width: int) -> Tuple[List[int], Optional[int]]:
    n = len(conj_fields)
    derived = {(0,)*n: gradients}
    spans, vectors, l = [], [], None
    for q in range(l_max + 1):
        for alpha in multi_indices(n, q, min_degree=q):
            if alpha not in derived:
                j = next(i for i,a in enumerate(alpha) if a)
                prev = tuple(a - (1 if i == j else 0) for i,a in enumerate(alpha))
                derived[alpha] = [[apply_field(conj_fields[j], c, vars) for c in g] for g in derived[prev]]
            for g in derived[alpha]:
                vectors.append(_at_origin(g))
        spans.append(_rank(vectors, width))
        if l is None and spans[-1] == width:
            l = q
            break
    return spans, l


def _stabilized(model: ManifoldModel) -> bool:
    # Every L̄^α ρ_Z(0) is a combination of ζ-Taylor coefficients of ρ_Z(0, ζ)
    if not model.exact:
        return False
    at_zero = {v: 0 for v in model.Z}
    vectors = {}
    for r in model.rho:
        column = [substitute(differentiate(r, v), at_zero, vars=model.zeta) for v in model.Z]
        for k,c in enumerate(column):
            for monom,coeff in c.coeffs.items():
                vectors.setdefault((id(r), monom), [QQ_I.zero]*model.N)[k] = coeff
    return _rank(list(vectors.values()), model.N) < model.N


def finite_nondegeneracy(model: ManifoldModel, l_max: int, basis: Optional[CRFieldBasis]=None) -> NondegReport:
    """
    Span dimensions of {L̄^α ρ^j_Z(0) : |α| ≤ q, j ≤ d} and the degeneracy l.
    """

    if basis is None:
        basis = tangential_fields(model)
    if not model.exact and l_max > model.kappa_trunc - 1:
        raise BudgetError(f"l_max {l_max} exceeds the truncation budget {model.kappa_trunc - 1}")
    zero = TruncSeries.zero(model.vars)
    gradients = [[differentiate(r, v) for v in model.Z] for r in model.rho]
    fields = [[zero]*model.N + list(L) for L in basis.conj_fields]
    spans, l = _gradient_spans(gradients, fields, model.vars, l_max, model.N)
    absolute = l is None and _stabilized(model)
    if l is None:
        logger.warning("no finite nondegeneracy up to order %i%s", l_max, " (absolute)" if absolute else '')
    return NondegReport(l, spans, model.N, l_max, absolute)


def jet_nondegeneracy(source: ManifoldModel, target: ManifoldModel, jet: MapJet, l_max: int,
                      basis: Optional[CRFieldBasis]=None) -> NondegReport:
    """
    Span dimensions of {L̄^α (ρ'^j_Z')(F(Z), F̄(ζ))(0)} for the polynomial
    representative F of a CR jet.
    """

    if jet.source is not source or jet.target is not target:
        if jet.source.N != source.N or jet.target.N != target.N:
            raise ValueError("Jet dimensions do not match the models")
    if jet.order < l_max:
        raise BudgetError(f"jet order {jet.order} is below l_max = {l_max}")
    check = check_cr_jet(jet)
    if not check.is_cr:
        raise StageError(f"jet is not a CR jet of order {jet.order}: ρ'(F, F̄) vanishes only to order "
                         f"{check.sends_order}", stage='invariants')
    if basis is None:
        basis = tangential_fields(source)

    F = jet.polynomials(source.vars)
    Fbar = [embed(f, source.vars) for f in jet.conjugate_polynomials()]
    assignment = dict(zip(target.Z, F))
    assignment.update(zip(target.zeta, Fbar))
    gradients = []
    for r in target.rho:
        row = []
        for v in target.Z:
            g = differentiate(r, v)
            row.append(substitute(g, assignment, vars=source.vars, caps=() if g.caps else None))
        gradients.append(row)
    zero = TruncSeries.zero(source.vars)
    fields = [[zero]*source.N + list(L) for L in basis.conj_fields]
    spans, l = _gradient_spans(gradients, fields, source.vars, l_max, target.N)
    return NondegReport(l, spans, target.N, l_max)


## Nondegeneracy in dimension 1

@dataclass
class Dimension1Report:
    verdict: Union[bool, str]
    l: Optional[int]
    l_max: int
    minors: int = 0


def _escape_polys(model: ManifoldModel, basis: CRFieldBasis, l_max: int, u, w):
    # P_k(u, w) = π(ad(L_u)^k L̄_w)(0) as sympy polynomials in u, w
    n = model.n
    vars = model.vars
    hol, anti = basis.holomorphic(), basis.antiholomorphic()
    ring_vars = tuple(str(s) for s in u) + tuple(str(s) for s in w)
    lifted_vars = vars + ring_vars

    def lift(field, weights):
        out = []
        for c in range(len(vars)):
            total = TruncSeries.zero(lifted_vars)
            for k,F in enumerate(field):
                total = total + embed(F[c], lifted_vars)*TruncSeries.variable(lifted_vars, weights[k])
            out.append(total)
        return out

    Lu = lift(hol, ring_vars[:n])
    Lw = lift(anti, ring_vars[n:])
    zero = TruncSeries.zero(lifted_vars)
    Lu = Lu + [zero]*len(ring_vars)
    Lw = Lw + [zero]*len(ring_vars)

    at_origin = {v: 0 for v in vars}
    grad = model.rho_Z0().to_Matrix().tolist()
    polys = []
    X = Lw
    for k in range(1, l_max + 1):
        X = bracket(Lu, X, lifted_vars)
        coeffs = [substitute(c, at_origin, vars=ring_vars) for c in X[:model.N]]
        for row in grad:
            total = TruncSeries.zero(ring_vars)
            for g,c in zip(row, coeffs):
                if g:
                    total = total + c*QQ_I.from_sympy(g)
            polys.append((k, total.as_expr()))
    return polys


def nondeg_in_dimension_1(model: ManifoldModel, l_max: int, basis: Optional[CRFieldBasis]=None) -> Dimension1Report:
    """
    Decide whether for all directions u of L1(0) and v of L(0) some bracket
    [L1, ..., [L1, L̄]] of length ≤ l + 1 leaves T^c_0 M ⊗ C.

    The bracket values are linear in w = v̄ (treated as an independent
    projective variable), so a common zero exists iff the stacked coefficient
    matrix A(u) drops rank; the maximal minors are eliminated over P^{n-1}
    chart by chart with Gröbner bases.
    """

    n = model.n
    if n < 2:
        raise ValueError("nondegeneracy in dimension 1 needs CR dimension at least 2")
    if basis is None:
        basis = tangential_fields(model)
    u = [Symbol(f"u{i+1}") for i in range(n)]
    w = [Symbol(f"v{i+1}") for i in range(n)]
    polys = _escape_polys(model, basis, l_max, u, w)

    for l in range(1, l_max + 1):
        rows = []
        for k,expr in polys:
            if k > l:
                break
            p = Poly(expr, *w)
            rows.append([p.coeff_monomial(wi) for wi in w])
        if len(rows) < n:
            continue
        minors = []
        A = Matrix(rows)
        for idx in combinations(range(len(rows)), n):
            m = A.extract(list(idx), list(range(n))).det().expand()
            if m != 0:
                minors.append(m)
        if not minors:
            continue
        empty = True
        try:
            for i in range(n):
                chart = [m.subs(u[i], 1) for m in minors]
                chart += [u[j] for j in range(i)]
                gens = [s for j,s in enumerate(u) if j != i]
                if not gens:
                    raise ValueError("projective line needs two coordinates")
                G = groebner(chart, *gens, order='grevlex', domain=QQ_I)
                if not (len(G.exprs) == 1 and G.exprs[0].is_number and G.exprs[0] != 0):
                    empty = False
                    break
        except Exception as e:
            logger.warning("nondeg_in_dimension_1: elimination failed (%s)", e)
            return Dimension1Report(UNDECIDED, None, l_max, len(minors))
        if empty:
            return Dimension1Report(True, l, l_max, len(minors))
    return Dimension1Report(False, None, l_max)


## Bounds

@dataclass
class Bounds:
    r: int
    k: int
    m_bound: int

    def as_dict(self) -> dict:
        return {'r': self.r, 'k': self.k, 'm_bound': self.m_bound}


def bounds(d: int, l: int, hoermander: Union[HoermanderData, int]) -> Bounds:
    """
    r = 2(d+1)l, k = 4(d²+d)νl + 4(d²-1)l + 2dν - 2d + 1 and
    m_bound = 2(μ_1 + ... + μ_d - d).  An integer `hoermander` is read as ν
    with all μ_j = ν, which gives the coarse bound m ≤ 2d(ν-1).
    """

    if d < 1 or l < 1:
        raise ValueError(f"bounds need d ≥ 1 and l ≥ 1, got d={d}, l={l}")
    if isinstance(hoermander, HoermanderData):
        if not hoermander.finite_type:
            raise ValueError("bounds need a manifold of finite type")
        nu, mu = hoermander.nu, hoermander.mu
    else:
        nu = int(hoermander)
        mu = [nu]*d
    if nu < 2:
        raise ValueError(f"type ν must be at least 2, got {nu}")
    if len(mu) != d:
        raise ValueError(f"expected {d} Hörmander numbers, got {mu}")
    r = 2*(d + 1)*l
    k = 4*(d*d + d)*nu*l + 4*(d*d - 1)*l + 2*d*nu - 2*d + 1
    m_bound = 2*(sum(mu) - d)
    return Bounds(r, k, m_bound)
