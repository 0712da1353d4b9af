"""
Generic real submanifolds M = {ρ(Z, Z̄) = 0} of C^N given by complexified
polynomial defining functions ρ(Z, ζ), together with the geometric primitives
the invariants and the reflection pipeline need: tangential CR vector fields,
normal coordinates and approximate straightening of holomorphic frames.

Variables are always ordered (z1..zn, w1..wd, chi1..chin, tau1..taud); the
base point is the origin.
"""

import os
import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

from sympy.polys.domains import QQ_I
from sympy.polys.matrices import DomainMatrix

from .errors import ModelError, BudgetError, StageError
from .series import (TruncSeries, gauss, substitute, differentiate, truncate, conjugate, conj, embed,
                     rename, evaluate, solve_implicit, multi_indices)
from .matrices import inverse_matrix, constant_matrix, mat_vec
from .parser import read_model, complexify

__all__ = ['ManifoldModel', 'CRFieldBasis', 'StraighteningResult', 'parse_model', 'load_model',
           'apply_field', 'bracket', 'tangential_fields', 'solved_form', 'normal_coordinates',
           'straighten_approx', 'is_normal', 'invert_change', 'DEFAULT_KAPPA']


logger = logging.getLogger(__name__)


#: Default truncation order for derived series
DEFAULT_KAPPA = 10


def _constant_entry(u):
    # Frame changes act by constant matrices only
    if isinstance(u, TruncSeries):
        if not u.exact or u.degree() > 0:
            raise ValueError(f"Frame changes must be constant matrices, got the non-constant entry {u}")
        return u.constant_term()
    try:
        return gauss(u)
    except (TypeError, ValueError):
        raise ValueError(f"Frame changes must be constant matrices, got the entry {u!r}")


class ManifoldModel(object):
    """
    A generic real submanifold of C^N of codimension d through the origin.

    `rho` holds the d complexified defining functions as series in the 2N
    variables listed by `vars`.  Polynomial models keep exact series; derived
    models (e.g. after normalization) carry truncated ones.  `graph` records
    that every ρʲ has the form (w_j - τ_j)/(2i) - φ_j^c with φ_j^c depending
    on w and τ only through (w + τ)/2, which is what point_from_real() needs.
    """

    def __init__(self, rho: Sequence[TruncSeries], n: int, d: int, kappa_trunc: int=DEFAULT_KAPPA,
                 label: str='', graph: bool=False, validate: bool=True):
        if n < 1 or d < 1:
            raise ModelError(f"need n ≥ 1 and d ≥ 1, got n={n}, d={d}")
        if len(rho) != d:
            raise ModelError(f"expected {d} defining functions, got {len(rho)}")
        self.n = n
        self.d = d
        self.kappa_trunc = int(kappa_trunc)
        self.label = label
        self.graph = graph
        self.rho = [embed(r, self.vars) if r.vars != self.vars else r for r in rho]
        if validate:
            self.validate()

    ## Variables
    @property
    def N(self) -> int:
        return self.n + self.d

    @property
    def z(self) -> Tuple[str, ...]:
        return tuple(f"z{i+1}" for i in range(self.n))

    @property
    def w(self) -> Tuple[str, ...]:
        return tuple(f"w{j+1}" for j in range(self.d))

    @property
    def chi(self) -> Tuple[str, ...]:
        return tuple(f"chi{i+1}" for i in range(self.n))

    @property
    def tau(self) -> Tuple[str, ...]:
        return tuple(f"tau{j+1}" for j in range(self.d))

    @property
    def Z(self) -> Tuple[str, ...]:
        return self.z + self.w

    @property
    def zeta(self) -> Tuple[str, ...]:
        return self.chi + self.tau

    @property
    def vars(self) -> Tuple[str, ...]:
        return self.Z + self.zeta

    @property
    def exact(self) -> bool:
        return all(r.exact for r in self.rho)

    def __repr__(self):
        return f"ManifoldModel('{self.label}', N={self.N}, n={self.n}, d={self.d})"

    ## Reality involution
    def swap(self, series: TruncSeries) -> TruncSeries:
        """
        Exchange the Z and ζ variables of a series in self.vars.
        """

        mapping = dict(zip(self.Z, self.zeta))
        mapping.update(zip(self.zeta, self.Z))
        tmp = {v: f"_{v}" for v in self.vars}
        renamed = rename(rename(series, tmp), {f"_{k}": v for k,v in mapping.items()})
        return embed(renamed, self.vars)

    def mirror(self, series: TruncSeries) -> TruncSeries:
        """
        The reality involution a ↦ ā(ζ, Z): conjugate coefficients and swap
        Z with ζ.  Real functions on M are its fixed points.
        """

        return conjugate(self.swap(series))

    @property
    def conj_rho(self) -> List[TruncSeries]:
        """
        ρ̄(Z, ζ), the defining functions with conjugated coefficients.
        """

        return [conjugate(r) for r in self.rho]

    ## Validation
    def rho_Z0(self) -> DomainMatrix:
        """
        The d x N matrix ∂ρ/∂Z at the origin.
        """

        return constant_matrix([[differentiate(r, v) for v in self.Z] for r in self.rho])

    def is_real(self) -> bool:
        return all(self.mirror(r) == r for r in self.rho)

    def is_generic(self) -> bool:
        return self.rho_Z0().rank() == self.d

    def validate(self):
        for j,r in enumerate(self.rho):
            if r.constant_term():
                raise ModelError(f"ρ{j+1}(0, 0) = {r.constant_term()} is not zero; the origin must lie on M")
        if not self.is_generic():
            raise ModelError(f"M is not generic at the origin: ∂ρ/∂Z(0) has rank {self.rho_Z0().rank()} < {self.d}")
        for j,r in enumerate(self.rho):
            if self.mirror(r) != r:
                raise ModelError(f"ρ{j+1} is not real: it differs from its conjugate with Z and ζ swapped")

    ## Changes of coordinates and frames
    def contains(self, point: Sequence) -> bool:
        """
        Exact test that the point Z = `point` lies on M.
        """

        point = [gauss(p) for p in point]
        if len(point) != self.N:
            raise ValueError(f"Point has {len(point)} coordinates, expected {self.N}")
        full = point + [conj(p) for p in point]
        return all(not evaluate(r, full) for r in self.rho)

    def translate(self, point: Sequence) -> 'ManifoldModel':
        """
        The model ρ(Z + p, ζ + p̄), moving the point p of M to the origin.
        """

        point = [gauss(p) for p in point]
        if not self.exact:
            raise ModelError("only polynomial models can be translated")
        if not self.contains(point):
            raise ModelError(f"point {[str(p) for p in point]} does not lie on M")
        if not any(point):
            return self
        assignment = {}
        for v,p in zip(self.Z, point):
            assignment[v] = TruncSeries.variable(self.vars, v) + p
        for v,p in zip(self.zeta, point):
            assignment[v] = TruncSeries.variable(self.vars, v) + conj(p)
        rho = [substitute(r, assignment, vars=self.vars) for r in self.rho]
        return ManifoldModel(rho, self.n, self.d, self.kappa_trunc, label=self.label, graph=self.graph)

    def linear_change(self, A: Sequence[Sequence]) -> 'ManifoldModel':
        """
        The model ρ(AZ, Āζ) of the image A^-1(M) for an invertible N x N
        matrix A of Gaussian rationals.
        """

        A = [[gauss(a) for a in row] for row in A]
        if len(A) != self.N or any(len(row) != self.N for row in A):
            raise ValueError(f"Expected an {self.N}x{self.N} matrix")
        if DomainMatrix(A, (self.N, self.N), QQ_I).rank() != self.N:
            raise ValueError("Linear change of coordinates must be invertible")
        assignment = {}
        for i,v in enumerate(self.Z):
            assignment[v] = sum((TruncSeries.variable(self.vars, u)*a for u,a in zip(self.Z, A[i]) if a),
                                TruncSeries.zero(self.vars))
        for i,v in enumerate(self.zeta):
            assignment[v] = sum((TruncSeries.variable(self.vars, u)*conj(a) for u,a in zip(self.zeta, A[i]) if a),
                                TruncSeries.zero(self.vars))
        rho = [substitute(r, assignment, vars=self.vars, caps=() if r.caps else None) for r in self.rho]
        return ManifoldModel(rho, self.n, self.d, self.kappa_trunc, label=self.label)

    def rescale(self, U: Sequence[Sequence]) -> 'ManifoldModel':
        """
        The same manifold with defining functions Uρ for an invertible real
        d x d matrix U.  Only constant matrices are supported; entries that
        depend on (Z, ζ) are refused.
        """

        if len(U) != self.d or any(len(row) != self.d for row in U):
            raise ValueError(f"Expected a {self.d}x{self.d} matrix")
        U = [[_constant_entry(u) for u in row] for row in U]
        if len(U) != self.d or any(len(row) != self.d for row in U):
            raise ValueError(f"Expected a {self.d}x{self.d} matrix")
        if any(u.y for row in U for u in row):
            raise ValueError("Frame changes must be real to preserve reality of ρ")
        if DomainMatrix(U, (self.d, self.d), QQ_I).rank() != self.d:
            raise ValueError("Frame change must be invertible")
        rho = []
        for row in U:
            total = TruncSeries.zero(self.vars)
            for u,r in zip(row, self.rho):
                if u:
                    total = total + r*u
            rho.append(total)
        return ManifoldModel(rho, self.n, self.d, self.kappa_trunc, label=self.label)

    def with_kappa(self, kappa_trunc: int) -> 'ManifoldModel':
        return ManifoldModel(self.rho, self.n, self.d, kappa_trunc, label=self.label,
                             graph=self.graph, validate=False)

    ## Real coordinates
    @property
    def real_dimension(self) -> int:
        return 2*self.n + self.d

    def point_from_real(self, x: Sequence) -> List:
        """
        The point of M with real coordinates x = (Re z, Im z, Re w), exact for
        rational x.  Only available for models given in graph form.
        """

        if not self.graph:
            raise ModelError("real coordinates are only available for models given as 'im w = ...'")
        if len(x) != self.real_dimension:
            raise ValueError(f"Expected {self.real_dimension} real coordinates, got {len(x)}")
        x = [gauss(v) for v in x]
        if any(v.y for v in x):
            raise ValueError("Real coordinates must be real")
        n, d = self.n, self.d
        z = [QQ_I(x[i].x, x[n+i].x) for i in range(n)]
        s = x[2*n:]
        two_i = QQ_I(0, 2)
        point = z + s + [conj(v) for v in z] + s
        w = []
        for j in range(d):
            wj = TruncSeries.variable(self.vars, self.w[j])
            tj = TruncSeries.variable(self.vars, self.tau[j])
            phi = (wj - tj)*(QQ_I.one/two_i) - self.rho[j]
            w.append(s[j] + QQ_I(0, 1)*evaluate(phi, point))
        return z + w


def parse_model(text: str, kappa_trunc: int=DEFAULT_KAPPA) -> ManifoldModel:
    """
    Parse and validate a model file.
    """

    spec = read_model(text)
    exprs = complexify(spec)
    model_vars = tuple(f"z{i+1}" for i in range(spec.n)) + tuple(f"w{j+1}" for j in range(spec.codim)) \
               + tuple(f"chi{i+1}" for i in range(spec.n)) + tuple(f"tau{j+1}" for j in range(spec.codim))
    rho = []
    for decl,expr in zip(sorted(spec.declarations, key=lambda d: d.index), exprs):
        try:
            rho.append(TruncSeries.from_expr(model_vars, expr))
        except Exception as e:
            raise ModelError(f"defining function is not a polynomial: {e}", decl.line, decl.column)
    graph = all(d.kind == 'imw' for d in spec.declarations)
    model = ManifoldModel(rho, spec.n, spec.codim, kappa_trunc, label=spec.label, graph=graph)
    logger.info("parsed model '%s': N=%i, n=%i, d=%i", model.label, model.N, model.n, model.d)
    return model


def load_model(path: str, kappa_trunc: int=DEFAULT_KAPPA) -> ManifoldModel:
    """
    Read a model file from disk.
    """

    if not os.path.exists(path):
        raise FileNotFoundError(f"Model file '{path}' does not exist")
    with open(path, 'r', encoding='utf-8') as fh:
        return parse_model(fh.read(), kappa_trunc=kappa_trunc)


## Vector fields

def apply_field(field: Sequence[TruncSeries], f: TruncSeries, vars: Sequence[str]) -> TruncSeries:
    """
    X f = Σ_k X_k ∂f/∂v_k for a vector field X given by its coefficients on
    the coordinate derivations of `vars`.
    """

    total = TruncSeries.zero(f.vars)
    for c,v in zip(field, vars):
        total = total + c*differentiate(f, v)
    return total


def bracket(X: Sequence[TruncSeries], Y: Sequence[TruncSeries], vars: Sequence[str]) -> List[TruncSeries]:
    """
    Lie bracket [X, Y] of two vector fields.
    """

    return [apply_field(X, b, vars) - apply_field(Y, a, vars) for a,b in zip(X, Y)]


@dataclass
class CRFieldBasis:
    """
    Tangential (1,0) fields L_j = ∂/∂Z_{free_j} + Σ_i b_ji ∂/∂Z_{solved_i},
    stored by their coefficients on ∂/∂Z_1..∂/∂Z_N.  The (0,1) fields are
    their images under the reality involution and act on the ζ variables.
    """

    model: ManifoldModel
    fields: List[List[TruncSeries]]
    free: Tuple[int, ...]
    solved: Tuple[int, ...]

    @property
    def conj_fields(self) -> List[List[TruncSeries]]:
        return [[self.model.mirror(c) for c in L] for L in self.fields]

    def holomorphic(self) -> List[List[TruncSeries]]:
        """
        L_j as vector fields in all 2N variables.
        """

        zero = TruncSeries.zero(self.model.vars)
        return [list(L) + [zero]*self.model.N for L in self.fields]

    def antiholomorphic(self) -> List[List[TruncSeries]]:
        """
        L̄_j as vector fields in all 2N variables.
        """

        zero = TruncSeries.zero(self.model.vars)
        return [[zero]*self.model.N + list(L) for L in self.conj_fields]

    def residuals(self) -> List[List[TruncSeries]]:
        """
        The series L_j ρ^i, zero up to the truncation order.
        """

        return [[apply_field(L, r, self.model.Z) for r in self.model.rho] for L in self.fields]


def _solved_block(model: ManifoldModel) -> Tuple[int, ...]:
    J0 = [[differentiate(r, v) for v in model.Z] for r in model.rho]
    standard = tuple(range(model.n, model.N))
    candidates = [standard] + [c for c in combinations(range(model.N), model.d) if c != standard]
    for cols in candidates:
        block = constant_matrix([[row[c] for c in cols] for row in J0])
        if block.rank() == model.d:
            return cols
    raise ModelError("∂ρ/∂Z(0) has no invertible d x d block: M is not generic")


def tangential_fields(model: ManifoldModel) -> CRFieldBasis:
    """
    Solve L_j ρ = 0 exactly for fields normalized on the free coordinates.
    """

    solved = _solved_block(model)
    free = tuple(i for i in range(model.N) if i not in solved)
    if solved != tuple(range(model.n, model.N)):
        logger.info("w-block singular, solving for coordinates %s", [model.Z[i] for i in solved])

    grad = [[differentiate(r, v) for v in model.Z] for r in model.rho]
    block = [[row[c] for c in solved] for row in grad]
    if not all(e.exact and e.degree() == 0 for row in block for e in row):
        block = [[e if not e.exact else truncate(e, model.kappa_trunc) for e in row] for row in block]
    inv = inverse_matrix(block)

    fields = []
    for f in free:
        rhs = [-row[f] for row in grad]
        b = mat_vec(inv, rhs)
        coeffs = [TruncSeries.zero(model.vars) for _ in range(model.N)]
        coeffs[f] = TruncSeries.constant(model.vars, 1)
        for i,c in zip(solved, b):
            coeffs[i] = c
        fields.append(coeffs)
    return CRFieldBasis(model, fields, free, solved)


def solved_form(model: ManifoldModel, order: Optional[int]=None) -> List[TruncSeries]:
    """
    Q(z, χ, τ) with ρ(z, Q, χ, τ) = 0, series in (z, χ, τ).
    """

    if _solved_block(model) != tuple(range(model.n, model.N)):
        raise ModelError("∂ρ/∂w(0) is singular; the solved form needs w as dependent coordinates")
    if order is None:
        order = model.kappa_trunc if model.exact else None
    Q = solve_implicit(model.rho, model.w, order=order)
    if model.exact:
        # Polynomial solutions are returned as exact series
        candidate = [TruncSeries(q.vars, q.poly, exact=True) for q in Q]
        rest = model.z + model.chi + model.tau
        if all(substitute(r, dict(zip(model.w, candidate)), vars=rest).is_zero() for r in model.rho):
            return candidate
    return Q


def is_normal(model: ManifoldModel, Q: Optional[List[TruncSeries]]=None) -> bool:
    """
    True iff Q(z, 0, τ) = τ and Q(0, χ, τ) = τ up to the truncation order.
    """

    if Q is None:
        Q = solved_form(model)
    ztau, chitau = model.z + model.tau, model.chi + model.tau
    for j in range(model.d):
        first = substitute(Q[j], {c: 0 for c in model.chi}, vars=ztau) - TruncSeries.variable(ztau, model.tau[j])
        second = substitute(Q[j], {c: 0 for c in model.z}, vars=chitau) - TruncSeries.variable(chitau, model.tau[j])
        if not (first.is_zero() and second.is_zero()):
            return False
    return True


def _graph_correction(model: ManifoldModel) -> Optional[List[TruncSeries]]:
    # Holomorphic γ with γ(R^d) = M ∩ {z = 0}, written γ(s) = s + i u(s) with u real
    d = model.d
    u = tuple(f"u{j+1}" for j in range(d))
    vars = model.w + u
    zero = {v: 0 for v in model.z + model.chi}
    assignment = dict(zero)
    for j in range(d):
        wj, uj = TruncSeries.variable(vars, model.w[j]), TruncSeries.variable(vars, u[j])
        assignment[model.w[j]] = wj + uj*QQ_I(0, 1)
        assignment[model.tau[j]] = wj - uj*QQ_I(0, 1)
    F = [substitute(r, assignment, vars=vars) for r in model.rho]
    order = model.kappa_trunc if model.exact else None
    sol = solve_implicit(F, u, order=order)
    if all(s.is_zero() for s in sol):
        return None
    if any(c.y for s in sol for c in s.coeffs.values()):
        raise ModelError("M ∩ {z = 0} does not admit a real parametrization; ρ is not real")
    return [TruncSeries.variable(model.w, model.w[j]) + sol[j]*QQ_I(0, 1) for j in range(d)]


def normal_coordinates(model: ManifoldModel) -> Tuple[List[TruncSeries], ManifoldModel]:
    """
    Holomorphic coordinates (z, w') in which the solved form satisfies
    Q(z, 0, τ) = Q(0, χ, τ) = τ up to the truncation order.

    Returns the new coordinates as series in the old ones and the model in
    the new coordinates.  Two steps: first a change of w alone makes
    M ∩ {z = 0} the real plane, then w' = T(z, w) with Q(z, 0, T) = w.
    """

    kappa = model.kappa_trunc
    full = model.vars
    current = model

    gamma = _graph_correction(model)
    if gamma is not None:
        gbar = [rename(conjugate(g), dict(zip(model.w, model.tau))) for g in gamma]
        assignment = {}
        for j in range(model.d):
            assignment[model.w[j]] = embed(gamma[j], full)
            assignment[model.tau[j]] = embed(gbar[j], full)
        rho = [substitute(r, assignment, vars=full, caps=() if r.caps else None) for r in model.rho]
        current = ManifoldModel(rho, model.n, model.d, kappa, label=model.label, validate=False)
        logger.info("normal_coordinates: straightened M ∩ {z = 0}")

    Q = solved_form(current)
    ztau = model.z + model.tau
    G = [substitute(q, {c: 0 for c in model.chi}, vars=ztau) for q in Q]

    S = [rename(g, dict(zip(model.tau, model.w))) for g in G]
    Sbar = [rename(conjugate(g), dict(zip(model.z, model.chi))) for g in G]
    assignment = {}
    for j in range(model.d):
        assignment[model.w[j]] = embed(S[j], full)
        assignment[model.tau[j]] = embed(Sbar[j], full)
    rho = [substitute(r, assignment, vars=full, caps=() if r.caps else None) for r in current.rho]
    normal = ManifoldModel(rho, model.n, model.d, kappa, label=model.label, validate=False)
    normal.validate()

    # Old coordinates in terms of the new ones: w = γ(S(z, w')); invert for w'(z, w)
    old_w = S if gamma is None else [substitute(g, dict(zip(model.w, S)), vars=model.Z) for g in gamma]
    wp = tuple(f"_{v}" for v in model.w)
    ext = model.Z + wp
    eqs = []
    for j in range(model.d):
        image = rename(embed(old_w[j], model.z + model.w), dict(zip(model.w, wp)))
        eqs.append(embed(image, ext) - TruncSeries.variable(ext, model.w[j]))
    new_w = solve_implicit(eqs, wp, order=kappa)
    change = [TruncSeries.variable(model.Z, v) for v in model.z] + new_w

    if not is_normal(normal):
        raise BudgetError(f"truncation order {kappa} is too low to certify normal coordinates")
    return change, normal


def invert_change(change: Sequence[TruncSeries], Z: Sequence[str], order: Optional[int]=None) -> List[TruncSeries]:
    """
    The inverse of a coordinate change Z ↦ change(Z) fixing the origin, as
    series in the same variable names.  `order` bounds the precision of the
    inverse of an exact change.
    """

    Z = tuple(Z)
    Y = tuple(f"_{v}" for v in Z)
    ext = Y + Z
    eqs = []
    for c,v in zip(change, Z):
        image = embed(rename(embed(c, Z), dict(zip(Z, Y))), ext)
        eqs.append(image - TruncSeries.variable(ext, v))
    orders = [e.order for e in eqs if not e.exact]
    if orders:
        eqs = [truncate(e, min(orders)) for e in eqs]
        return solve_implicit(eqs, Y, order=order)
    if order is None:
        order = max(c.order for c in change)
    return solve_implicit(eqs, Y, order=order)


## Approximate straightening

@dataclass
class StraighteningResult:
    """
    Output of straighten_approx.  `change` lists the old coordinates as
    series in the new ones, (z, χ(z̃, w̃)); `fields` are the transformed
    fields, equal to ∂/∂z̃_i + o(|Z̃|^residual_order).
    """

    fields: List[List[TruncSeries]]
    chi: List[TruncSeries]
    change: List[TruncSeries]
    residual_order: int
    residual_zero: bool
    vars: Tuple[str, ...] = field(default_factory=tuple)


def _shifted(series: TruncSeries, alpha: Sequence[int], z: Sequence[str], vars: Sequence[str]) -> TruncSeries:
    # z^α times a series in the remaining variables; precision grows by |α|
    full = embed(series, vars)
    shift = [0]*len(vars)
    for name,a in zip(z, alpha):
        shift[vars.index(name)] = a
    poly = full.ring.from_dict({tuple(m + s for m,s in zip(mono, shift)): c for mono,c in full.poly.items()})
    if series.exact:
        return TruncSeries(vars, poly, exact=True)
    return TruncSeries(vars, poly, order=series.order + sum(alpha))


def _for_inversion(M: Sequence[Sequence[TruncSeries]], order: int) -> List[List[TruncSeries]]:
    # Exact non-constant entries have infinite inverses; cut them first
    if all(e.exact and e.degree() == 0 for row in M for e in row):
        return [list(row) for row in M]
    return [[truncate(e, order) if e.exact else e for e in row] for row in M]


def straighten_approx(fields: Sequence[Sequence[TruncSeries]], k: int,
                      vars: Optional[Sequence[str]]=None, order: Optional[int]=None) -> StraighteningResult:
    """
    Approximately straighten q holomorphic vector fields in C^m whose first q
    coordinates are transversal to the frame: build χ with
    ∂_z^α χ(0, w) = (L^α w)(0, w) for |α| ≤ k + 2 and return the fields in
    the coordinates Z̃ with Z = (z̃, χ(z̃, w̃)).

    The frame must be involutive up to o(|Z|^k).  `order` (default k + 3)
    is the precision used when exact polynomial fields have to be inverted.
    """

    fields = [list(f) for f in fields]
    q = len(fields)
    if q == 0:
        raise ValueError("Need at least one vector field")
    if vars is None:
        vars = fields[0][0].vars
    vars = tuple(vars)
    m = len(vars)
    if m <= q:
        raise ValueError(f"{q} fields in {m} variables leave nothing to straighten")
    if any(len(f) != m for f in fields):
        raise ValueError(f"Every field needs {m} coefficients")
    if order is None:
        order = k + 3
    z, w = vars[:q], vars[q:]

    if constant_matrix(fields).rank() != q:
        raise StageError("vector fields are linearly dependent at the origin", stage='straighten')
    A = [f[:q] for f in fields]
    if constant_matrix(A).rank() != q:
        raise StageError(f"fields are not transversal to {{{', '.join(z)} = const}}; reorder coordinates",
                         stage='straighten')

    # Normalized frame L_i = ∂/∂z_i + Σ a_ij ∂/∂w_j
    Ainv = inverse_matrix(_for_inversion(A, order))
    frame = []
    for i in range(q):
        combo = []
        for c in range(m):
            combo.append(sum((Ainv[i][j]*fields[j][c] for j in range(q)), TruncSeries.zero(vars)))
        frame.append(combo)

    for i,j in combinations(range(q), 2):
        for c,coeff in enumerate(bracket(frame[i], frame[j], vars)[q:]):
            if not coeff.exact and coeff.order < k:
                raise BudgetError(f"fields of order {coeff.order} cannot certify the commutator condition at order {k}")
            low = coeff.valuation()
            if low is not None and low <= k:
                raise StageError(f"[L{i+1}, L{j+1}] has a term of degree {low} in ∂/∂{w[c]}; "
                                 f"the frame is not involutive to order {k}", stage='straighten')

    ## χ^i = Σ_{|α| ≤ k+2} z^α/α! (L^α w^i)(0, w)
    chi = []
    for wi in w:
        derived = {(0,)*q: TruncSeries.variable(vars, wi)}
        for alpha in multi_indices(q, k + 2):
            if alpha in derived:
                continue
            j = next(i for i,a in enumerate(alpha) if a)
            prev = tuple(a - (1 if i == j else 0) for i,a in enumerate(alpha))
            derived[alpha] = apply_field(frame[j], derived[prev], vars)
        total = TruncSeries.zero(vars)
        for alpha,D in derived.items():
            restricted = substitute(D, {v: 0 for v in z}, vars=w)
            if restricted.is_zero() and restricted.exact:
                continue
            factorial = 1
            for a in alpha:
                for t in range(2, a + 1):
                    factorial *= t
            total = total + _shifted(restricted, alpha, z, vars)/factorial
        chi.append(total)

    ## Residual R_i = L_i(Ψ) - ∂Ψ/∂z̃_i, w-components only
    subs = dict(zip(w, chi))
    residuals = []
    for i in range(q):
        R = []
        for c,wc in enumerate(w):
            coeff = frame[i][q + c]
            moved = substitute(coeff, subs, vars=vars, caps=() if coeff.caps else None)
            R.append(moved - differentiate(chi[c], z[i]))
        residuals.append(R)

    chi_w = [[differentiate(c, v) for v in w] for c in chi]
    chi_w_inv = inverse_matrix(_for_inversion(chi_w, order))
    one, zero = TruncSeries.constant(vars, 1), TruncSeries.zero(vars)
    new_fields = []
    for i in range(q):
        head = [one if j == i else zero for j in range(q)]
        new_fields.append(head + mat_vec(chi_w_inv, residuals[i]))

    flat = [r for R in residuals for r in R]
    lows = [r.valuation() for r in flat if not r.is_zero()]
    if lows:
        residual_order, residual_zero = min(lows) - 1, False
    else:
        orders = [r.order for r in flat if not r.exact]
        residual_order, residual_zero = (min(orders) if orders else order), True
    logger.info("straighten_approx: residual o(|Z|^%i)%s", residual_order,
                " (zero to truncation order)" if residual_zero else '')

    change = [TruncSeries.variable(vars, v) for v in z] + chi
    return StraighteningResult(new_fields, chi, change, residual_order, residual_zero, vars)
