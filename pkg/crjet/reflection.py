"""
Reflection of jets of CR maps along Segre chains.

A holomorphic map H sending M into M' satisfies ρ'(H(Z), H̄(ζ)) = 0 whenever
ρ(Z, ζ) = 0.  Fixing ζ = A + q and letting Z = B + (p, Q(z_B + p, A + q) - w_B)
run over the Segre variety of ζ near the chain point B, the coefficients of
p^α (|α| ≤ l) of this identity determine H̄(A + q) from the jet of H at B as
soon as the target is l-nondegenerate along the jet.  Alternating ρ and ρ̄
along a chain of length 2s carries the r-jet at the base point (r = 2sl) to
the free end of the chain; on the singular chain built from δ and φ the free
end is μ^m Z̃ and the constant term in μ is the jet parametrization Ψᵏ.

The Λ-dependence is handled by evaluation: every map here is an object that
runs the reflection on a concrete jet.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from sympy.polys.domains import QQ_I
from sympy.polys.matrices import DomainMatrix

from .errors import ModelError, BudgetError, StageError
from .series import (TruncSeries, GaussRational, substitute, conjugate, conj, truncate, embed, rename, coefficient,
                     solve_implicit, laurent_c0, unit_root, merge_caps, multi_indices)
from .manifold import ManifoldModel, solved_form, is_normal
from .jets import MapJet, check_cr_jet
from .segre import (SegreChain, VMap, DeltaData, chain_from_heads, segre_chain, build_V, delta_and_eta0,
                    invert_V, block_names)

__all__ = ['ReflectionMap', 'basic_reflection', 'IteratedReflection', 'iterate_reflection', 'SingularChain',
           'normalizing_parameter', 'singular_chain', 'singular_parametrization', 'extract_psi',
           'Parametrization', 'prepare_chain', 'parametrize', 'default_k', 'guaranteed_order']


logger = logging.getLogger(__name__)


Row = Tuple[Tuple[int, ...], int]


def _names(prefix: str, count: int) -> Tuple[str, ...]:
    return tuple(f"{prefix}{i+1}" for i in range(count))


def default_k(r: int, m: int) -> int:
    """
    Smallest k with guaranteed order r + 1.
    """

    return r + (r + 1)*(m + 1)


def guaranteed_order(k: int, r: int, m: int) -> int:
    """
    floor((k - r)/(m + 1)), the order to which Ψᵏ reproduces the map.
    """

    return (k - r)//(m + 1)


## One reflection step

def _lift(x, vars: Tuple[str, ...]) -> TruncSeries:
    if isinstance(x, TruncSeries):
        return x if x.vars == vars else embed(x, vars)
    return TruncSeries.constant(vars, x)


def _u_gradient(row: TruncSeries, u: Sequence[str]) -> List[GaussRational]:
    out = []
    for name in u:
        monom = [0]*len(row.vars)
        monom[row.vars.index(name)] = 1
        out.append(row.poly.get(tuple(monom), QQ_I.zero))
    return out


def _select_rows(candidates: Dict[Row, TruncSeries], u: Sequence[str]) -> List[Row]:
    # Greedy choice of rows whose constant u-gradients are independent
    chosen, gradients, rank = [], [], 0
    for key,row in candidates.items():
        trial = gradients + [_u_gradient(row, u)]
        new_rank = DomainMatrix(trial, (len(trial), len(u)), QQ_I).rank()
        if new_rank > rank:
            chosen.append(key)
            gradients, rank = trial, new_rank
            if rank == len(u):
                break
    return chosen


def _reflect_step(source: ManifoldModel, target: ManifoldModel, J: Sequence[TruncSeries], B: Sequence,
                  A: Sequence, odd: bool, l: int, base: Tuple[str, ...], base_caps, tau_out: int,
                  Q: Sequence[TruncSeries], rows: Optional[List[Row]]=None) -> Tuple[List[TruncSeries], List[Row]]:
    """
    Given J = H(B + q) (series in base + q, known to q-degree tau_out + l),
    return H̄(A + q) known to q-degree tau_out.  For even steps the roles of
    H and H̄ (and of ρ and ρ̄) are exchanged.
    """

    n, N, d = source.n, source.N, source.d
    p, q, u = _names('p', n), _names('q', N), _names('u', target.N)
    vars = tuple(base) + p + q
    caps = merge_caps(base_caps, ((p, l), (q, tau_out), (p + q, tau_out + l)))

    Bv = [_lift(x, vars) for x in B]
    Av = [_lift(x, vars) for x in A]
    P = [TruncSeries.variable(vars, v) for v in p]
    Qv = [TruncSeries.variable(vars, v) for v in q]

    ## Displacement along the Segre variety of A + q
    S = Q if odd else [conjugate(s) for s in Q]
    assignment = {}
    for i in range(n):
        assignment[source.z[i]] = Bv[i] + P[i]
        assignment[source.chi[i]] = Av[i] + Qv[i]
    for j in range(d):
        assignment[source.tau[j]] = Av[n+j] + Qv[n+j]
    w = [substitute(s, assignment, vars=vars, caps=() if s.caps else None) for s in S]
    disp = P + [w[j] - Bv[n+j] for j in range(d)]

    Jsub = [substitute(_lift(c, tuple(base) + q), dict(zip(q, disp)), vars=vars, caps=caps) for c in J]

    ## ρ'(H(Z), H̄(A + q)) with H̄(A + q) = c0 + u
    c0 = [conj(c.constant_term()) for c in J]
    full = vars + u
    assignment = {v: embed(c, full) for v,c in zip(target.Z, Jsub)}
    for v,c,name in zip(target.zeta, c0, u):
        assignment[v] = TruncSeries.variable(full, name) + c
    rho = target.rho if odd else target.conj_rho
    E = [substitute(r, assignment, vars=full, caps=()) for r in rho]

    candidates = {}
    for alpha in multi_indices(n, l):
        for j,e in enumerate(E):
            candidates[(alpha, j)] = coefficient(e, dict(zip(p, alpha)))

    if rows is None:
        rows = _select_rows(candidates, u)
        if len(rows) < target.N:
            raise StageError(f"span deficiency: the derivatives of order ≤ {l} of the reflection identity "
                             f"have rank {len(rows)} < {target.N}; the jet is not {l}-nondegenerate",
                             stage='reflection')
    else:
        gradients = [_u_gradient(candidates[key], u) for key in rows]
        if DomainMatrix(gradients, (len(rows), len(u)), QQ_I).rank() < target.N:
            raise StageError("the stored reflection rows degenerate at this jet", stage='reflection')

    selected = [candidates[key] for key in rows]
    for key,row in zip(rows, selected):
        if row.constant_term():
            raise StageError(f"row {key} of the reflection identity has constant term {row.constant_term()}; "
                             "the jet does not send M into M'", stage='reflection')
    order = min(row.order for row in selected)
    selected = [truncate(row, order) for row in selected]
    solution = solve_implicit(selected, u)
    logger.debug("_reflect_step: %s step, q-degree %i, order %i", 'odd' if odd else 'even', tau_out, order)
    return [s + c for s,c in zip(solution, c0)], rows


## Iteration along a chain

@dataclass
class IteratedReflection:
    """
    H at the free end ξ⁰ of a chain, as series in the chain parameters, with
    the reflection rows chosen at every step.
    """

    chain: SegreChain
    values: List[TruncSeries]
    rows: List[List[Row]]
    l: int

    @property
    def order(self) -> int:
        return min(v.order for v in self.values)


def iterate_reflection(source: ManifoldModel, target: ManifoldModel, jet: MapJet, chain: SegreChain, l: int,
                       caps=(), order: Optional[int]=None,
                       rows: Optional[List[List[Row]]]=None) -> IteratedReflection:
    """
    Carry the jet at the base point along the chain ξ^{2s} = 0, ..., ξ⁰.
    The jet needs order ≥ 2sl; every step costs l orders in the chain
    parameters.
    """

    if not target.exact:
        raise ModelError("the target model must be given by polynomials")
    if jet.source.N != source.N or jet.target.N != target.N:
        raise ValueError(f"Jet dimensions ({jet.source.N}, {jet.target.N}) do not match the models "
                         f"({source.N}, {target.N})")
    steps = len(chain.v) - 1
    r = steps*l
    if jet.order < r:
        raise BudgetError(f"a chain of length {steps} with l = {l} needs a jet of order {r}, got {jet.order}")
    if rows is not None and len(rows) != steps:
        raise ValueError(f"Expected rows for {steps} steps, got {len(rows)}")
    if order is None:
        orders = [c.order for point in chain.v for c in point if not c.exact]
        order = min(orders) if orders else source.kappa_trunc

    base = tuple(chain.t)
    q = _names('q', source.N)
    Q = solved_form(chain.model)
    start = base + q
    J = [rename(f, dict(zip(source.Z, q))) for f in jet.polynomials()]
    J = [truncate(embed(f, start), order, merge_caps(caps, ((q, r),))) for f in J]

    used = []
    for i in range(1, steps + 1):
        B, A = chain.v[steps - i + 1], chain.v[steps - i]
        J, chosen = _reflect_step(source, target, J, B, A, i % 2 == 1, l, base, caps, (steps - i)*l, Q,
                                  rows[i-1] if rows is not None else None)
        used.append(chosen)
        logger.info("iterate_reflection: step %i/%i done, order %i", i, steps, min(c.order for c in J))
    values = [coefficient(c, {v: 0 for v in q}) for c in J]
    return IteratedReflection(chain, values, used, l)


## Reflection at the base point

@dataclass
class ReflectionMap:
    """
    The basic reflection at the base point: `psi` is H̄(ζ) for the anchor,
    known to degree `tau`, and `rows` the derivatives of the reflection
    identity that determine it.  reflect() runs the same computation on
    other jets.
    """

    source: ManifoldModel
    target: ManifoldModel
    anchor: MapJet
    tau: int
    l: int
    rows: List[Row]
    psi: List[TruncSeries]

    def reflect(self, jet: MapJet, B: Optional[Sequence]=None, A: Optional[Sequence]=None,
                base: Optional[Sequence[str]]=None, caps=(), order: Optional[int]=None) -> List[TruncSeries]:
        """
        H̄(A + ζ) from the jet of H at B, B and A being linked by ρ(B, A) = 0
        (series in `base` or constants).  The result lives in base + ζ.
        Without base variables the default order is τ + l, else 2(τ + l).
        """

        source = self.source
        if jet.order < self.tau + self.l:
            raise BudgetError(f"reflection to degree {self.tau} needs a jet of order {self.tau + self.l}")
        base = tuple(base) if base is not None else ()
        B = list(B) if B is not None else [0]*source.N
        A = list(A) if A is not None else [0]*source.N
        if order is None:
            order = (self.tau + self.l)*(2 if base else 1)
        q = _names('q', source.N)
        start = base + q
        J = [rename(f, dict(zip(source.Z, q))) for f in jet.polynomials()]
        J = [truncate(embed(f, start), order, merge_caps(caps, ((q, self.tau + self.l),))) for f in J]
        out, _ = _reflect_step(source, self.target, J, B, A, True, self.l, base, caps, self.tau,
                               solved_form(source), self.rows)
        return [rename(c, dict(zip(q, source.zeta))) for c in out]


def basic_reflection(source: ManifoldModel, target: ManifoldModel, anchor: MapJet, tau: int, l: int) -> ReflectionMap:
    """
    Solve the reflection identity at the base point for the conjugate jet
    of order `tau` and check the fixed-point property: at the anchor
    itself the result is the conjugate of the anchor.
    """

    if tau < 0 or l < 0:
        raise ValueError(f"tau and l must be non-negative, got tau={tau}, l={l}")
    if anchor.order < tau + l:
        raise BudgetError(f"tau + l = {tau + l} exceeds the anchor order {anchor.order}")
    check = check_cr_jet(anchor)
    if check.sends_order < tau + l:
        raise StageError(f"anchor sends M into M' only to order {check.sends_order}", stage='reflection')

    rm = ReflectionMap(source, target, anchor, tau, l, [], [])
    q = _names('q', source.N)
    J = [rename(f, dict(zip(source.Z, q))) for f in anchor.polynomials()]
    J = [truncate(f, tau + l, ((q, tau + l),)) for f in J]
    out, rows = _reflect_step(source, target, J, [0]*source.N, [0]*source.N, True, l, (), (), tau,
                              solved_form(source))
    rm.rows = rows
    rm.psi = [rename(c, dict(zip(q, source.zeta))) for c in out]

    expected = [embed(f, source.zeta) for f in anchor.conjugate_polynomials()]
    for i,(got,want) in enumerate(zip(rm.psi, expected)):
        if not (got - want).is_zero():
            raise StageError(f"fixed-point check fails in component {i+1}", stage='reflection')
    logger.info("basic_reflection: τ = %i, l = %i, rows %s", tau, l, rows)
    return rm


## The singular chain

@dataclass
class SingularChain(SegreChain):
    """
    The chain of length 2s with ξ⁰ = μ^m Z̃ obtained from η = λ(μ)η₀ and
    ξ = φ(η, Z̃/c), in the parameters (μ, Z̃).  `scale` is c, the leading
    coefficient of δ(λη₀) = cλ^m(1 + ...), and `lam` the reparametrization
    λ(μ) with δ(λ(μ)η₀) = cμ^m.
    """

    m: int
    eta0: List[GaussRational]
    scale: GaussRational
    lam: TruncSeries
    caps: Tuple
    order: int


def normalizing_parameter(delta: TruncSeries, eta: Sequence[str], eta0: Sequence, m: int,
                          order: int) -> Tuple[GaussRational, TruncSeries]:
    """
    c and λ(μ) with δ(λ(μ)η₀) = cμ^m: writing δ(λη₀) = cλ^m u(λ), λ solves
    λ u(λ)^{1/m} = μ.
    """

    line = ('lam',)
    lam = TruncSeries.variable(line, 'lam')
    dhat = substitute(delta, {e: lam*c for e,c in zip(eta, eta0)}, vars=line)
    c = dhat.poly.get((m,), QQ_I.zero)
    if not c or dhat.valuation() != m:
        raise StageError(f"δ(λη₀) does not vanish to order exactly {m}", stage='segre')
    terms = {(e - m,): v/c for (e,),v in dhat.coeffs.items()}
    if dhat.exact:
        unit = TruncSeries(line, terms, exact=True)
        if unit == 1:
            return c, TruncSeries.variable(('mu',), 'mu')
        unit = truncate(unit, order)
    else:
        unit = TruncSeries(line, terms, order=dhat.order - m)
    root = unit_root(unit, m)
    pair = ('lam', 'mu')
    F = embed(root, pair)*TruncSeries.variable(pair, 'lam') - TruncSeries.variable(pair, 'mu')
    return c, solve_implicit([F], ['lam'])[0]


def singular_chain(vmap: VMap, delta_data: DeltaData, phi: Sequence[TruncSeries], Zt: Sequence[str],
                   G: int, k: int, Q: Optional[List[TruncSeries]]=None) -> SingularChain:
    """
    Build the chain points in the parameters (μ, Z̃), truncated to total
    order k with the caps μ ≤ mG and Z̃ ≤ G that suffice for the constant
    term in μ to order G.
    """

    model = vmap.chain.model
    n, s, m = model.n, vmap.s, delta_data.m
    Zt = tuple(Zt)
    base = ('mu',) + Zt
    caps = merge_caps(((('mu',), m*G), (Zt, G)))

    c, lam = normalizing_parameter(delta_data.delta, vmap.eta, delta_data.eta0, m, k)
    lam_b = embed(lam, base)
    assignment = {e: lam_b*e0 for e,e0 in zip(vmap.eta, delta_data.eta0)}
    for z in Zt:
        assignment[z] = TruncSeries.variable(base, z)/c
    phi_b = [substitute(f, assignment, vars=base, caps=caps) for f in phi]

    zero = TruncSeries.zero(base)
    xi = {name: zero for name in vmap.xi}
    for name,value in zip(vmap.xi1, phi_b):
        xi[name] = value
    eta = {name: assignment[name] for name in vmap.eta}

    heads = [[xi[name] for name in block_names('xi', 0, n)]]
    for j in range(1, s + 1):
        heads.append([eta[name] for name in block_names('eta', j, n)])
    for i in range(1, s):
        heads.append([eta[a] + xi[b] for a,b in zip(block_names('eta', s - i, n), block_names('xi', i, n))])
    heads = [[truncate(h, k, caps) for h in head] for head in heads]
    points = chain_from_heads(model, heads, base, Q)

    mu = TruncSeries.variable(base, 'mu')
    for z,value in zip(Zt, points[0]):
        if not (value - mu**m*TruncSeries.variable(base, z)).is_zero():
            raise StageError("the singular chain does not end at μ^m Z̃", stage='segre')
    orders = [x.order for point in points for x in point if not x.exact]
    order = min(orders) if orders else k
    logger.info("singular_chain: m = %i, scale %s, order %i, caps %s", m, c, order, caps)
    return SingularChain(model, 2*s, base, points, m, list(delta_data.eta0), c, lam, caps, order)


def singular_parametrization(source: ManifoldModel, target: ManifoldModel, jet: MapJet, chain: SingularChain,
                             l: int, rows: Optional[List[List[Row]]]=None) -> IteratedReflection:
    """
    H(μ^m Z̃) for the jet, as a series in (μ, Z̃).
    """

    return iterate_reflection(source, target, jet, chain, l, caps=chain.caps, order=chain.order, rows=rows)


def extract_psi(iterated: IteratedReflection, source: ManifoldModel) -> List[TruncSeries]:
    """
    The constant term in μ of H(μ^m (Z/μ^m)), i.e. Ψᵏ as series in Z.
    """

    chain = iterated.chain
    Zt = chain.t[1:]
    out = []
    for v in iterated.values:
        c0 = laurent_c0(v, 'mu', chain.m)
        out.append(rename(c0, dict(zip(Zt, source.Z))))
    return out


## Parametrization

def prepare_chain(model: ManifoldModel, l: int, k: Optional[int]=None, s: Optional[int]=None,
                  seed: Optional[int]=0, hoermander=None) -> Tuple[SingularChain, DeltaData, int, int]:
    """
    Segre chain of length 2s, V, δ, η₀ and φ for a model in normal
    coordinates, assembled into the singular chain.  Returns the chain, the
    δ data, r = 2sl and k.
    """

    if not is_normal(model):
        raise ModelError("the model must be in normal coordinates; use normal_coordinates() first")
    s = model.d + 1 if s is None else s
    r = 2*s*l
    if model.exact and k is not None and model.kappa_trunc < k:
        model = model.with_kappa(k)
    chain = segre_chain(model, 2*s)
    vmap = build_V(chain, seed=seed)
    delta_data = delta_and_eta0(vmap, hoermander=hoermander, seed=seed)
    m = delta_data.m
    if k is None:
        k = default_k(r, m)
        if model.exact and model.kappa_trunc < k:
            return prepare_chain(model.with_kappa(k), l, k, s, seed, hoermander)
    G = guaranteed_order(k, r, m)
    if G < 1:
        raise BudgetError(f"k = {k} gives guaranteed order {G} < 1 (r = {r}, m = {m})", stage='reflection')
    phi, Zt = invert_V(vmap, delta_data.Delta)
    sc = singular_chain(vmap, delta_data, phi, Zt, G, k)
    return sc, delta_data, r, k


@dataclass
class Parametrization:
    """
    Ψᵏ for an anchor jet: `psi_k` holds Ψᵏ(Z, j^r F) for the anchor as series
    in the source coordinates; evaluate() produces it for other jets near
    the anchor, reusing the reflection rows of the anchor.
    """

    source: ManifoldModel
    target: ManifoldModel
    anchor: MapJet
    psi_k: List[TruncSeries]
    guaranteed_order: int
    l: int
    r: int
    k: int
    m: int
    chain: SingularChain
    rows: List[List[Row]]
    delta_data: Optional[DeltaData] = None
    s: int = field(default=0)

    def evaluate(self, jet: MapJet) -> List[TruncSeries]:
        if jet.order < self.r:
            raise BudgetError(f"Ψᵏ needs a jet of order {self.r}, got {jet.order}")
        iterated = singular_parametrization(self.source, self.target, jet.truncated(self.r), self.chain, self.l,
                                            rows=self.rows)
        return extract_psi(iterated, self.source)

    def as_jet(self, order: Optional[int]=None) -> MapJet:
        """
        Ψᵏ at the anchor as a jet of order `order` (default guaranteed_order).
        """

        order = self.guaranteed_order if order is None else order
        return MapJet.from_polynomials(self.source, self.target, self.psi_k, order)

    def to_json(self) -> dict:
        return {'l': self.l,
                'r': self.r,
                'k': self.k,
                'm': self.m,
                's': self.s,
                'guaranteed_order': self.guaranteed_order,
                'eta0': [str(QQ_I.to_sympy(e)) for e in self.chain.eta0],
                'scale': str(QQ_I.to_sympy(self.chain.scale)),
                'psi': self.as_jet().to_json()['coefficients']}


def parametrize(source: ManifoldModel, target: ManifoldModel, anchor: MapJet, l: int, k: Optional[int]=None,
                s: Optional[int]=None, seed: Optional[int]=0, hoermander=None) -> Parametrization:
    """
    Run the whole pipeline for an anchor jet at the base point of a source
    model in normal coordinates.
    """

    s = source.d + 1 if s is None else s
    r = 2*s*l
    if anchor.order < r:
        raise BudgetError(f"the anchor must be a jet of order r = {r}, got {anchor.order}")
    anchor = anchor.truncated(r)
    check = check_cr_jet(anchor)
    if not check.is_cr:
        raise StageError(f"anchor sends M into M' only to order {check.sends_order} < {r}", stage='reflection')

    chain, delta_data, r, k = prepare_chain(source, l, k, s, seed, hoermander)
    iterated = singular_parametrization(source, target, anchor, chain, l)
    psi = extract_psi(iterated, source)

    formula = guaranteed_order(k, r, chain.m)
    reached = min(p.order for p in psi)
    if reached < formula:
        logger.warning("Ψᵏ is only known to order %i < %i; the truncation order limits the result", reached, formula)
    order = min(formula, reached)
    logger.info("parametrize: r = %i, k = %i, m = %i, guaranteed order %i", r, k, chain.m, order)
    return Parametrization(source, target, anchor, psi, order, l, r, k, chain.m, chain, iterated.rows,
                           delta_data, s)
