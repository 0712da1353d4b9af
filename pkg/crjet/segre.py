"""
Iterated complexifications and Segre maps of a model in normal coordinates,
the maps Ṽ and V built from a chain of even length, the determinant δ with
its vanishing order along a direction η₀, and the inversion φ with
V(η, φ(η, Z/δ(η))) = Z.

Chains are points ξ⁰, ..., ξ^s of C^N linked by ρ_j(ξ^{j-1}, ξ^j) = 0 with
ρ_j = ρ̄ for even j and ρ for odd j.  The last point is the origin and t^j
are the first n coordinates of ξ^j; the Segre map is the free end ξ⁰(t).
"""

import logging
from dataclasses import dataclass
from itertools import combinations, product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sympy.polys.domains import QQ_I

from .errors import BudgetError, StageError
from .series import (TruncSeries, GaussRational, substitute, conjugate, differentiate, truncate, embed,
                     rename, solve_implicit, vanishing_order, random_gauss)
from .matrices import det_series, adjugate, jacobian, mat_vec, generic_rank
from .manifold import ManifoldModel, solved_form

__all__ = ['SegreChain', 'chain_from_heads', 'segre_chain', 'palindrome_residual', 'reflection_identity_check', 'segre_ranks',
           'VMap', 'build_V', 'DeltaData', 'delta_and_eta0', 'predicted_m', 'invert_V', 'check_inversion',
           'block_names', 'SWEEP_RANGE', 'RANDOM_DIRECTIONS']


logger = logging.getLogger(__name__)


#: Entries of the deterministic η₀ sweep
SWEEP_RANGE = (-2, -1, 0, 1, 2)

#: Random rational directions tried after an unsuccessful sweep
RANDOM_DIRECTIONS = 20


def block_names(prefix: str, j: int, n: int) -> Tuple[str, ...]:
    return tuple(f"{prefix}{j}_{i+1}" for i in range(n))


@dataclass
class SegreChain:
    """
    The chain (v⁰, ..., v^s) as series in t = (t⁰, ..., t^{s-1}).
    """

    model: ManifoldModel
    s: int
    t: Tuple[str, ...]
    v: List[List[TruncSeries]]

    def t_block(self, j: int) -> Tuple[str, ...]:
        return block_names('t', j, self.model.n)

    @property
    def segre_map(self) -> List[TruncSeries]:
        return self.v[0]

    def link(self, j: int) -> List[TruncSeries]:
        """
        ρ_j(v^{j-1}, v^j), zero up to the truncation order.
        """

        model = self.model
        rho = model.rho if j % 2 else model.conj_rho
        assignment = dict(zip(model.Z, self.v[j-1]))
        assignment.update(zip(model.zeta, self.v[j]))
        return [substitute(r, assignment, vars=self.t, caps=() if r.caps else None) for r in rho]

    def relations_hold(self) -> bool:
        return all(r.is_zero() for j in range(1, self.s + 1) for r in self.link(j))


def chain_from_heads(model: ManifoldModel, heads: Sequence[Sequence[TruncSeries]], vars: Sequence[str],
                     Q: Optional[List[TruncSeries]]=None) -> List[List[TruncSeries]]:
    """
    Points ξ⁰, ..., ξ^s of a chain with prescribed first n coordinates
    heads[j] of ξ^j (series in `vars`) and ξ^s = 0.  The w-part of ξ^j is
    Q(heads[j], ξ^{j+1}) for odd j + 1 and Q̄(heads[j], ξ^{j+1}) otherwise,
    Q being the solved form of ρ.
    """

    if Q is None:
        Q = solved_form(model)
    Qbar = [conjugate(q) for q in Q]
    vars = tuple(vars)
    s = len(heads)
    v = [None]*(s + 1)
    v[s] = [TruncSeries.zero(vars) for _ in range(model.N)]
    for j in range(s - 1, -1, -1):
        Qj = Q if (j + 1) % 2 else Qbar
        head = list(heads[j])
        if len(head) != model.n:
            raise ValueError(f"Chain head {j} has {len(head)} entries, expected {model.n}")
        assignment = dict(zip(model.z, head))
        assignment.update(zip(model.chi, v[j+1][:model.n]))
        assignment.update(zip(model.tau, v[j+1][model.n:]))
        tail = [substitute(q, assignment, vars=vars, caps=() if q.caps else None) for q in Qj]
        v[j] = head + tail
    return v


def segre_chain(model: ManifoldModel, s: int, Q: Optional[List[TruncSeries]]=None) -> SegreChain:
    """
    The chain of length s in the free parameters t = (t⁰, ..., t^{s-1}),
    solved from the fixed end ξ^s = 0 outwards.  The model should be in
    normal coordinates.
    """

    if s < 1:
        raise ValueError(f"Chain length must be at least 1, got {s}")
    t = tuple(name for j in range(s) for name in block_names('t', j, model.n))
    heads = [[TruncSeries.variable(t, name) for name in block_names('t', j, model.n)] for j in range(s)]
    v = chain_from_heads(model, heads, t, Q)
    logger.info("segre_chain: length %i in %i parameters", s, len(t))
    return SegreChain(model, s, t, v)


def palindrome_residual(chain: SegreChain) -> List[TruncSeries]:
    """
    v⁰(0, t¹, ..., t^{s-1}, t^s, t^{s-1}, ..., t¹) for a chain of length 2s.
    """

    if chain.s % 2:
        raise ValueError(f"The palindrome identity needs an even chain, got length {chain.s}")
    half = chain.s//2
    n = chain.model.n
    assignment = {}
    for name in chain.t_block(0):
        assignment[name] = 0
    for i in range(1, half):
        for a,b in zip(chain.t_block(half + i), chain.t_block(half - i)):
            assignment[a] = TruncSeries.variable(chain.t, b)
    return [substitute(c, assignment, vars=chain.t, caps=() if c.caps else None) for c in chain.segre_map]


def reflection_identity_check(chain: SegreChain) -> bool:
    """
    True iff the palindrome identity holds up to the truncation order; the
    first offending coefficient is logged otherwise.
    """

    for k,c in enumerate(palindrome_residual(chain)):
        if not c.is_zero():
            monom,coeff = c.terms()[0]
            logger.warning("palindrome identity fails in component %i: coefficient %s of %s",
                           k + 1, coeff, dict(zip(c.vars, monom)))
            return False
    return True


def segre_ranks(model: ManifoldModel, s_max: int, seed: Optional[int]=0,
                Q: Optional[List[TruncSeries]]=None) -> List[int]:
    """
    Generic ranks of the Segre maps of lengths 1..s_max.
    """

    if Q is None:
        Q = solved_form(model)
    ranks = []
    for s in range(1, s_max + 1):
        chain = segre_chain(model, s, Q)
        ranks.append(generic_rank(jacobian(chain.segre_map, chain.t), seed=seed))
    return ranks


## The maps Ṽ and V

@dataclass
class VMap:
    """
    Ṽ(η, ξ) = v⁰(ξ⁰, η¹, ..., η^s, η^{s-1} + ξ¹, ..., η¹ + ξ^{s-1}) and its
    restriction V(η, ξ¹) to the N selected ξ-components.
    """

    s: int
    eta: Tuple[str, ...]
    xi: Tuple[str, ...]
    tilde_V: List[TruncSeries]
    V: List[TruncSeries]
    xi1_selection: Tuple[int, ...]
    chain: SegreChain

    @property
    def xi1(self) -> Tuple[str, ...]:
        return tuple(self.xi[i] for i in self.xi1_selection)

    @property
    def vars(self) -> Tuple[str, ...]:
        return self.eta + self.xi1

    def linear_part(self) -> List[List[TruncSeries]]:
        """
        ∂V/∂ξ¹(η, 0) as series in η.
        """

        at_zero = {x: 0 for x in self.xi1}
        return [[substitute(differentiate(c, x), at_zero, vars=self.eta) for x in self.xi1] for c in self.V]


def build_V(chain: SegreChain, seed: Optional[int]=0) -> VMap:
    """
    Form Ṽ from a chain of length 2s and select ξ¹: the lexicographically
    first N-subset of ξ-components whose minor of ∂Ṽ/∂ξ(η, 0) has the
    smallest vanishing order along a random reference direction.
    """

    if chain.s % 2:
        raise ValueError(f"build_V needs a chain of even length, got {chain.s}")
    s = chain.s//2
    model = chain.model
    n, N = model.n, model.N
    eta = tuple(name for j in range(1, s + 1) for name in block_names('eta', j, n))
    xi = tuple(name for j in range(s) for name in block_names('xi', j, n))
    vars = eta + xi

    def var(name):
        return TruncSeries.variable(vars, name)

    assignment = {}
    for a,b in zip(chain.t_block(0), block_names('xi', 0, n)):
        assignment[a] = var(b)
    for j in range(1, s + 1):
        for a,b in zip(chain.t_block(j), block_names('eta', j, n)):
            assignment[a] = var(b)
    for i in range(1, s):
        for a,b,c in zip(chain.t_block(s + i), block_names('eta', s - i, n), block_names('xi', i, n)):
            assignment[a] = var(b) + var(c)
    tilde_V = [substitute(c, assignment, vars=vars) for c in chain.segre_map]

    at_zero = {x: 0 for x in xi}
    A = [[substitute(differentiate(c, x), at_zero, vars=eta) for x in xi] for c in tilde_V]
    rank = generic_rank(A, seed=seed)
    if rank < N:
        raise BudgetError(f"∂Ṽ/∂ξ(η, 0) has generic rank {rank} < {N}: type/truncation budget too small",
                          stage='segre')

    rng = np.random.default_rng(seed)
    reference = [random_gauss(rng) for _ in eta]
    best, best_order = None, None
    for cols in combinations(range(len(xi)), N):
        minor = det_series([[row[c] for c in cols] for row in A])
        order = vanishing_order(minor, reference)
        if order is None:
            continue
        if best_order is None or order < best_order:
            best, best_order = cols, order
    if best is None:
        raise BudgetError("no N x N minor of ∂Ṽ/∂ξ(η, 0) is visible within the truncation order", stage='segre')
    logger.info("build_V: selected ξ-components %s (minor vanishing order %i)", [xi[c] for c in best], best_order)

    dropped = {xi[c]: 0 for c in range(len(xi)) if c not in best}
    keep = eta + tuple(xi[c] for c in best)
    V = [substitute(c, dropped, vars=keep) if dropped else c for c in tilde_V]
    vmap = VMap(s, eta, xi, tilde_V, V, tuple(best), chain)

    at_zero = {x: 0 for x in vmap.xi1}
    for c in V:
        if not substitute(c, at_zero, vars=eta).is_zero():
            raise StageError("V(η, 0) does not vanish; the chain is not based at the origin", stage='segre')
    return vmap


## δ and η₀

@dataclass
class DeltaData:
    """
    δ(η) = det(∂V/∂ξ¹(η, 0))², its vanishing order m along η₀ and the value
    2(μ_1 + ... + μ_d - d) predicted from the Hörmander numbers.
    """

    delta: TruncSeries
    Delta: TruncSeries
    eta0: List[GaussRational]
    m: int
    m_predicted: Optional[int]
    directions_tried: int = 0

    @property
    def verdict(self) -> str:
        if self.m_predicted is None:
            return 'UNCHECKED'
        return 'PASS' if self.m == self.m_predicted else 'FAIL'


def predicted_m(hoermander) -> Optional[int]:
    if hoermander is None or not hoermander.finite_type:
        return None
    return 2*(sum(hoermander.mu) - len(hoermander.mu))


def delta_and_eta0(vmap: VMap, hoermander=None, seed: Optional[int]=0) -> DeltaData:
    """
    Sweep small integer directions (then random rational ones) for the
    minimal vanishing order of δ.  No direction goes below the lowest degree
    of δ, so the sweep stops once that degree is attained.
    """

    Delta = det_series(vmap.linear_part())
    delta = Delta*Delta
    low = delta.valuation()
    if low is None:
        raise BudgetError("δ vanishes up to the truncation order", stage='segre')
    predicted = predicted_m(hoermander)

    best, best_dir, tried = None, None, 0
    def consider(direction):
        nonlocal best, best_dir, tried
        tried += 1
        order = vanishing_order(delta, direction)
        if order is not None and (best is None or order < best):
            best, best_dir = order, list(direction)
        return best == low

    done = False
    for direction in product(SWEEP_RANGE, repeat=len(vmap.eta)):
        if not any(direction):
            continue
        if consider(direction):
            done = True
            break
    if not done:
        rng = np.random.default_rng(seed)
        for _ in range(RANDOM_DIRECTIONS):
            if consider([random_gauss(rng, bound=10) for _ in vmap.eta]):
                break
    if best is None:
        raise BudgetError("δ vanishes along every sampled direction up to the truncation order", stage='segre')

    eta0 = [QQ_I.convert(int(e)) if isinstance(e, (int, np.integer)) else e for e in best_dir]
    data = DeltaData(delta, Delta, eta0, best, predicted, tried)
    if predicted is not None and best != predicted:
        logger.warning("vanishing order m = %i differs from 2(Σμ - d) = %i", best, predicted)
    logger.info("delta_and_eta0: m = %i along %s after %i directions", best, [str(e) for e in eta0], tried)
    return data


## Inversion

def invert_V(vmap: VMap, Delta: Optional[TruncSeries]=None) -> Tuple[List[TruncSeries], Tuple[str, ...]]:
    """
    φ(η, Z̃) with V(η, φ(η, Z̃)) = δ(η) Z̃.  With A = ∂V/∂ξ(η, 0), Δ = det A and
    V = Aξ + R(η, ξ), put ξ = Δy; multiplying by adj(A)/Δ² gives
    y + adj(A) R̃(η, y) = adj(A) Z̃ with R̃(η, y) = R(η, Δy)/Δ², whose
    Jacobian in y is the identity.  Returns φ = Δy and the Z̃ variable names.
    """

    N = len(vmap.V)
    eta, xi1 = vmap.eta, vmap.xi1
    A = vmap.linear_part()
    if Delta is None:
        Delta = det_series(A)
    adj = adjugate(A)

    y = tuple(f"y{k+1}" for k in range(N))
    Zt = tuple(f"Zt{k+1}" for k in range(N))
    full = eta + y + Zt

    # R̃ = Σ_e Δ^{e-2} R_e with R_e the part of V of degree e ≥ 2 in ξ
    xi_idx = [vmap.vars.index(x) for x in xi1]
    Delta_full = embed(Delta, full)
    powers = {0: TruncSeries.constant(full, 1)}
    Rt = []
    for c in vmap.V:
        parts = {}
        for monom,coeff in c.coeffs.items():
            e = sum(monom[i] for i in xi_idx)
            if e >= 2:
                parts.setdefault(e, {})[monom] = coeff
        total = TruncSeries.zero(full, order=c.order) if not c.exact else TruncSeries.zero(full)
        for e,terms in parts.items():
            part = TruncSeries(vmap.vars, terms, exact=True) if c.exact else TruncSeries(vmap.vars, terms, order=c.order)
            part = embed(rename(part, dict(zip(xi1, y))), full)
            if e - 2 not in powers:
                powers[e - 2] = Delta_full**(e - 2)
            total = total + part*powers[e - 2]
        Rt.append(total)

    adj_full = [[embed(a, full) for a in row] for row in adj]
    lhs = mat_vec(adj_full, Rt)
    rhs = mat_vec(adj_full, [TruncSeries.variable(full, z) for z in Zt])
    F = [TruncSeries.variable(full, y[k]) + lhs[k] - rhs[k] for k in range(N)]
    orders = [f.order for f in F if not f.exact]
    if orders:
        F = [truncate(f, min(orders)) for f in F]
    sol = solve_implicit(F, y, order=None if orders else vmap.chain.model.kappa_trunc)

    params = eta + Zt
    phi = [s*embed(Delta, params) for s in sol]
    logger.info("invert_V: φ known to order %i", min(p.order for p in phi))
    return phi, Zt


def check_inversion(vmap: VMap, phi: Sequence[TruncSeries], Zt: Sequence[str], delta: TruncSeries,
                    samples: int=20, seed: Optional[int]=0) -> bool:
    """
    Verify V(η, φ(η, Z̃)) = δ(η) Z̃ as a series identity and along `samples`
    random rational lines η = λc.
    """

    params = vmap.eta + tuple(Zt)
    composed = [substitute(c, dict(zip(vmap.xi1, phi)), vars=params, caps=() if c.caps else None) for c in vmap.V]
    delta_full = embed(delta, params)
    residual = [c - delta_full*TruncSeries.variable(params, z) for c,z in zip(composed, Zt)]
    if not all(r.is_zero() for r in residual):
        logger.warning("invert_V identity fails as a series identity")
        return False

    rng = np.random.default_rng(seed)
    line = ('lam',) + tuple(Zt)
    lam = TruncSeries.variable(line, 'lam')
    for _ in range(samples):
        c = [random_gauss(rng, bound=100) for _ in vmap.eta]
        assignment = {e: lam*ci for e,ci in zip(vmap.eta, c)}
        for z in Zt:
            assignment[z] = TruncSeries.variable(line, z)
        for r in _composed_line(vmap, phi, Zt, delta, assignment, line):
            if not r.is_zero():
                logger.warning("invert_V identity fails along the line η = λ·%s", [str(ci) for ci in c])
                return False
    return True


def _composed_line(vmap: VMap, phi, Zt, delta, assignment: Dict[str, TruncSeries], line) -> List[TruncSeries]:
    # V(λc, φ(λc, Z̃)) - δ(λc)Z̃ as series in (λ, Z̃)
    phi_line = [substitute(p, assignment, vars=line, caps=() if p.caps else None) for p in phi]
    eta_assign = {e: assignment[e] for e in vmap.eta}
    subs = dict(eta_assign)
    subs.update(zip(vmap.xi1, phi_line))
    out = []
    delta_line = substitute(embed(delta, vmap.eta + tuple(Zt)), assignment, vars=line)
    for c,z in zip(vmap.V, Zt):
        value = substitute(c, subs, vars=line, caps=() if c.caps else None)
        out.append(value - delta_line*TruncSeries.variable(line, z))
    return out
