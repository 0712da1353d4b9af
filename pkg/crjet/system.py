"""
The complete system j^{r+1}F = Φ(x, j^r F) along M and the reconstruction of
maps from one jet by integrating

  ∂Λ^α/∂x_j = Σ_k Λ^{α+e_k} ∂X_k/∂x_j

along coordinate paths, X being the graph parametrization of M by
x = (Re z, Im z, Re w).
"""

import logging
from dataclasses import dataclass
from itertools import product
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from sympy.polys.domains import QQ_I

from .errors import ModelError, BudgetError, StageError, OutOfBoxError
from .series import TruncSeries, gauss, to_complex, substitute, differentiate, truncate, multi_indices
from .manifold import ManifoldModel, normal_coordinates, invert_change
from .jets import MapJet, jet_indices
from .reflection import Parametrization, prepare_chain, singular_parametrization, extract_psi
from .report import series_json

__all__ = ['CompleteSystem', 'complete_system', 'RealEmbedding', 'SampledValue', 'reconstruct_map',
           'grid_points', 'DEFAULT_X_RADIUS', 'DEFAULT_JET_RADIUS']


logger = logging.getLogger(__name__)


#: Default radius (max-norm) of the x-box around the base point
DEFAULT_X_RADIUS = 0.1

#: Default radius (max-norm) of the jet box around the anchor jet coordinates
DEFAULT_JET_RADIUS = 4.0

#: Denominator bound used when float coordinates have to be made exact
MAX_DENOMINATOR = 10**6


def _model_key(model: ManifoldModel) -> Tuple:
    return (model.exact,) + tuple(str(r.as_expr()) for r in model.rho)


## Numerical evaluation of exact polynomials

def _compile(series: TruncSeries) -> Tuple[np.ndarray, np.ndarray]:
    terms = series.terms()
    exps = np.array([m for m,_ in terms], dtype=int).reshape(len(terms), len(series.vars))
    coeffs = np.array([to_complex(c) for _,c in terms], dtype=complex)
    return exps, coeffs


def _value(compiled: Tuple[np.ndarray, np.ndarray], point: np.ndarray) -> complex:
    exps, coeffs = compiled
    if not len(coeffs):
        return 0j
    return complex(coeffs @ np.prod(point[None,:]**exps, axis=1))


class RealEmbedding(object):
    """
    X(x) = (x_z + i x_y, x_s + i φ(z, z̄, x_s)) for a model in graph form
    Im w = φ, with its Jacobian ∂X/∂x.
    """

    def __init__(self, model: ManifoldModel):
        if not model.graph:
            raise ModelError("reconstruction needs a model given as 'im w = ...'")
        self.model = model
        n, d = model.n, model.d
        half_i = QQ_I.one/QQ_I(0, 2)
        self._phi, self._dphi = [], []
        for j in range(d):
            wj = TruncSeries.variable(model.vars, model.w[j])
            tj = TruncSeries.variable(model.vars, model.tau[j])
            phi = (wj - tj)*half_i - model.rho[j]
            self._phi.append(_compile(phi))
            derivs = []
            for i in range(n):
                derivs.append(differentiate(phi, model.z[i]) + differentiate(phi, model.chi[i]))
            for i in range(n):
                derivs.append((differentiate(phi, model.z[i]) - differentiate(phi, model.chi[i]))*QQ_I(0, 1))
            for k in range(d):
                derivs.append(differentiate(phi, model.w[k]) + differentiate(phi, model.tau[k]))
            self._dphi.append([_compile(D) for D in derivs])

    @property
    def dimension(self) -> int:
        return self.model.real_dimension

    def _arguments(self, x: np.ndarray) -> np.ndarray:
        n = self.model.n
        z = x[:n] + 1j*x[n:2*n]
        s = x[2*n:].astype(complex)
        return np.concatenate([z, s, np.conj(z), s])

    def __call__(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.model.n
        args = self._arguments(x)
        w = [x[2*n+j] + 1j*_value(phi, args) for j,phi in enumerate(self._phi)]
        return np.concatenate([x[:n] + 1j*x[n:2*n], np.array(w, dtype=complex)])

    def jacobian(self, x: Sequence[float]) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n, d = self.model.n, self.model.d
        args = self._arguments(x)
        out = np.zeros((self.model.N, self.dimension), dtype=complex)
        for i in range(n):
            out[i,i] = 1
            out[i,n+i] = 1j
        for j in range(d):
            out[n+j,2*n+j] = 1
            out[n+j] += 1j*np.array([_value(D, args) for D in self._dphi[j]])
        return out


## The complete system

class CompleteSystem(object):
    """
    Φ(x, j^r F) = j^{r+1} F for jets of maps sending M into M', evaluated
    exactly at rational points x of M: the model is moved to X(x) and put in
    normal coordinates, the jet parametrization of that model is evaluated
    at the transported jet and the result is transported back.  Singular
    chains are cached per normalized model and expansions per (x, jet).
    """

    def __init__(self, par: Parametrization, x_radius: float=DEFAULT_X_RADIUS,
                 jet_radius: float=DEFAULT_JET_RADIUS, seed: Optional[int]=0):
        if par.guaranteed_order < par.r + 1:
            raise BudgetError(f"the complete system needs guaranteed order ≥ r + 1 = {par.r + 1}, "
                              f"got {par.guaranteed_order}; increase k", stage='reflection')
        self.par = par
        self.x_radius = float(x_radius)
        self.jet_radius = float(jet_radius)
        self.seed = seed
        self._chains = {_model_key(par.source): (par.chain, par.rows)}
        self._expansions = {}
        self.remember([0]*par.source.real_dimension, par.anchor, par.psi_k)

    def __repr__(self):
        return f"CompleteSystem(r={self.r}, source='{self.source.label}', target='{self.target.label}')"

    @property
    def source(self) -> ManifoldModel:
        return self.par.source

    @property
    def target(self) -> ManifoldModel:
        return self.par.target

    @property
    def r(self) -> int:
        return self.par.r

    def _chain_for(self, model: ManifoldModel):
        key = _model_key(model)
        if key not in self._chains:
            logger.info("CompleteSystem: preparing the singular chain of a new normalized model")
            chain, _, _, _ = prepare_chain(model, self.par.l, self.par.k, self.par.s, seed=self.seed)
            self._chains[key] = (chain, None)
        return self._chains[key]

    ## Memoized expansions
    def memo_key(self, x: Sequence, jet: MapJet) -> Tuple:
        x = [gauss(v, MAX_DENOMINATOR) for v in x]
        coords = jet.truncated(self.r).coordinates()
        return (tuple((v.x, v.y) for v in x), tuple((v.x, v.y) for v in coords))

    def remember(self, x: Sequence, jet: MapJet, expansion: Sequence[TruncSeries]):
        """
        Store F(X(x) + Z) for the r-jet `jet`, e.g. when it was read from a
        system artifact.
        """

        self._expansions[self.memo_key(x, jet)] = list(expansion)

    def state_jet(self, values: Sequence) -> MapJet:
        """
        The exact r-jet closest to the float jet coordinates `values`.  For a
        target in graph form the value is moved onto M' by keeping
        (Re z', Im z', Re w') and recomputing Im w'.
        """

        target, r = self.target, self.r
        L = len(jet_indices(self.source.N, r))
        exact = [gauss(complex(v), MAX_DENOMINATOR) for v in values]
        if target.graph:
            value = [to_complex(exact[i*L]) for i in range(target.N)]
            n = target.n
            real = [v.real for v in value[:n]] + [v.imag for v in value[:n]] + [v.real for v in value[n:]]
            point = target.point_from_real([gauss(v, MAX_DENOMINATOR) for v in real])
            for i,v in enumerate(point):
                exact[i*L] = v
        return MapJet.from_coordinates(self.source, target, r, exact)

    def expansion(self, x: Sequence, jet: MapJet) -> List[TruncSeries]:
        """
        F(X(x) + Z) to the guaranteed order, from the r-jet of F at X(x).
        """

        source, r = self.source, self.r
        if jet.order < r:
            raise BudgetError(f"Φ needs a jet of order {r}, got {jet.order}")
        key = self.memo_key(x, jet)
        if key in self._expansions:
            return self._expansions[key]

        point = source.point_from_real([gauss(v, MAX_DENOMINATOR) for v in x])
        if not any(point):
            out = self.par.evaluate(jet)
        else:
            moved = source.translate(point)
            change, normal = normal_coordinates(moved)
            inv = invert_change(change, source.Z)
            F = [substitute(f, dict(zip(source.Z, inv)), vars=source.Z) for f in jet.truncated(r).polynomials()]
            jet_n = MapJet.from_polynomials(normal, self.target, [truncate(f, r) for f in F], r)

            chain, rows = self._chain_for(normal)
            iterated = singular_parametrization(normal, self.target, jet_n, chain, self.par.l, rows=rows)
            psi = extract_psi(iterated, normal)
            out = [substitute(p, dict(zip(source.Z, change)), vars=source.Z, caps=() if p.caps else None)
                   for p in psi]
        self._expansions[key] = out
        return out

    def evaluate(self, x: Sequence, jet: MapJet, verify: bool=True) -> MapJet:
        """
        Φ(x, j^r F): the jet of order r + 1 at X(x).  With `verify` the
        r-part of the result has to reproduce the input jet.
        """

        r = self.r
        back = self.expansion(x, jet)
        reached = min(b.order for b in back)
        if reached < r + 1:
            raise BudgetError(f"Φ is only known to order {reached} < {r + 1}", stage='reflection')
        out = MapJet.from_polynomials(jet.source, self.target, back, r + 1)
        if verify and out.truncated(r) != jet.truncated(r):
            raise StageError("Φ does not reproduce the r-jet; the jet is not the jet of a map sending M into M'",
                             stage='reflection')
        return out

    def section(self, x: Sequence, jet: MapJet) -> List:
        """
        The jet coordinates of order exactly r + 1, ordered by (target
        component, graded-lex α).
        """

        out = self.evaluate(x, jet)
        zero = [QQ_I.zero]*self.target.N
        coords = []
        for i in range(self.target.N):
            for alpha in multi_indices(self.source.N, self.r + 1, self.r + 1):
                factorial = 1
                for a in alpha:
                    for t in range(2, a + 1):
                        factorial *= t
                coords.append(out.coefficients.get(alpha, zero)[i]*factorial)
        return coords

    ## Validity box
    def check_box(self, x: Sequence, jet: MapJet, center: Optional[Sequence]=None):
        x = np.asarray([float(v) for v in x])
        center = np.zeros_like(x) if center is None else np.asarray([float(v) for v in center])
        gap = float(np.max(np.abs(x - center))) if len(x) else 0.0
        if gap > self.x_radius:
            raise OutOfBoxError(f"point {x.tolist()} is {gap:.3g} away from {center.tolist()}, "
                                f"beyond the box radius {self.x_radius}")
        ours = np.array([to_complex(v) for v in jet.truncated(self.r).coordinates()])
        anchor = np.array([to_complex(v) for v in self.par.anchor.truncated(self.r).coordinates()])
        distance = float(np.max(np.abs(ours - anchor)))
        if distance > self.jet_radius:
            raise OutOfBoxError(f"jet is {distance:.3g} away from the anchor jet, beyond the box radius "
                                f"{self.jet_radius}")

    def to_json(self) -> dict:
        out = self.par.to_json()
        out.update({'x_radius': self.x_radius, 'jet_radius': self.jet_radius, 'seed': self.seed,
                    'expansion': [series_json(f) for f in self.par.psi_k]})
        return out


def complete_system(par: Parametrization, x_radius: float=DEFAULT_X_RADIUS, jet_radius: float=DEFAULT_JET_RADIUS,
                    seed: Optional[int]=0) -> CompleteSystem:
    return CompleteSystem(par, x_radius=x_radius, jet_radius=jet_radius, seed=seed)


## Reconstruction

@dataclass
class SampledValue:
    x: List[float]
    value: np.ndarray
    jet: np.ndarray
    target_residual: float
    path_gap: Optional[float] = None

    def to_json(self) -> dict:
        residuals = {'target': self.target_residual}
        if self.path_gap is not None:
            residuals['path_gap'] = self.path_gap
        return {'x': [float(v) for v in self.x],
                'value': [[float(v.real), float(v.imag)] for v in self.value],
                'jet_residuals': residuals}


def grid_points(center: Sequence[float], radius: float, per_axis: int) -> List[List[float]]:
    """
    The per_axis^dim corners of a regular grid in the cube of the given
    radius around `center`; a single point per axis means the center.
    """

    center = [float(c) for c in center]
    if per_axis < 1:
        raise ValueError(f"Need at least one grid point per axis, got {per_axis}")
    if per_axis == 1:
        return [center]
    axes = [np.linspace(c - radius, c + radius, per_axis) for c in center]
    return [list(p) for p in product(*axes)]


class _JetFlow(object):
    # Right-hand side of the jet ODE.  The order r+1 block is Φ at the start
    # of the current segment, evaluated at the integrated state.
    def __init__(self, system: CompleteSystem, embedding: RealEmbedding, center: np.ndarray):
        N, r = system.source.N, system.r
        self.system = system
        self.embedding = embedding
        self.center = center
        self.indices = jet_indices(N, r)
        self.top_indices = multi_indices(N, r + 1, r + 1)
        L = len(self.indices)
        position = {alpha: a for a,alpha in enumerate(self.indices)}
        top_position = {beta: L + b for b,beta in enumerate(self.top_indices)}
        self.successor = np.zeros((L, N), dtype=int)
        for a,alpha in enumerate(self.indices):
            for k in range(N):
                beta = tuple(e + (1 if i == k else 0) for i,e in enumerate(alpha))
                self.successor[a,k] = position[beta] if sum(alpha) < r else top_position[beta]
        self.shape = (system.target.N, L)

        self.top, self.base = [], None
        self.restarts = 0
        self._compiled = {}

    def restart(self, x: np.ndarray, y: np.ndarray):
        """
        Take the order r+1 block from the exact expansion of Φ at x for the
        state y.
        """

        system = self.system
        x_exact = [gauss(float(v), MAX_DENOMINATOR) for v in x]
        jet = system.state_jet(y)
        system.check_box([float(v.x) for v in x_exact], jet, center=self.center)
        key = system.memo_key(x_exact, jet)
        if key not in self._compiled:
            expansion = system.expansion(x_exact, jet)
            top = []
            for f in expansion:
                row = []
                for beta in self.top_indices:
                    D = f
                    for v,e in zip(system.source.Z, beta):
                        for _ in range(e):
                            D = differentiate(D, v)
                    row.append(_compile(D))
                top.append(row)
            self._compiled[key] = top
        self.top = self._compiled[key]
        self.base = self.embedding([float(v.x) for v in x_exact])
        self.restarts += 1

    def top_values(self, x: np.ndarray) -> np.ndarray:
        Z = self.embedding(x) - self.base
        return np.array([[_value(D, Z) for D in row] for row in self.top], dtype=complex)

    def __call__(self, t: float, y: np.ndarray, x: np.ndarray, j: int) -> np.ndarray:
        x = x.copy()
        x[j] = t
        dX = self.embedding.jacobian(x)[:,j]
        ext = np.concatenate([y.reshape(self.shape), self.top_values(x)], axis=1)
        return (ext[:,self.successor] @ dX).ravel()


def _integrate(flow: _JetFlow, start: np.ndarray, y0: np.ndarray, end: np.ndarray, order: Sequence[int],
               h: float, tol: float) -> np.ndarray:
    x, y = start.copy(), y0.copy()
    for j in order:
        if x[j] == end[j]:
            continue
        pieces = max(1, int(np.ceil(abs(end[j] - x[j])/h - 1e-9)))
        nodes = np.linspace(x[j], end[j], pieces + 1)
        for a,b in zip(nodes[:-1], nodes[1:]):
            x[j] = a
            flow.restart(x, y)
            sol = solve_ivp(flow, (a, b), y, method='RK45', max_step=h, rtol=tol, atol=tol, args=(x.copy(), j))
            if not sol.success:
                raise StageError(f"integration along x{j+1} failed: {sol.message}", stage='reconstruct')
            y = sol.y[:,-1]
        x[j] = end[j]
    return y


def reconstruct_map(system: CompleteSystem, p: Sequence, jet0: MapJet, grid: Sequence[Sequence[float]],
                    h: float=0.05, tol: float=1e-8, check_paths: bool=True) -> List[SampledValue]:
    """
    Sample the map with r-jet `jet0` at X(p) on the grid points by
    integrating dΛ/dx = Φ(x, Λ) along the coordinate path p → x (x1 first).
    Each coordinate leg is cut into segments of length at most h and the
    order-(r+1) block is recomputed exactly from the integrated jet at the
    start of every segment.  With `check_paths` the reversed coordinate
    order is run too and the largest difference of the values is reported
    as `path_gap`.
    """

    if h <= 0:
        raise ValueError(f"Step size must be positive, got {h}")
    target, r = system.target, system.r
    embedding = RealEmbedding(system.source)
    start = np.array([float(gauss(v, MAX_DENOMINATOR).x) for v in p])
    for x in grid:
        system.check_box(x, jet0, center=start)
    system.check_box(start, jet0)
    if jet0.order < r:
        raise BudgetError(f"reconstruction needs a jet of order {r}, got {jet0.order}")

    flow = _JetFlow(system, embedding, start)
    y0 = np.array([to_complex(v) for v in jet0.truncated(r).coordinates()], dtype=complex)

    rho = [_compile(f) for f in target.rho]
    dim = embedding.dimension
    out = []
    for x in grid:
        end = np.asarray(x, dtype=float)
        y = _integrate(flow, start, y0, end, range(dim), h, tol)
        gap = None
        if check_paths:
            back = _integrate(flow, start, y0, end, range(dim - 1, -1, -1), h, tol)
            gap = float(np.max(np.abs(back.reshape(flow.shape)[:,0] - y.reshape(flow.shape)[:,0])))
        jet = y.reshape(flow.shape)
        value = jet[:,0]
        residual = max(abs(_value(f, np.concatenate([value, np.conj(value)]))) for f in rho)
        out.append(SampledValue(list(end), value, jet, float(residual), gap))
    logger.info("reconstruct_map: %i grid points, %i segments, max target residual %.3g",
                len(out), flow.restarts, max([s.target_residual for s in out], default=0.0))
    return out
