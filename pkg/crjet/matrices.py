"""
Exact linear algebra over truncated power series: determinants, adjugates,
inverses, Jacobians and generic ranks.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from sympy.polys.domains import QQ_I
from sympy.polys.matrices import DomainMatrix

from .series import TruncSeries, merge_caps, differentiate, evaluate, reciprocal, random_gauss

__all__ = ['SeriesMatrix', 'det_series', 'generic_rank', 'adjugate', 'inverse_matrix',
           'jacobian', 'mat_vec', 'constant_matrix', 'rank_at', 'GENERIC_RANK_SAMPLES']


logger = logging.getLogger(__name__)


#: Number of random points used by generic_rank
GENERIC_RANK_SAMPLES = 5


SeriesMatrix = List[List[TruncSeries]]


def _shape(M: Sequence[Sequence[TruncSeries]]):
    rows = len(M)
    cols = len(M[0]) if rows else 0
    for row in M:
        if len(row) != cols:
            raise ValueError("Ragged matrix")
    return rows, cols


def det_series(M: Sequence[Sequence[TruncSeries]]) -> TruncSeries:
    """
    Determinant of a square matrix of series, computed fraction-free (Bareiss)
    over the polynomial ring and truncated to the smallest entry order.
    """

    rows, cols = _shape(M)
    if rows != cols or rows == 0:
        raise ValueError(f"det_series needs a nonempty square matrix, got {rows}x{cols}")
    entries = [e for row in M for e in row]
    vars = entries[0].vars
    for e in entries:
        if e.vars != vars:
            raise ValueError(f"Variable mismatch in matrix: {e.vars} vs. {vars}")

    ring = entries[0].ring
    domain = ring.to_domain()
    dm = DomainMatrix([[e.poly for e in row] for row in M], (rows, cols), domain)
    det = dm.det()

    inexact = [e for e in entries if not e.exact]
    if not inexact:
        return TruncSeries(vars, det, exact=True)
    order = min(e.order for e in inexact)
    caps = merge_caps(*[e.caps for e in inexact])
    return TruncSeries(vars, det, order=order, caps=caps)


def adjugate(M: Sequence[Sequence[TruncSeries]]) -> SeriesMatrix:
    """
    Classical adjoint, adj(M) M = M adj(M) = det(M) I.
    """

    n, cols = _shape(M)
    if n != cols:
        raise ValueError("adjugate needs a square matrix")
    if n == 1:
        return [[TruncSeries.constant(M[0][0].vars, 1)]]
    adj = [[None]*n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[M[r][c] for c in range(n) if c != j] for r in range(n) if r != i]
            cofactor = det_series(minor)
            adj[j][i] = cofactor if (i + j) % 2 == 0 else -cofactor
    return adj


def inverse_matrix(M: Sequence[Sequence[TruncSeries]]) -> SeriesMatrix:
    """
    Inverse of a matrix whose value at the origin is invertible.
    """

    det = det_series(M)
    if not det.constant_term():
        raise ValueError("Matrix is singular at the origin")
    adj = adjugate(M)
    if det.exact and det.degree() == 0:
        scale = QQ_I.one/det.constant_term()
        return [[e*scale for e in row] for row in adj]
    inv = reciprocal(det)
    return [[e*inv for e in row] for row in adj]


def jacobian(F: Sequence[TruncSeries], vars: Sequence[str]) -> SeriesMatrix:
    """
    Matrix of partial derivatives ∂F_i/∂v_j.
    """

    return [[differentiate(f, v) for v in vars] for f in F]


def mat_vec(M: Sequence[Sequence[TruncSeries]], v: Sequence[TruncSeries]) -> List[TruncSeries]:
    """
    Matrix times vector.
    """

    out = []
    for row in M:
        total = None
        for a,b in zip(row, v):
            total = a*b if total is None else total + a*b
        out.append(total)
    return out


def constant_matrix(M: Sequence[Sequence[TruncSeries]]) -> DomainMatrix:
    """
    Value of the matrix at the origin as a DomainMatrix over QQ_I.
    """

    rows, cols = _shape(M)
    return DomainMatrix([[e.constant_term() for e in row] for row in M], (rows, cols), QQ_I)


def rank_at(M: Sequence[Sequence[TruncSeries]], point: Sequence) -> int:
    """
    Exact rank of the stored polynomials evaluated at `point`.
    """

    rows, cols = _shape(M)
    if rows == 0 or cols == 0:
        return 0
    values = [[evaluate(e, point) for e in row] for row in M]
    return DomainMatrix(values, (rows, cols), QQ_I).rank()


def generic_rank(M: Sequence[Sequence[TruncSeries]], seed: Optional[int]=0,
                 samples: int=GENERIC_RANK_SAMPLES) -> int:
    """
    Rank of M at a generic point: the maximum of the exact ranks at `samples`
    random Gaussian rational points (numerators and denominators bounded by
    10^4).  The rank can only drop at special points.
    """

    rows, cols = _shape(M)
    if rows == 0 or cols == 0:
        return 0
    rng = np.random.default_rng(seed)
    nvars = len(M[0][0].vars)
    best = 0
    for _ in range(samples):
        point = [random_gauss(rng) for _ in range(nvars)]
        best = max(best, rank_at(M, point))
        if best == min(rows, cols):
            break
    logger.debug("generic rank %i for a %ix%i matrix", best, rows, cols)
    return best
