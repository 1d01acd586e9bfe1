"""Tame semisimple Frobenius-manifold points, canonical coordinates, and the
semisimple R-matrix recursion.

``canonical_data`` eigen-decomposes the Euler multiplication symbolically
over the quadratic tower (no floating point), producing canonical
coordinates u_i, idempotent norms Delta_i with chosen square roots and the
orthonormalizing frame Psi.  ``solve_R`` solves

    [U, R_1] + V_0 = 0,
    n R_n + [U, R_{n+1}] + V_n + V_{n-1} R_1 + ... + V_0 R_n = 0,

uniquely with R_0 = id; the solution is unitary, R(-z)^T R(z) = id, and
satisfies the z-direction ODE  dR/dz + z^{-2} [U, R] + z^{-1} V R = 0,
both of which are re-checked to truncation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .fields import FE, FieldElem
from .poly import MultiPoly
from .series import (
    MatSeries,
    Matrix,
    mat_add,
    mat_from_rows,
    mat_identity,
    mat_inverse,
    mat_mul,
    mat_neg,
    mat_scale,
    mat_transpose,
    mat_vec,
    mat_zero,
)


@dataclass
class FrobeniusPoint:
    """Frobenius algebra data at a point, in a flat basis.

    structure[i][j] is the coefficient vector of phi_i * phi_j; euler is the
    matrix of E* and mu the grading operator, both acting on the flat basis
    (column convention).
    """

    metric: Matrix
    structure: Tuple[Tuple[Tuple[FieldElem, ...], ...], ...]
    euler: Matrix
    mu: Matrix

    def __post_init__(self):
        n = self.dim
        g = self.metric
        for i in range(n):
            for j in range(n):
                if g[i][j] != g[j][i]:
                    raise ValueError("metric not symmetric")
        mat_inverse(g)  # nondegeneracy
        for i in range(n):
            for j in range(n):
                if self.structure[i][j] != self.structure[j][i]:
                    raise ValueError("product not commutative")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    left = self.multiply(self.structure[i][j], self.basis(k))
                    right = self.multiply(self.basis(i), self.structure[j][k])
                    if left != right:
                        raise ValueError("product not associative")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    # g(phi_i * phi_j, phi_k) = g(phi_j, phi_i * phi_k)
                    lhs = self.pair(self.structure[i][j], self.basis(k))
                    rhs = self.pair(self.basis(j), self.structure[i][k])
                    if lhs != rhs:
                        raise ValueError("metric not Frobenius-invariant")
        skew = mat_add(
            mat_mul(mat_transpose(self.mu), g), mat_mul(g, self.mu)
        )
        if skew != mat_zero(n):
            raise ValueError("grading operator is not metric-skew")

    @property
    def dim(self) -> int:
        return len(self.metric)

    def basis(self, i: int) -> Tuple[FieldElem, ...]:
        return tuple(
            FieldElem.one() if j == i else FieldElem.zero() for j in range(self.dim)
        )

    def multiply(self, a: Sequence[FieldElem], b: Sequence[FieldElem]) -> Tuple[FieldElem, ...]:
        n = self.dim
        out = [FieldElem.zero()] * n
        for i in range(n):
            if not a[i]:
                continue
            for j in range(n):
                if not b[j]:
                    continue
                coeff = a[i] * b[j]
                for k in range(n):
                    c = self.structure[i][j][k]
                    if c:
                        out[k] = out[k] + coeff * c
        return tuple(out)

    def pair(self, a: Sequence[FieldElem], b: Sequence[FieldElem]) -> FieldElem:
        return sum(
            (a[i] * self.metric[i][j] * b[j]
             for i in range(self.dim) for j in range(self.dim)
             if a[i] and b[j]),
            FieldElem.zero(),
        )

    def mult_matrix(self, a: Sequence[FieldElem]) -> Matrix:
        """Matrix of multiplication by the vector a (column convention)."""
        cols = [self.multiply(a, self.basis(j)) for j in range(self.dim)]
        return tuple(tuple(cols[j][i] for j in range(self.dim)) for i in range(self.dim))

    @staticmethod
    def from_json(text: str) -> "FrobeniusPoint":
        data = json.loads(text)
        dim = data["dim"]

        def grid(rows):
            return mat_from_rows(
                [[FieldElem.from_json(v) for v in row] for row in rows]
            )

        structure = tuple(
            tuple(
                tuple(FieldElem.from_json(v) for v in data["structure_constants"][i][j])
                for j in range(dim)
            )
            for i in range(dim)
        )
        return FrobeniusPoint(
            metric=grid(data["metric"]),
            structure=structure,
            euler=grid(data["euler_matrix"]),
            mu=grid(data["mu_matrix"]),
        )


@dataclass
class SemisimpleData:
    """Canonical coordinates with normalized frame.

    psi columns are sqrt(Delta_i) times the i-th idempotent; psi is
    orthonormal for the metric, psi^T g psi = id.
    """

    u: Tuple[FieldElem, ...]
    delta: Tuple[FieldElem, ...]
    sqrt_delta: Tuple[FieldElem, ...]
    idempotents: Tuple[Tuple[FieldElem, ...], ...]
    psi: Matrix

    @property
    def dim(self) -> int:
        return len(self.u)

    def psi_inverse(self, metric: Matrix) -> Matrix:
        return mat_mul(mat_transpose(self.psi), metric)


def _char_poly(m: Matrix) -> MultiPoly:
    """det(x I - M) as a univariate MultiPoly over FieldElem."""
    n = len(m)
    x = MultiPoly.var(1, 0)
    grid = [
        [
            (x if i == j else MultiPoly.zero(1)) - MultiPoly.const(1, m[i][j])
            for j in range(n)
        ]
        for i in range(n)
    ]
    return _det_poly(grid)


def _det_poly(grid) -> MultiPoly:
    n = len(grid)
    if n == 1:
        return grid[0][0]
    out = MultiPoly.zero(1)
    sign = 1
    for j in range(n):
        minor = [
            [grid[i][k] for k in range(n) if k != j] for i in range(1, n)
        ]
        term = grid[0][j] * _det_poly(minor)
        out = out + (term if sign > 0 else -term)
        sign = -sign
    return out


def _poly_roots(p: MultiPoly) -> List[FieldElem]:
    """Roots of a monic univariate polynomial inside the quadratic tower.

    Strategy: strip rational roots by the rational root theorem (rational
    coefficients), then solve the remaining quadratic by its discriminant
    square root.  Raises ValueError when roots cannot be expressed in the
    tower.
    """
    coeffs: dict[int, FieldElem] = {e[0]: c for e, c in p.terms.items()}
    deg = max(coeffs) if coeffs else 0
    roots: List[FieldElem] = []
    work = [coeffs.get(k, FieldElem.zero()) for k in range(deg + 1)]

    def poly_eval(cs, x):
        acc = FieldElem.zero()
        for c in reversed(cs):
            acc = acc * x + c
        return acc

    def deflate(cs, root):
        # synthetic division by (x - root); remainder is zero for a root
        d = len(cs) - 1
        q = [FieldElem.zero()] * d
        q[d - 1] = cs[d]
        for k in range(d - 1, 0, -1):
            q[k - 1] = cs[k] + root * q[k]
        return q

    while len(work) - 1 > 2:
        if not all(c.is_rational() for c in work):
            raise ValueError("cubic with irrational coefficients: roots outside tower")
        cand = _rational_root(work)
        if cand is None:
            raise ValueError("no rational root found: roots outside the field tower")
        roots.append(cand)
        work = deflate(work, cand)
    if len(work) - 1 == 2:
        a, b, c = work[2], work[1], work[0]
        disc = b * b - FE(4) * a * c
        s = disc.sqrt()
        inv2a = (FE(2) * a).inverse()
        roots.append((-b + s) * inv2a)
        roots.append((-b - s) * inv2a)
    elif len(work) - 1 == 1:
        roots.append(-work[0] / work[1])
    for r in roots:
        if not poly_eval([coeffs.get(k, FieldElem.zero()) for k in range(deg + 1)], r).is_zero():
            raise ArithmeticError("root verification failed")
    return roots


def _rational_root(coeffs: List[FieldElem]) -> Optional[FieldElem]:
    from math import gcd

    fracs = [c.to_fraction() for c in coeffs]
    denom = 1
    for f in fracs:
        denom = denom * f.denominator // gcd(denom, f.denominator)
    ints = [int(f * denom) for f in fracs]
    lead, const = ints[-1], ints[0]
    if const == 0:
        return FieldElem.zero()

    def divisors(n):
        n = abs(n)
        out = set()
        d = 1
        while d * d <= n:
            if n % d == 0:
                out.add(d)
                out.add(n // d)
            d += 1
        return out

    for p in divisors(const):
        for q in divisors(lead):
            for sign in (1, -1):
                cand = Fraction(sign * p, q)
                acc = Fraction(0)
                for c in reversed(ints):
                    acc = acc * cand + c
                if acc == 0:
                    return FE(cand)
    return None


def canonical_data(
    point: FrobeniusPoint,
    reorder: Sequence[int] | None = None,
    signs: Sequence[int] | None = None,
) -> SemisimpleData:
    """Canonical coordinates of a tame semisimple point.

    Eigenvalues are ordered by their canonical field representation and the
    square roots of Delta_i take the principal branch; ``reorder`` and
    ``signs`` override this gauge (used by the gauge-independence suite).
    Raises on repeated eigenvalues or roots outside the tower.
    """
    n = point.dim
    chi = _char_poly(point.euler)
    u = _poly_roots(chi)
    if len({x.sort_key() for x in u}) != n:
        raise ValueError("repeated Euler eigenvalues: point is not tame semisimple")
    u = sorted(u, key=lambda x: x.sort_key())
    if reorder is not None:
        u = [u[i] for i in reorder]
    idems: List[Tuple[FieldElem, ...]] = []
    for val in u:
        vec = _eigenvector(point.euler, val)
        sq = point.multiply(vec, vec)
        pivot = next(i for i in range(n) if vec[i])
        lam = sq[pivot] / vec[pivot]
        if not lam:
            raise ValueError("eigenvector is nilpotent: not semisimple")
        eps = tuple(x / lam for x in vec)
        if point.multiply(eps, eps) != eps:
            raise ArithmeticError("idempotent normalization failed")
        idems.append(eps)
    deltas = []
    sqrts = []
    for k, eps in enumerate(idems):
        norm = point.pair(eps, eps)
        if norm.is_zero():
            raise ValueError("idempotent with isotropic norm")
        delta = norm.inverse()
        deltas.append(delta)
        s = delta.sqrt()
        if signs is not None and signs[k] < 0:
            s = -s
        sqrts.append(s)
    psi = tuple(
        tuple(sqrts[j] * idems[j][i] for j in range(n)) for i in range(n)
    )
    data = SemisimpleData(
        u=tuple(u),
        delta=tuple(deltas),
        sqrt_delta=tuple(sqrts),
        idempotents=tuple(idems),
        psi=psi,
    )
    if mat_mul(mat_mul(mat_transpose(psi), point.metric), psi) != mat_identity(n):
        raise ArithmeticError("normalized frame is not orthonormal")
    return data


def _eigenvector(m: Matrix, val: FieldElem) -> Tuple[FieldElem, ...]:
    n = len(m)
    a = [
        [m[i][j] - (val if i == j else FieldElem.zero()) for j in range(n)]
        for i in range(n)
    ]
    # gaussian elimination to echelon form
    pivots = []
    row = 0
    for col in range(n):
        piv = next((r for r in range(row, n) if a[r][col]), None)
        if piv is None:
            continue
        a[row], a[piv] = a[piv], a[row]
        inv = a[row][col].inverse()
        a[row] = [x * inv for x in a[row]]
        for r in range(n):
            if r != row and a[r][col]:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[row])]
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots]
    if not free:
        raise ValueError("eigenvalue has no eigenvector (not semisimple)")
    vec = [FieldElem.zero()] * n
    vec[free[0]] = FieldElem.one()
    for r, col in enumerate(pivots):
        vec[col] = -a[r][free[0]]
    return tuple(vec)


def normalized_v(point: FrobeniusPoint, data: SemisimpleData) -> Matrix:
    """V_0 = Psi^{-1} mu Psi in the normalized idempotent frame; antisymmetric."""
    psi_inv = data.psi_inverse(point.metric)
    v0 = mat_mul(psi_inv, mat_mul(point.mu, data.psi))
    if mat_add(v0, mat_transpose(v0)) != mat_zero(point.dim):
        raise ArithmeticError("normalized grading matrix is not antisymmetric")
    return v0


def solve_R(u: Sequence[FieldElem], v: MatSeries, order: int) -> MatSeries:
    """Unique solution of the semisimple recursion with R_0 = id.

    ``u`` lists the pairwise distinct diagonal entries of U; ``v`` must
    satisfy V(-z) + V(z)^T = 0 through the requested order.
    """
    n = len(u)
    for i in range(n):
        for j in range(i + 1, n):
            if u[i] == u[j]:
                raise ZeroDivisionError("coincident canonical coordinates")
    for k in range(min(v.order, order) + 1):
        vk = v.coeff(k)
        sym = mat_add(mat_transpose(vk), mat_neg(vk) if k % 2 else vk)
        if sym != mat_zero(n):
            raise ValueError("V(-z) + V(z)^T != 0 at order %d" % k)
    coeffs: List[Matrix] = [mat_identity(n)]
    for m in range(1, order + 1):
        # off-diagonal part of R_m from equation at order m-1:
        # (m-1) R_{m-1} + [U, R_m] + sum_{j} V_j R_{m-1-j} = 0
        rhs = mat_scale(coeffs[m - 1], FE(m - 1))
        for j in range(0, m):
            rhs = mat_add(rhs, mat_mul(v.coeff(j), coeffs[m - 1 - j]))
        new = [[FieldElem.zero()] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                if i != j:
                    new[i][j] = -rhs[i][j] / (u[i] - u[j])
        # diagonal part from the order-m equation:
        # m R_m + [U, R_{m+1}] + sum_j V_j R_{m-j} = 0, commutator is
        # off-diagonal, so m (R_m)_{ii} = -[sum_j V_j R_{m-j}]_{ii}
        partial = mat_from_rows(new)
        for i in range(n):
            acc = FieldElem.zero()
            for j in range(0, m + 1):
                vj = v.coeff(j)
                rm = partial if j == 0 else coeffs[m - j]
                for t in range(n):
                    if vj[i][t] and rm[t][i]:
                        acc = acc + vj[i][t] * rm[t][i]
            new[i][i] = -acc / FE(m)
        coeffs.append(mat_from_rows(new))
    return MatSeries(coeffs)


def check_unitary(r: MatSeries, order: int | None = None) -> bool:
    """R(-z)^T R(z) = id through the truncation order."""
    from .series import series_mul

    order = r.order if order is None else order
    prod = series_mul(r.negate_z().transpose(), r)
    return prod.truncate(order).is_identity()


def check_r_ode(u: Sequence[FieldElem], v: MatSeries, r: MatSeries) -> bool:
    """Residual of dR/dz + z^{-2} [U, R] + z^{-1} V R, vanishing through
    order r.order - 1 (the top coefficient needs R at one order higher)."""
    n = len(u)
    umat = tuple(
        tuple(u[i] if i == j else FieldElem.zero() for j in range(n)) for i in range(n)
    )

    def bracket(m):
        return mat_add(mat_mul(umat, m), mat_neg(mat_mul(m, umat)))

    if bracket(r.coeff(0)) != mat_zero(n):
        return False
    for m in range(0, r.order):
        acc = mat_scale(r.coeff(m), FE(m))
        acc = mat_add(acc, bracket(r.coeff(m + 1)))
        for j in range(0, m + 1):
            acc = mat_add(acc, mat_mul(v.coeff(j), r.coeff(m - j)))
        if acc != mat_zero(n):
            return False
    return True


def v_series_from_mu(point: FrobeniusPoint, data: SemisimpleData, order: int) -> MatSeries:
    """Constant series V(z) = V_0 for conformal input."""
    v0 = normalized_v(point, data)
    return MatSeries([v0] + [mat_zero(point.dim)] * order)


# ----------------------------------------------------------------- examples


def points_frobenius(us: Sequence[FieldElem]) -> FrobeniusPoint:
    """Quantum cohomology of N+1 points: diagonal everything, mu = 0."""
    n = len(us)
    zero, one = FieldElem.zero(), FieldElem.one()
    metric = mat_identity(n)
    structure = tuple(
        tuple(
            tuple(one if (i == j == k) else zero for k in range(n))
            for j in range(n)
        )
        for i in range(n)
    )
    euler = tuple(
        tuple(us[i] if i == j else zero for j in range(n)) for i in range(n)
    )
    return FrobeniusPoint(metric=metric, structure=structure, euler=euler, mu=mat_zero(n))


def p1_frobenius() -> FrobeniusPoint:
    """Small quantum cohomology of the projective line at q = 1, t = 0.

    Basis {1, p}: p*p = 1, g(1,p) = 1, Euler multiplication by 2p, grading
    mu = diag(-1/2, 1/2).
    """
    zero, one = FieldElem.zero(), FieldElem.one()
    half = FE(Fraction(1, 2))
    metric = mat_from_rows([[zero, one], [one, zero]])
    structure = (
        ((one, zero), (zero, one)),   # 1*1 = 1, 1*p = p
        ((zero, one), (one, zero)),   # p*1 = p, p*p = 1
    )
    euler = mat_from_rows([[zero, FE(2)], [FE(2), zero]])
    mu = mat_from_rows([[-half, zero], [zero, half]])
    return FrobeniusPoint(metric=metric, structure=structure, euler=euler, mu=mu)
