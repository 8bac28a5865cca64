"""Matrices over the multivariate polynomial ring.

Determinants (fraction-free Bareiss with a cofactor fallback for sparse
inputs), k-by-k minors, determinantal divisors d_k and reduced minors,
ideal tests J_k, rank, the theoretical Smith form, unimodularity / ZLP
tests, and left kernels over the fraction field.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Callable, Sequence

from . import groebner
from .errors import InternalConsistencyError, RankError, UsageError
from .polyring import LEX, MonomialOrder, Polynomial, VarSet, gcd_list


class PolyMatrix:
    """A rectangular matrix of polynomials over a shared VarSet."""

    __slots__ = ("rows", "cols", "varset", "entries")

    def __init__(self, rows: int, cols: int, entries: Sequence[Polynomial], varset: VarSet | None = None):
        entries = list(entries)
        if rows <= 0 or cols <= 0:
            raise UsageError("matrix dimensions must be positive")
        if len(entries) != rows * cols:
            raise UsageError(f"need {rows * cols} entries, got {len(entries)}")
        vs = varset or entries[0].varset
        for e in entries:
            if e.varset != vs:
                raise UsageError("matrix entries must share a VarSet")
        self.rows = rows
        self.cols = cols
        self.varset = vs
        self.entries = entries

    # -- constructors --------------------------------------------------------

    @classmethod
    def identity(cls, n: int, vs: VarSet) -> "PolyMatrix":
        one = Polynomial.constant(vs, 1)
        zero = Polynomial.zero(vs)
        return cls(n, n, [one if i == j else zero for i in range(n) for j in range(n)])

    @classmethod
    def zero(cls, rows: int, cols: int, vs: VarSet) -> "PolyMatrix":
        z = Polynomial.zero(vs)
        return cls(rows, cols, [z] * (rows * cols))

    @classmethod
    def diagonal(cls, diag: Sequence[Polynomial], rows: int | None = None, cols: int | None = None) -> "PolyMatrix":
        n = len(diag)
        rows = rows or n
        cols = cols or n
        vs = diag[0].varset
        out = cls.zero(rows, cols, vs)
        for i, d in enumerate(diag):
            out[i, i] = d
        return out

    @classmethod
    def from_rows(cls, rowlist: Sequence[Sequence[Polynomial]]) -> "PolyMatrix":
        rows = len(rowlist)
        cols = len(rowlist[0])
        flat = [e for row in rowlist for e in row]
        return cls(rows, cols, flat)

    # -- access ----------------------------------------------------------------

    def __getitem__(self, idx):
        i, j = idx
        return self.entries[i * self.cols + j]

    def __setitem__(self, idx, value):
        i, j = idx
        self.entries[i * self.cols + j] = value

    def row(self, i: int) -> list:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def col(self, j: int) -> list:
        return self.entries[j::self.cols]

    def copy(self) -> "PolyMatrix":
        return PolyMatrix(self.rows, self.cols, list(self.entries), self.varset)

    def __eq__(self, other):
        return (
            isinstance(other, PolyMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
        )

    def __repr__(self):
        body = "; ".join(", ".join(str(e) for e in self.row(i)) for i in range(self.rows))
        return f"PolyMatrix({self.rows}x{self.cols}: {body})"

    # -- arithmetic -------------------------------------------------------------

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.rows != other.rows or self.cols != other.cols:
            raise UsageError("matrix shapes do not match for addition")
        return PolyMatrix(
            self.rows, self.cols, [a + b for a, b in zip(self.entries, other.entries)], self.varset
        )

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.rows != other.rows or self.cols != other.cols:
            raise UsageError("matrix shapes do not match for subtraction")
        return PolyMatrix(
            self.rows, self.cols, [a - b for a, b in zip(self.entries, other.entries)], self.varset
        )

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Polynomial)):
            return PolyMatrix(self.rows, self.cols, [e * other for e in self.entries], self.varset)
        if self.cols != other.rows:
            raise UsageError(
                f"dimension mismatch: ({self.rows}x{self.cols}) * ({other.rows}x{other.cols})"
            )
        zero = Polynomial.zero(self.varset)
        out = []
        for i in range(self.rows):
            arow = self.row(i)
            for j in range(other.cols):
                acc = zero
                for k in range(self.cols):
                    if arow[k].is_zero():
                        continue
                    acc = acc + arow[k] * other[k, j]
                out.append(acc)
        return PolyMatrix(self.rows, other.cols, out, self.varset)

    __rmul__ = __mul__

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix(
            self.cols, self.rows,
            [self[i, j] for j in range(self.cols) for i in range(self.rows)],
            self.varset,
        )

    def map_entries(self, fn: Callable[[Polynomial], Polynomial]) -> "PolyMatrix":
        return PolyMatrix(self.rows, self.cols, [fn(e) for e in self.entries], self.varset)

    def substitute(self, assignments) -> "PolyMatrix":
        return self.map_entries(lambda e: e.substitute(assignments))

    def is_square(self) -> bool:
        return self.rows == self.cols

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in self.entries)


# -- determinant ---------------------------------------------------------------


def determinant(F: PolyMatrix) -> Polynomial:
    """Exact determinant of a square matrix."""
    if not F.is_square():
        raise UsageError("determinant needs a square matrix")
    n = F.rows
    if n == 1:
        return F[0, 0]
    zeros = sum(1 for e in F.entries if e.is_zero())
    if zeros * 2 >= n * n:
        return _det_cofactor(F, list(range(n)), list(range(n)), {})
    return _det_bareiss(F)


def _det_cofactor(F, rows, cols, memo):
    key = (tuple(rows), tuple(cols))
    hit = memo.get(key)
    if hit is not None:
        return hit
    vs = F.varset
    if len(rows) == 1:
        return F[rows[0], cols[0]]
    # expand along the row with the most zeros
    best, best_zeros = rows[0], -1
    for r in rows:
        z = sum(1 for c in cols if F[r, c].is_zero())
        if z > best_zeros:
            best, best_zeros = r, z
    rest = [r for r in rows if r != best]
    sign_base = rows.index(best)
    acc = Polynomial.zero(vs)
    for jpos, c in enumerate(cols):
        e = F[best, c]
        if e.is_zero():
            continue
        sub = _det_cofactor(F, rest, [x for x in cols if x != c], memo)
        term = e * sub
        acc = acc + (term if (sign_base + jpos) % 2 == 0 else -term)
    memo[key] = acc
    return acc


def _det_bareiss(F: PolyMatrix) -> Polynomial:
    """Fraction-free Bareiss elimination; every division is exact."""
    n = F.rows
    vs = F.varset
    a = [list(F.row(i)) for i in range(n)]
    sign = 1
    prev = Polynomial.constant(vs, 1)
    for k in range(n - 1):
        if a[k][k].is_zero():
            pivot_row = next((i for i in range(k + 1, n) if not a[i][k].is_zero()), None)
            if pivot_row is None:
                return Polynomial.zero(vs)
            a[k], a[pivot_row] = a[pivot_row], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = a[i][j] * a[k][k] - a[i][k] * a[k][j]
                a[i][j] = num.exact_divide(prev)
            a[i][k] = Polynomial.zero(vs)
        prev = a[k][k]
    det = a[n - 1][n - 1]
    return det if sign == 1 else -det


def rank(F: PolyMatrix) -> int:
    """Rank over the fraction field, by fraction-free elimination with pivoting."""
    m = [list(F.row(i)) for i in range(F.rows)]
    nrows, ncols = F.rows, F.cols
    vs = F.varset
    r = 0
    prev = Polynomial.constant(vs, 1)
    for c in range(ncols):
        pivot = next((i for i in range(r, nrows) if not m[i][c].is_zero()), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        for i in range(r + 1, nrows):
            for j in range(c + 1, ncols):
                num = m[i][j] * m[r][c] - m[i][c] * m[r][j]
                m[i][j] = num.exact_divide(prev)
            m[i][c] = Polynomial.zero(vs)
        prev = m[r][c]
        r += 1
        if r == nrows:
            break
    return r


# -- minors and determinantal divisors -------------------------------------------


@dataclass(frozen=True)
class MinorReport:
    """All k-by-k minors, their normalized gcd d_k, and the reduced minors.

    Minors are enumerated with row index sets lexicographic outer, column
    index sets lexicographic inner, so the report is reproducible
    byte-for-byte.
    """

    k: int
    minors: tuple
    dk: Polynomial
    reduced: tuple


def minors(F: PolyMatrix, k: int) -> list:
    if not 1 <= k <= min(F.rows, F.cols):
        raise UsageError(f"minor order {k} out of range for {F.rows}x{F.cols}")
    out = []
    for rset in combinations(range(F.rows), k):
        for cset in combinations(range(F.cols), k):
            sub = PolyMatrix(k, k, [F[i, j] for i in rset for j in cset], F.varset)
            out.append(determinant(sub))
    return out


def minor_report(F: PolyMatrix, k: int) -> MinorReport:
    ms = minors(F, k)
    vs = F.varset
    if all(m.is_zero() for m in ms):
        zero = Polynomial.zero(vs)
        return MinorReport(k=k, minors=tuple(ms), dk=zero, reduced=tuple(ms))
    dk = gcd_list([m for m in ms if not m.is_zero()])
    reduced = tuple(m.exact_divide(dk) for m in ms)
    return MinorReport(k=k, minors=tuple(ms), dk=dk, reduced=reduced)


def dk(F: PolyMatrix, k: int) -> Polynomial:
    """The normalized gcd of all k-by-k minors (zero when k exceeds the rank)."""
    return minor_report(F, k).dk


def jk_is_unit(F: PolyMatrix, k: int, order: MonomialOrder = LEX) -> bool:
    """True iff the order-k reduced minors generate the unit ideal."""
    report = minor_report(F, k)
    if report.dk.is_zero():
        raise RankError(f"all {k}x{k} minors vanish; J_{k} is only defined up to the rank")
    nonzero = [v for v in report.reduced if not v.is_zero()]
    return groebner.is_unit_ideal(nonzero, order)


@dataclass(frozen=True)
class InvariantFactorList:
    """Invariant factors of the Smith form, with ambient shape for padding."""

    factors: tuple
    rank: int
    ambient: tuple

    def as_matrix(self, vs: VarSet) -> PolyMatrix:
        rows, cols = self.ambient
        S = PolyMatrix.zero(rows, cols, vs)
        for i, f in enumerate(self.factors):
            S[i, i] = f
        return S


def theoretical_smith(F: PolyMatrix) -> InvariantFactorList:
    """Invariant factors Phi_i = d_i / d_{i-1}, asserting the divisibility chain."""
    r = rank(F)
    vs = F.varset
    factors = []
    prev = Polynomial.constant(vs, 1)
    for i in range(1, r + 1):
        di = minor_report(F, i).dk
        if di.is_zero():
            raise InternalConsistencyError(f"d_{i} vanished below the computed rank {r}")
        try:
            phi = di.exact_divide(prev)
        except Exception as exc:
            raise InternalConsistencyError(
                f"d_{i-1} does not divide d_{i}; the divisor chain is a theorem"
            ) from exc
        factors.append(phi)
        prev = di
    for a, b in zip(factors, factors[1:]):
        if not a.divides(b):
            raise InternalConsistencyError(
                "invariant factor chain violated; this signals a bug, not bad input"
            )
    return InvariantFactorList(factors=tuple(factors), rank=r, ambient=(F.rows, F.cols))


# -- unimodularity and primeness ---------------------------------------------------


def is_unimodular(F: PolyMatrix) -> bool:
    """True iff F is square with a nonzero constant determinant."""
    if not F.is_square():
        raise UsageError("unimodularity is defined for square matrices")
    d = determinant(F)
    return d.is_constant() and not d.is_zero()


def is_zlp(F: PolyMatrix, order: MonomialOrder = LEX) -> bool:
    """Zero left prime: the maximal (l x l) minors generate the unit ideal.

    For tall matrices, test the transpose (ZRP) instead.
    """
    if F.rows > F.cols:
        raise UsageError("is_zlp expects a wide matrix (rows <= cols); transpose for ZRP")
    ms = minors(F, F.rows)
    nonzero = [m for m in ms if not m.is_zero()]
    if not nonzero or rank(F) < F.rows:
        raise RankError("is_zlp needs a full-row-rank input")
    return groebner.is_unit_ideal(nonzero, order)


# -- fraction-field kernels ----------------------------------------------------------


class _Frac:
    """Rational function num/den; internal helper for kernel elimination."""

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial | None = None):
        vs = num.varset
        if den is None:
            den = Polynomial.constant(vs, 1)
        if den.is_zero():
            raise UsageError("zero denominator")
        self.num = num
        self.den = den

    def normalize(self) -> "_Frac":
        from .polyring import gcd as poly_gcd

        if self.num.is_zero():
            return _Frac(self.num)
        g = poly_gcd(self.num, self.den)
        num, den = self.num.exact_divide(g), self.den.exact_divide(g)
        den_monic = den.monic()
        if den_monic != den:
            _, lc = den.leading()
            num = num * (Fraction(1) / lc)
            den = den_monic
        return _Frac(num, den)

    def is_zero(self):
        return self.num.is_zero()

    def __add__(self, other):
        return _Frac(self.num * other.den + other.num * self.den, self.den * other.den).normalize()

    def __sub__(self, other):
        return _Frac(self.num * other.den - other.num * self.den, self.den * other.den).normalize()

    def __mul__(self, other):
        return _Frac(self.num * other.num, self.den * other.den).normalize()

    def __truediv__(self, other):
        if other.is_zero():
            raise UsageError("division by zero fraction")
        return _Frac(self.num * other.den, self.den * other.num).normalize()


def left_kernel_fracfield(F: PolyMatrix) -> PolyMatrix:
    """A basis of the left kernel: W with W*F == 0, rows primitive polynomials.

    Computed by reduced row echelon form of F^T over the fraction field;
    denominators are cleared and each row is made integer-primitive with a
    positive leading coefficient under the global order.
    """
    r = rank(F)
    l = F.rows
    if r >= l:
        raise RankError("left kernel is empty: the matrix has full row rank")
    vs = F.varset
    # RREF of F^T: columns of F^T correspond to the l kernel coordinates.
    mat = [[_Frac(F[j, i]) for j in range(l)] for i in range(F.cols)]
    nrows = len(mat)
    pivots = []
    prow = 0
    for c in range(l):
        pivot = next((i for i in range(prow, nrows) if not mat[i][c].is_zero()), None)
        if pivot is None:
            continue
        mat[prow], mat[pivot] = mat[pivot], mat[prow]
        pv = mat[prow][c]
        mat[prow] = [x / pv for x in mat[prow]]
        for i in range(nrows):
            if i != prow and not mat[i][c].is_zero():
                f = mat[i][c]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[prow])]
        pivots.append(c)
        prow += 1
        if prow == nrows:
            break
    free = [c for c in range(l) if c not in pivots]
    if len(free) != l - r:
        raise InternalConsistencyError("kernel dimension disagrees with the computed rank")
    rows_out = []
    one = Polynomial.constant(vs, 1)
    for fc in free:
        coords = [Polynomial.zero(vs)] * l
        dens = [one]
        entries: list[tuple[int, _Frac]] = []
        for pi, pc in enumerate(pivots):
            val = mat[pi][fc]
            if not val.is_zero():
                entries.append((pc, val))
                dens.append(val.den)
        # common denominator, then clear it
        lcm = one
        from .polyring import gcd as poly_gcd

        for d in dens:
            g = poly_gcd(lcm, d)
            lcm = lcm.exact_divide(g) * d if not g.is_zero() else lcm * d
        coords[fc] = lcm
        for pc, val in entries:
            coords[pc] = -val.num * lcm.exact_divide(val.den)
        row = _primitive_row(coords)
        rows_out.append(row)
    W = PolyMatrix(len(rows_out), l, [e for row in rows_out for e in row], vs)
    if rank(W) != l - r:
        raise InternalConsistencyError("kernel basis rows are not independent")
    return W


def _primitive_row(coords: list) -> list:
    """Divide a polynomial row by the gcd of its entries; positive lead sign.

    The whole row is also scaled to coprime integer coefficients so kernel
    bases are deterministic fixtures.
    """
    import math as _math

    nonzero = [c for c in coords if not c.is_zero()]
    if not nonzero:
        return coords
    g = gcd_list(nonzero)
    coords = [c.exact_divide(g) for c in coords]
    num_gcd, den_lcm = 0, 1
    for c in coords:
        for coeff in c.terms.values():
            num_gcd = _math.gcd(num_gcd, abs(coeff.numerator))
            den_lcm = den_lcm * coeff.denominator // _math.gcd(den_lcm, coeff.denominator)
    if num_gcd:
        factor = Fraction(den_lcm, num_gcd)
        if factor != 1:
            coords = [c * factor for c in coords]
    first = next(c for c in coords if not c.is_zero())
    _, lc = first.leading()
    if lc < 0:
        coords = [-c for c in coords]
    return coords


def inverse_unimodular(F: PolyMatrix) -> PolyMatrix:
    """Exact inverse of a unimodular matrix via the adjugate."""
    if not F.is_square():
        raise UsageError("inverse needs a square matrix")
    d = determinant(F)
    if not d.is_constant() or d.is_zero():
        raise UsageError("matrix is not unimodular; no polynomial inverse")
    n = F.rows
    vs = F.varset
    dval = d.constant_value()
    if n == 1:
        return PolyMatrix(1, 1, [Polynomial.constant(vs, Fraction(1) / dval)], vs)
    out = PolyMatrix.zero(n, n, vs)
    idx = list(range(n))
    for i in range(n):
        for j in range(n):
            rows_ = [r for r in idx if r != i]
            cols_ = [c for c in idx if c != j]
            sub = PolyMatrix(n - 1, n - 1, [F[r, c] for r in rows_ for c in cols_], vs)
            cof = determinant(sub)
            if (i + j) % 2:
                cof = -cof
            out[j, i] = cof * (Fraction(1) / dval)
    return out
