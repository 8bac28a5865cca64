"""Determinant-shape classification and the Smith-equivalence decision.

Three determinant classes are decidable:

* chain shape: a product of factors (z_i - f_i), each f_i in strictly
  later variables, times a tail univariate in the last variable; partial
  chains (any subset of variables) are allowed;
* linear shape: a product of linearly independent affine-linear forms in
  the non-last variables times a univariate tail, handled by conjugating
  with the ring automorphism z_i -> g_i;
* univariate shape: d_r lives in a single variable.

For a supported shape, the matrix is equivalent to its Smith form exactly
when every J_k (ideal of order-k reduced minors) is the unit ideal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import polymat
from .errors import DivisibilityError, IndependenceError, UsageError
from .groebner import is_unit_ideal
from .polyring import LEX, MonomialOrder, Polynomial, VarSet


# -- shapes -------------------------------------------------------------------


@dataclass(frozen=True)
class LinearForm:
    """An affine-linear form a_1 z_1 + ... + a_{n-1} z_{n-1} + b (no z_n)."""

    coeffs: tuple
    constant: Fraction

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "LinearForm":
        vs = p.varset
        n = len(vs)
        if n < 2:
            raise UsageError("linear forms need at least two ambient variables")
        if p.is_zero():
            raise UsageError("a linear form must not be identically zero")
        if p.total_degree() > 1:
            raise UsageError(f"not a linear form: {p}")
        if p.degree_in(vs.names[-1]) > 0:
            raise UsageError(f"linear forms may not involve the last variable: {p}")
        coeffs = []
        for name in vs.names[:-1]:
            view = p.univar_view(name)
            coeffs.append(view[1].constant_value() if len(view) > 1 else Fraction(0))
        const = Fraction(p.terms.get((0,) * n, 0))
        return cls(coeffs=tuple(coeffs), constant=const)

    def to_polynomial(self, vs: VarSet) -> Polynomial:
        n = len(vs)
        terms = {}
        for i, a in enumerate(self.coeffs):
            if a:
                mono = [0] * n
                mono[i] = 1
                terms[tuple(mono)] = a
        if self.constant:
            terms[(0,) * n] = self.constant
        return Polynomial(vs, terms)


@dataclass(frozen=True)
class ChainShape:
    """det = (z_{i1}-f_{i1}) ... (z_{ik}-f_{ik}) * tail, tail univariate."""

    factors: tuple  # ((var_name, f_poly), ...) in declared variable order
    tail: Polynomial
    tail_var: str

    variant = "chain"


@dataclass(frozen=True)
class LinearShape:
    """det = g_1 ... g_k * tail with independent linear forms g_i."""

    forms: tuple
    tail: Polynomial

    variant = "linear"


@dataclass(frozen=True)
class UnivariateDrShape:
    """d_r lives in a single variable (and is not otherwise structured)."""

    var: str

    variant = "univariate-dr"


@dataclass(frozen=True)
class UnsupportedShape:
    reason: str = ""

    variant = "unsupported"


DetShape = ChainShape | LinearShape | UnivariateDrShape | UnsupportedShape


def detect_chain_shape(p: Polynomial) -> DetShape:
    """Greedy chain extraction in declared variable order.

    For each non-last variable of degree <= 1, try to split off a factor
    (z_i - f_i) with f_i in strictly later variables; whatever remains must
    be univariate in the last variable (or constant).
    """
    if p.is_zero():
        raise UsageError("cannot classify the zero polynomial")
    vs = p.varset
    names = vs.names
    residual = p
    factors = []
    for i, name in enumerate(names[:-1]):
        d = residual.degree_in(name)
        if d != 1:
            continue
        view = residual.univar_view(name)
        c0, c1 = view[0], view[1]
        if not c1.divides(c0):
            continue
        shift = -c0.exact_divide(c1)
        support = shift.variables_present()
        if any(vs.index(v) <= i for v in support):
            continue
        factors.append((name, shift))
        residual = c1
    tail_var = names[-1]
    leftover = [v for v in residual.variables_present() if v != tail_var]
    if leftover:
        return UnsupportedShape(
            reason=f"residual after chain extraction still involves {leftover}"
        )
    return ChainShape(factors=tuple(factors), tail=residual, tail_var=tail_var)


def verify_linear_shape(p: Polynomial, forms: Sequence[LinearForm | Polynomial], tail: Polynomial) -> DetShape:
    """Check p == g_1 ... g_k * tail with independent forms and univariate tail."""
    vs = p.varset
    n = len(vs)
    lfs = [f if isinstance(f, LinearForm) else LinearForm.from_polynomial(f) for f in forms]
    if not 1 <= len(lfs) <= n - 1:
        raise UsageError(f"expected between 1 and {n - 1} linear forms, got {len(lfs)}")
    rows = [list(f.coeffs) for f in lfs]
    if _row_rank(rows) != len(lfs):
        return UnsupportedShape(reason="linear-form coefficient rows are dependent")
    tail_support = [v for v in tail.variables_present() if v != vs.names[-1]]
    if tail_support:
        return UnsupportedShape(reason=f"tail involves {tail_support}, not just the last variable")
    product = tail
    for f in lfs:
        product = product * f.to_polynomial(vs)
    if product != p:
        return UnsupportedShape(reason="forms times tail do not reproduce the polynomial")
    return LinearShape(forms=tuple(lfs), tail=tail)


def _row_rank(rows) -> int:
    rows = [list(map(Fraction, r)) for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c]), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        for i in range(len(rows)):
            if i != r and rows[i][c]:
                f = rows[i][c] / rows[r][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        r += 1
    return r


# -- the automorphism z_i -> g_i ------------------------------------------------


@dataclass(frozen=True)
class Automorphism:
    """The ring map z_i -> g_i (i < n), z_n -> z_n, with its exact inverse.

    Realized by an invertible (n+1) x (n+1) matrix over Q acting on the
    column (z_1, ..., z_n, 1).
    """

    varset: VarSet
    matrix: tuple  # (n+1) x (n+1) Fractions, row-major
    inverse: tuple

    def _mapping(self, rows) -> dict:
        vs = self.varset
        n = len(vs)
        mapping = {}
        for i in range(n - 1):
            terms = {}
            row = rows[i]
            for j in range(n):
                if row[j]:
                    mono = [0] * n
                    mono[j] = 1
                    terms[tuple(mono)] = row[j]
            if row[n]:
                terms[(0,) * n] = row[n]
            mapping[vs.names[i]] = Polynomial(vs, terms)
        return mapping

    def forward_mapping(self) -> dict:
        n = len(self.varset)
        rows = [self.matrix[i * (n + 1):(i + 1) * (n + 1)] for i in range(n + 1)]
        return self._mapping(rows)

    def inverse_mapping(self) -> dict:
        n = len(self.varset)
        rows = [self.inverse[i * (n + 1):(i + 1) * (n + 1)] for i in range(n + 1)]
        return self._mapping(rows)

    def apply(self, p: Polynomial, inverse: bool = False) -> Polynomial:
        return p.substitute(self.inverse_mapping() if inverse else self.forward_mapping())


def build_automorphism(forms: Sequence[LinearForm | Polynomial], vs: VarSet) -> Automorphism:
    """Construct the automorphism from independent forms, padding when fewer
    than n-1 are supplied (standard basis rows outside the span)."""
    n = len(vs)
    lfs = [f if isinstance(f, LinearForm) else LinearForm.from_polynomial(f) for f in forms]
    if len(lfs) > n - 1:
        raise UsageError(f"at most {n - 1} forms are allowed, got {len(lfs)}")
    rows = [list(f.coeffs) + [f.constant] for f in lfs]
    coeff_rows = [r[:-1] for r in rows]
    if _row_rank(coeff_rows) != len(rows):
        raise IndependenceError("linear-form coefficient rows are dependent")
    for j in range(n - 1):
        if len(rows) == n - 1:
            break
        unit = [Fraction(0)] * (n - 1)
        unit[j] = Fraction(1)
        if _row_rank(coeff_rows + [unit]) > _row_rank(coeff_rows):
            coeff_rows.append(unit)
            rows.append(unit + [Fraction(0)])
    if len(rows) != n - 1:
        raise IndependenceError("could not complete the coefficient rows to full rank")

    dim = n + 1
    A = [[Fraction(0)] * dim for _ in range(dim)]
    for i in range(n - 1):
        for j in range(n - 1):
            A[i][j] = Fraction(rows[i][j])
        A[i][n] = Fraction(rows[i][-1])  # constant column; column n-1 (z_n) stays 0
    A[n - 1][n - 1] = Fraction(1)  # z_n fixed
    A[n][n] = Fraction(1)  # 1 fixed
    A_inv = _invert_fraction_matrix(A)
    flat = tuple(x for row in A for x in row)
    flat_inv = tuple(x for row in A_inv for x in row)
    return Automorphism(varset=vs, matrix=flat, inverse=flat_inv)


def _invert_fraction_matrix(A):
    n = len(A)
    work = [list(map(Fraction, row)) + [Fraction(1) if i == j else Fraction(0) for j in range(n)]
            for i, row in enumerate(A)]
    for c in range(n):
        piv = next((i for i in range(c, n) if work[i][c]), None)
        if piv is None:
            raise IndependenceError("matrix is singular")
        work[c], work[piv] = work[piv], work[c]
        pv = work[c][c]
        work[c] = [x / pv for x in work[c]]
        for i in range(n):
            if i != c and work[i][c]:
                f = work[i][c]
                work[i] = [a - f * b for a, b in zip(work[i], work[c])]
    return [row[n:] for row in work]


def apply_automorphism(phi: Automorphism, F: polymat.PolyMatrix, direction: str = "forward") -> polymat.PolyMatrix:
    """Entrywise image of a matrix under the automorphism or its inverse."""
    if direction not in ("forward", "inverse"):
        raise UsageError("direction must be 'forward' or 'inverse'")
    mapping = phi.forward_mapping() if direction == "forward" else phi.inverse_mapping()
    return F.substitute(mapping)


# -- the decision procedure ---------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    """Outcome of the Smith-equivalence test with per-order diagnostics."""

    shape: DetShape
    rank: int
    per_k: tuple  # ((d_k: Polynomial, jk_unit: bool), ...) for k = 1..rank
    verdict: str  # 'equivalent' | 'not-equivalent' | 'undecidable-shape'
    theorem: str
    witnesses: Optional[tuple] = None  # (U, V) when a reduction supplied them

    @property
    def dk_list(self):
        return tuple(d for d, _ in self.per_k)

    @property
    def jk_list(self):
        return tuple(j for _, j in self.per_k)


def _theorem_label(shape: DetShape, square_full: bool) -> str:
    if isinstance(shape, ChainShape):
        single = len(shape.factors) == 1
        if square_full:
            return "3.2" if single else "3.5"
        return "3.3" if single else "3.6"
    if isinstance(shape, LinearShape):
        return "4.1" if square_full else "4.2"
    if isinstance(shape, UnivariateDrShape):
        return "2.8"
    return ""


def classify_target(target: Polynomial, hints: Sequence[Polynomial] | None = None) -> DetShape:
    """Classify det(F) or d_r(F): hints force the linear route, otherwise try
    chain first, then the single-variable fallback."""
    if hints:
        vs = target.varset
        lfs = [f if isinstance(f, LinearForm) else LinearForm.from_polynomial(f) for f in hints]
        product = Polynomial.constant(vs, 1)
        for f in lfs:
            product = product * f.to_polynomial(vs)
        try:
            tail = target.exact_divide(product)
        except DivisibilityError:
            return UnsupportedShape(reason="supplied linear forms do not divide the target")
        return verify_linear_shape(target, lfs, tail)
    shape = detect_chain_shape(target)
    if isinstance(shape, ChainShape):
        return shape
    support = target.variables_present()
    if len(support) <= 1:
        var = support[0] if support else target.varset.names[-1]
        return UnivariateDrShape(var=var)
    return shape


def check_equivalence(
    F: polymat.PolyMatrix,
    hints: Sequence[Polynomial] | None = None,
    order: MonomialOrder = LEX,
) -> EquivalenceReport:
    """Decide whether F is equivalent to its Smith form.

    Classifies det(F) (square, full rank) or d_r(F) (everything else),
    then checks that the reduced minors of every order up to the rank
    generate the unit ideal.  Unsupported determinant shapes yield the
    verdict 'undecidable-shape' with the same diagnostics attached.
    """
    r = polymat.rank(F)
    if r == 0:
        return EquivalenceReport(
            shape=UnsupportedShape(reason="zero matrix"),
            rank=0,
            per_k=(),
            verdict="equivalent",
            theorem="",
        )
    square_full = F.is_square() and r == F.rows
    reports = [polymat.minor_report(F, k) for k in range(1, r + 1)]
    target = polymat.determinant(F) if square_full else reports[-1].dk
    shape = classify_target(target, hints)

    per_k = []
    for rep in reports:
        nonzero = [v for v in rep.reduced if not v.is_zero()]
        per_k.append((rep.dk, is_unit_ideal(nonzero, order)))
    per_k = tuple(per_k)

    if isinstance(shape, UnsupportedShape):
        return EquivalenceReport(shape=shape, rank=r, per_k=per_k, verdict="undecidable-shape", theorem="")
    verdict = "equivalent" if all(j for _, j in per_k) else "not-equivalent"
    return EquivalenceReport(
        shape=shape,
        rank=r,
        per_k=per_k,
        verdict=verdict,
        theorem=_theorem_label(shape, square_full),
    )


def verify_witness(
    F: polymat.PolyMatrix,
    U: polymat.PolyMatrix,
    V: polymat.PolyMatrix,
    S: polymat.PolyMatrix,
    factored: bool = False,
) -> bool:
    """True iff U, V are unimodular and U*F*V == S (or F == U*S*V when
    `factored` is set)."""
    if U.rows != U.cols or V.rows != V.cols:
        raise UsageError("witnesses must be square")
    if U.cols != F.rows or F.cols != V.rows:
        raise UsageError("witness dimensions do not match the matrix")
    if S.rows != F.rows or S.cols != F.cols:
        raise UsageError("the Smith candidate must match the matrix shape")
    if not (polymat.is_unimodular(U) and polymat.is_unimodular(V)):
        return False
    if factored:
        return F == U * S * V
    return (U * F) * V == S
