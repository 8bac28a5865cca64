"""Constructive reduction of a qualifying matrix to its Smith form.

The pipeline peels one linear factor at a time.  For a factor that is
linear in a single variable (a chain factor z_i - f_i, or a rational root
z_n - c of the univariate tail), substituting the root drops the rank of
the matrix; a ZLP basis of the left kernel of the substituted matrix is
completed to a unimodular matrix U, and U*G = diag(I_k, factor*I_{l-k})*G'
splits the factor off.  Each split is folded into the accumulated diagonal
by conjugation, preferring completions whose conjugate stays polynomial;
when no completion folds, a last-resort elementary-operation fold is
attempted.  Every divisibility claim the underlying proofs make is
asserted at runtime.

Failures are typed, not fatal: 'kernel-not-ZLP' (the normalized kernel
basis is not zero prime; a ZLP one exists but is not searched for),
'completion-not-found' (no unimodular completion folds within the degree
bound), and 'unsupported-shape' (witness construction is out of scope for
the shape, e.g. a tail with no full rational splitting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from typing import Iterable, Optional, Sequence

from . import polymat
from .criteria import (
    Automorphism,
    ChainShape,
    DetShape,
    LinearShape,
    UnivariateDrShape,
    UnsupportedShape,
    apply_automorphism,
    build_automorphism,
    verify_witness,
)
from .errors import (
    DivisibilityError,
    InternalConsistencyError,
    RankError,
    ReductionFailure,
    SmitheqError,
    UsageError,
)
from .groebner import is_unit_ideal
from .polymat import PolyMatrix, determinant, inverse_unimodular, left_kernel_fracfield, rank
from .polyring import LEX, Polynomial, VarSet


class ShapeError(SmitheqError):
    """fold_diagonal met a matrix outside its divisibility preconditions."""


# -- elementary operations ------------------------------------------------------


@dataclass(frozen=True)
class ElementaryOp:
    """One unimodular row/column operation.

    kinds: 'row-swap', 'col-swap', 'row-scale-by-nonzero-constant',
    'col-scale-by-nonzero-constant', 'row-add-multiple', 'col-add-multiple'.
    Row kinds act from the left, column kinds from the right.  For the add
    kinds, target `i` receives `multiplier` times source `j`.
    """

    kind: str
    i: int
    j: int
    multiplier: Optional[Polynomial] = None

    @property
    def side(self) -> str:
        return "left" if self.kind.startswith("row") else "right"

    def matrix(self, n: int, vs: VarSet) -> PolyMatrix:
        M = PolyMatrix.identity(n, vs)
        one = Polynomial.constant(vs, 1)
        zero = Polynomial.zero(vs)
        if self.kind in ("row-swap", "col-swap"):
            M[self.i, self.i] = zero
            M[self.j, self.j] = zero
            M[self.i, self.j] = one
            M[self.j, self.i] = one
        elif self.kind in ("row-scale-by-nonzero-constant", "col-scale-by-nonzero-constant"):
            if self.multiplier is None or not self.multiplier.is_constant() or self.multiplier.is_zero():
                raise UsageError("scale operations need a nonzero constant multiplier")
            M[self.i, self.i] = self.multiplier
        elif self.kind == "row-add-multiple":
            M[self.i, self.j] = self.multiplier
        elif self.kind == "col-add-multiple":
            M[self.j, self.i] = self.multiplier
        else:
            raise UsageError(f"unknown elementary op kind {self.kind!r}")
        return M

    def apply(self, A: PolyMatrix) -> PolyMatrix:
        out = A.copy()
        if self.kind == "row-swap":
            for c in range(A.cols):
                out[self.i, c], out[self.j, c] = out[self.j, c], out[self.i, c]
        elif self.kind == "col-swap":
            for r in range(A.rows):
                out[r, self.i], out[r, self.j] = out[r, self.j], out[r, self.i]
        elif self.kind == "row-scale-by-nonzero-constant":
            for c in range(A.cols):
                out[self.i, c] = out[self.i, c] * self.multiplier
        elif self.kind == "col-scale-by-nonzero-constant":
            for r in range(A.rows):
                out[r, self.i] = out[r, self.i] * self.multiplier
        elif self.kind == "row-add-multiple":
            for c in range(A.cols):
                out[self.i, c] = out[self.i, c] + self.multiplier * out[self.j, c]
        elif self.kind == "col-add-multiple":
            for r in range(A.rows):
                out[r, self.i] = out[r, self.i] + self.multiplier * out[r, self.j]
        return out


# -- traces -------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceStep:
    """state_t = left * state_{t-1} * right; both factors unimodular."""

    description: str
    left: PolyMatrix
    right: PolyMatrix


@dataclass
class ReductionTrace:
    """Audit trail of a reduction: replaying the steps against the input
    reproduces every intermediate state exactly."""

    input: PolyMatrix
    steps: list = field(default_factory=list)
    failure: Optional[str] = None
    failure_detail: str = ""
    u: Optional[PolyMatrix] = None
    v: Optional[PolyMatrix] = None
    s: Optional[PolyMatrix] = None

    @property
    def success(self) -> bool:
        return self.failure is None and self.s is not None

    def states(self):
        """Yield the intermediate matrices, starting from the input."""
        state = self.input
        yield state
        for step in self.steps:
            state = step.left * state * step.right
            yield state

    def replay_ok(self) -> bool:
        """Check the final replayed state against the recorded result."""
        if not self.success:
            return True
        *_, last = self.states()
        return last == self.s


# -- elementary pipeline pieces ---------------------------------------------------


def split_linear_factor(factor: Polynomial) -> tuple[str, Polynomial]:
    """Write `factor` as c*(v - shift) with shift free of v; return (v, shift).

    The pivot variable is the one in which the factor has degree exactly 1
    with a constant leading coefficient.
    """
    vs = factor.varset
    for name in vs.names:
        if factor.degree_in(name) != 1:
            continue
        view = factor.univar_view(name)
        c1 = view[1]
        if not c1.is_constant():
            continue
        shift = -view[0] * (Fraction(1) / c1.constant_value())
        return name, shift
    raise UsageError(f"factor is not linear in a single variable: {factor}")


def zlp_annihilator(F: PolyMatrix, sub: dict) -> PolyMatrix:
    """ZLP basis of the left kernel of F with `sub` substituted in.

    Raises ReductionFailure('kernel-not-ZLP') when the normalized kernel
    basis is not zero left prime (one exists by theory; no search beyond
    the normalized basis is attempted).
    """
    F1 = F.substitute(sub)
    k = rank(F1)
    if k >= F.rows:
        raise RankError("substitution did not drop the rank; nothing to annihilate")
    W = left_kernel_fracfield(F1)
    if not is_zlp(W):
        raise ReductionFailure(
            "kernel-not-ZLP",
            "the normalized kernel basis is not zero left prime",
        )
    return W


def is_zlp(W: PolyMatrix) -> bool:
    try:
        return polymat.is_zlp(W)
    except RankError:
        return False


def _monomials_up_to(vs: VarSet, active: Sequence[int], degree: int):
    """All exponent tuples over `active` variable indices with total degree <= degree."""
    n = len(vs)
    out = [(0,) * n]
    for d in range(1, degree + 1):
        for combo in combinations_with_replacement(active, d):
            mono = [0] * n
            for idx in combo:
                mono[idx] += 1
            out.append(tuple(mono))
    return out


def _solve_poly_linear(equations: list, n_unknowns: int, monos, vs: VarSet) -> Optional[list]:
    """Solve simultaneous linear equations over the polynomial ring.

    Each equation is (coeffs, target) meaning sum_m u_m * coeffs[m] == target
    for unknown polynomials u_0..u_{n-1} supported on `monos`.  Plain
    Gaussian elimination over Q on matched monomial coefficients; free
    unknowns are pinned to zero so the solution is deterministic.  Returns
    None when inconsistent at this support.
    """
    unknowns = []  # (m, mono)
    for m in range(n_unknowns):
        for mono in monos:
            unknowns.append((m, mono))
    columns_per_eq = []
    for coeffs, _target in equations:
        cols = []
        for m, mono in unknowns:
            c = coeffs[m]
            cols.append(
                Polynomial(vs, {mono: Fraction(1)}) * c if not c.is_zero() else Polynomial(vs)
            )
        columns_per_eq.append(cols)
    A_rows = []
    b = []
    for (coeffs, target), cols in zip(equations, columns_per_eq):
        row_monos = sorted(
            {mm for col in cols for mm in col.terms} | set(target.terms),
            key=LEX.key,
            reverse=True,
        )
        for mm in row_monos:
            A_rows.append([col.terms.get(mm, Fraction(0)) for col in cols])
            b.append(target.terms.get(mm, Fraction(0)))
    nrows, ncols = len(A_rows), len(unknowns)
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if A_rows[i][c]), None)
        if piv is None:
            continue
        A_rows[r], A_rows[piv] = A_rows[piv], A_rows[r]
        b[r], b[piv] = b[piv], b[r]
        pv = A_rows[r][c]
        A_rows[r] = [x / pv for x in A_rows[r]]
        b[r] = b[r] / pv
        for i in range(nrows):
            if i != r and A_rows[i][c]:
                f = A_rows[i][c]
                A_rows[i] = [x - f * y for x, y in zip(A_rows[i], A_rows[r])]
                b[i] = b[i] - f * b[r]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    for i in range(r, nrows):
        if b[i]:
            return None
    values = [Fraction(0)] * ncols
    for row_i, c in enumerate(pivots):
        values[c] = b[row_i]
    out_terms = [dict() for _ in range(n_unknowns)]
    for (m, mono), val in zip(unknowns, values):
        if val:
            out_terms[m][mono] = out_terms[m].get(mono, Fraction(0)) + val
    return [Polynomial(vs, terms) for terms in out_terms]


def _solve_bezout_row(cofactors: list, target: Polynomial, monos) -> Optional[list]:
    """Find polynomials x_j supported on `monos` with sum x_j*cofactors_j == target."""
    vs = target.varset
    return _solve_poly_linear([(cofactors, target)], len(cofactors), monos, vs)


def _stack_completion(top_rows: list, W: PolyMatrix) -> PolyMatrix:
    l = W.cols
    entries = []
    for row in top_rows:
        entries.extend(row)
    for i in range(W.rows):
        entries.extend(W.row(i))
    return PolyMatrix(len(top_rows) + W.rows, l, entries, W.varset)


def _e_row(vs: VarSet, l: int, j: int) -> list:
    one = Polynomial.constant(vs, 1)
    zero = Polynomial.zero(vs)
    return [one if c == j else zero for c in range(l)]


def completion_candidates(W: PolyMatrix, degree_bound: int) -> Iterable[PolyMatrix]:
    """Unimodular completions of W (as last rows), in deterministic order.

    Three families, cheapest first:

    1. standard-basis rows on top of W (works whenever some maximal minor
       of W is a nonzero constant);
    2. inverse-side construction: columns P spanning the right kernel of W
       plus lifted columns A with W*A = I (found degree by degree); when
       [P | A] is unimodular its inverse has W as its last rows;
    3. undetermined-coefficient ladder: all but one added row pinned to
       standard basis rows, the free row solved from det(U) = 1, which is
       linear in that row.
    """
    vs = W.varset
    l = W.cols
    k = l - W.rows
    if k == 0:
        d = determinant(W)
        if d.is_constant() and not d.is_zero():
            yield W
        return
    first = tuple(range(k))
    orders = [first] + [c for c in combinations(range(l), k) if c != first]
    for rows_idx in orders:
        U = _stack_completion([_e_row(vs, l, j) for j in rows_idx], W)
        d = determinant(U)
        if d.is_constant() and not d.is_zero():
            yield U
    yield from _kernel_lift_candidates(W, degree_bound)
    active = sorted({vs.index(v) for e in W.entries for v in e.variables_present()})
    one = Polynomial.constant(vs, 1)
    for degree in range(degree_bound + 1):
        monos = _monomials_up_to(vs, active, degree)
        for free_slot in range(k):
            fixed_choices = combinations(range(l), k - 1) if k > 1 else [()]
            for fixed in fixed_choices:
                rows: list = []
                fixed_iter = iter(fixed)
                for slot in range(k):
                    rows.append(None if slot == free_slot else _e_row(vs, l, next(fixed_iter)))
                cofactors = []
                for j in range(l):
                    probe = [r if r is not None else _e_row(vs, l, j) for r in rows]
                    cofactors.append(determinant(_stack_completion(probe, W)))
                solved = _solve_bezout_row(cofactors, one, monos)
                if solved is None:
                    continue
                free_row = solved
                candidate_rows = [r if r is not None else free_row for r in rows]
                U = _stack_completion(candidate_rows, W)
                d = determinant(U)
                if d.is_constant() and not d.is_zero():
                    yield U


def _kernel_lift_candidates(W: PolyMatrix, degree_bound: int) -> Iterable[PolyMatrix]:
    """Completions built on the inverse side: U^-1 = [P | A].

    P's columns span the right kernel of W; A solves W*A = I degree by
    degree.  Whenever det([P | A]) is a nonzero constant, the inverse is a
    unimodular matrix whose last rows are exactly W (the pairing conditions
    pin them down).
    """
    vs = W.varset
    l = W.cols
    s = W.rows
    k = l - s
    try:
        PT = left_kernel_fracfield(W.transpose())  # rows: right-kernel vectors of W
    except (RankError, InternalConsistencyError):
        return
    if PT.rows != k:
        return
    active = sorted({vs.index(v) for e in W.entries for v in e.variables_present()})
    for degree in range(degree_bound + 1):
        monos = _monomials_up_to(vs, active, degree)
        columns: list = []
        ok = True
        for j in range(s):
            eqs = []
            for i in range(s):
                target = Polynomial.constant(vs, 1 if i == j else 0)
                eqs.append((W.row(i), target))
            col = _solve_poly_linear(eqs, l, monos, vs)
            if col is None:
                ok = False
                break
            columns.append(col)
        if not ok:
            continue
        entries = []
        for r in range(l):
            for c in range(k):
                entries.append(PT[c, r])
            for c in range(s):
                entries.append(columns[c][r])
        M = PolyMatrix(l, l, entries, vs)
        d = determinant(M)
        if d.is_constant() and not d.is_zero():
            yield inverse_unimodular(M)
        return  # higher-degree lifts rarely change the verdict; one shot


def unimodular_completion(W: PolyMatrix, degree_bound: int = 3) -> PolyMatrix:
    """First unimodular matrix with W as its last rows, per the deterministic
    candidate order; ReductionFailure('completion-not-found') if the degree
    bound is exhausted."""
    for U in completion_candidates(W, degree_bound):
        return U
    raise ReductionFailure(
        "completion-not-found",
        f"no unimodular completion with ansatz degree <= {degree_bound}",
    )


def extract_factor(
    F: PolyMatrix, factor: Polynomial, k: int, degree_bound: int = 3
) -> tuple[PolyMatrix, PolyMatrix]:
    """Split one linear factor: U*F == diag(I_k, factor*I_{l-k}) * G exactly.

    `factor` must be linear in a single variable with the complementary
    part free of that variable; its root is substituted to drop the rank
    to k, and the annihilator of the substituted matrix is completed to
    the unimodular U.
    """
    if not F.is_square():
        raise UsageError("extract_factor needs a square matrix")
    l = F.rows
    if not 0 <= k < l:
        raise UsageError(f"level k={k} out of range for size {l}")
    var, shift = split_linear_factor(factor)
    if k == 0:
        U = PolyMatrix.identity(l, F.varset)
        G = F.map_entries(lambda e: e.exact_divide(factor))
        return U, G
    W = zlp_annihilator(F, {var: shift})
    if W.rows != l - k:
        raise RankError(
            f"substituted matrix has corank {W.rows}, expected {l - k}; "
            "the factor's multiplicity level disagrees"
        )
    U = unimodular_completion(W, degree_bound)
    return U, _divide_extracted(U * F, factor, k)


def _divide_extracted(UF: PolyMatrix, factor: Polynomial, k: int) -> PolyMatrix:
    G = UF.copy()
    for i in range(k, UF.rows):
        for j in range(UF.cols):
            try:
                G[i, j] = UF[i, j].exact_divide(factor)
            except DivisibilityError as exc:
                raise InternalConsistencyError(
                    f"row {i} of U*F is not divisible by {factor}; "
                    "the annihilator construction is broken"
                ) from exc
    return G


# -- refolding the diagonal ------------------------------------------------------


def fold_diagonal(B: PolyMatrix, split=None) -> tuple[list, PolyMatrix]:
    """Clear the off-diagonal entries of an almost-diagonal matrix by
    elementary operations with exact-division multipliers.

    Handles the post-extraction shapes of the reduction pipeline: a
    diagonal block plus one off-diagonal column (either orientation).  An
    entry (i, j) is cleared against the diagonal pivot of a clean row j
    (row operation) or a clean column i (column operation); when neither
    pivot divides, the divisibility precondition failed and a ShapeError
    is raised.

    `split`, when given, is (prefix diagonal h_1..h_{l-1}, trailing factor)
    and is asserted against the folded result.
    """
    if not B.is_square():
        raise UsageError("fold_diagonal needs a square matrix")
    n = B.rows
    work = B.copy()
    ops: list[ElementaryOp] = []

    def row_clean(j):
        return all(work[j, c].is_zero() for c in range(n) if c != j)

    def col_clean(i):
        return all(work[r, i].is_zero() for r in range(n) if r != i)

    while True:
        offdiag = [(i, j) for i in range(n) for j in range(n) if i != j and not work[i, j].is_zero()]
        if not offdiag:
            break
        progress = False
        for i, j in offdiag:
            entry = work[i, j]
            pivot_r = work[j, j]
            if not pivot_r.is_zero() and row_clean(j) and pivot_r.divides(entry):
                q = entry.exact_divide(pivot_r)
                op = ElementaryOp("row-add-multiple", i, j, -q)
                work = op.apply(work)
                ops.append(op)
                progress = True
                break
            pivot_c = work[i, i]
            if not pivot_c.is_zero() and col_clean(i) and pivot_c.divides(entry):
                q = entry.exact_divide(pivot_c)
                op = ElementaryOp("col-add-multiple", j, i, -q)
                work = op.apply(work)
                ops.append(op)
                progress = True
                break
        if not progress:
            raise ShapeError(
                "no clearable off-diagonal entry; a divisibility required by the "
                "refold preconditions does not hold"
            )
    det_b = determinant(B)
    if determinant(work) != det_b:
        raise InternalConsistencyError("refold changed the determinant")
    if split is not None:
        prefix, trailing = split
        for i, h in enumerate(prefix):
            if not _associates(work[i, i], h):
                raise ShapeError(f"diagonal slot {i} is not associate to the expected {h}")
        # trailing pivot == trailing factor * h_l, where h_l is what the
        # determinant forces: det(B) / (prefix product * trailing).
        expected_last = det_b
        for h in prefix:
            expected_last = expected_last.exact_divide(h)
        if not _associates(work[n - 1, n - 1], expected_last):
            raise ShapeError("trailing pivot is not the trailing factor times h_l")
        if not trailing.divides(work[n - 1, n - 1]):
            raise ShapeError("trailing factor does not divide the trailing pivot")
    return ops, work


def _associates(a: Polynomial, b: Polynomial) -> bool:
    if a.is_zero() or b.is_zero():
        return a.is_zero() and b.is_zero()
    return a.monic() == b.monic()


def compose_ops(ops: Sequence[ElementaryOp], n: int, vs: VarSet) -> tuple[PolyMatrix, PolyMatrix]:
    """Accumulate a list of elementary ops into (L, R) with L*B*R = folded B."""
    L = PolyMatrix.identity(n, vs)
    R = PolyMatrix.identity(n, vs)
    for op in ops:
        if op.side == "left":
            L = op.matrix(n, vs) * L
        else:
            R = R * op.matrix(n, vs)
    return L, R


# -- atoms and plans ----------------------------------------------------------------


@dataclass(frozen=True)
class _Atom:
    var: str
    shift: Polynomial
    factor: Polynomial
    is_chain: bool
    root: Optional[Fraction] = None


def _divisors(n: int):
    n = abs(n)
    out = set()
    d = 1
    while d * d <= n:
        if n % d == 0:
            out.add(d)
            out.add(n // d)
        d += 1
    return sorted(out)


def rational_linear_split(h: Polynomial, var: str):
    """Split a univariate polynomial into rational roots and a residual.

    Returns (constant, [(root, multiplicity), ...], residual) with
    h == constant * prod (var - root)^mult * residual and residual having
    no rational roots (residual is 1 when h splits completely).
    """
    vs = h.varset
    if h.is_zero():
        raise UsageError("cannot split the zero polynomial")
    extra = [v for v in h.variables_present() if v != var]
    if extra:
        raise UsageError(f"polynomial is not univariate in {var}: also involves {extra}")
    v = Polynomial.variable(vs, var)
    roots: list[tuple[Fraction, int]] = []
    work = h
    while work.degree_in(var) >= 1:
        coeffs = [c.constant_value() for c in work.univar_view(var)]
        densc = 1
        for c in coeffs:
            densc = densc * c.denominator // math.gcd(densc, c.denominator)
        ints = [int(c * densc) for c in coeffs]
        t = 0
        while ints[t] == 0:
            t += 1
        if t:
            roots.append((Fraction(0), t))
            work = work.exact_divide(v ** t)
            continue
        a0, ad = ints[0], ints[-1]
        found = None
        for p in _divisors(a0):
            for q in _divisors(ad):
                for cand in (Fraction(p, q), Fraction(-p, q)):
                    val = Fraction(0)
                    for c in reversed(coeffs):
                        val = val * cand + c
                    if val == 0:
                        found = cand
                        break
                if found is not None:
                    break
            if found is not None:
                break
        if found is None:
            break
        mult = 0
        factor = v - Polynomial.constant(vs, found)
        while factor.divides(work):
            work = work.exact_divide(factor)
            mult += 1
        roots.append((found, mult))
    if work.is_constant():
        constant = work.constant_value()
        residual = Polynomial.constant(vs, 1)
    else:
        _, lc = work.leading()
        constant = lc
        residual = work.monic()
    roots.sort(key=lambda rm: rm[0])
    return constant, roots, residual


def _invariant_factors(G: PolyMatrix) -> list:
    return list(polymat.theoretical_smith(G).factors)


def _atom_level(p: Polynomial, phis: list) -> Optional[int]:
    for j, phi in enumerate(phis):
        if p.divides(phi):
            return j
    return None


def _pick_atom(atoms: list, phis: list, vs: VarSet):
    """Next atom: smallest extraction level first; tail atoms before chain
    factors; chain factors latest-variable-first; tail roots ascending."""
    best = None
    for atom in atoms:
        lvl = _atom_level(atom.factor, phis)
        if lvl is None:
            continue
        if atom.is_chain:
            key = (lvl, 1, -vs.index(atom.var), Fraction(0))
        else:
            key = (lvl, 0, 0, atom.root)
        if best is None or key < best[0]:
            best = (key, atom, lvl)
    if best is None:
        return None
    return best[1], best[2]


# -- the orchestrator ------------------------------------------------------------------


def _conjugate_by_diag(cdiag: list, M: PolyMatrix) -> Optional[PolyMatrix]:
    """diag(cdiag) * M * diag(cdiag)^{-1} when it stays polynomial, else None."""
    n = M.rows
    out = []
    for i in range(n):
        for j in range(n):
            e = M[i, j]
            if e.is_zero():
                out.append(e)
                continue
            num = cdiag[i] * e
            try:
                out.append(num.exact_divide(cdiag[j]))
            except DivisibilityError:
                return None
    return PolyMatrix(n, n, out, M.varset)


def _diag_matrix(cdiag: list, vs: VarSet) -> PolyMatrix:
    return PolyMatrix.diagonal(list(cdiag))


def reduce_to_smith(F: PolyMatrix, shape: DetShape, degree_bound: int = 3) -> ReductionTrace:
    """Produce verified Smith-form witnesses for a qualifying square matrix.

    Chain and univariate shapes run the extraction/fold pipeline directly;
    the linear shape is conjugated through the automorphism z_i -> g_i,
    reduced as a chain, and mapped back.  The result carries (U, V, S)
    with U*F*V == S checked by verify_witness before success is declared.
    """
    trace = ReductionTrace(input=F)
    if isinstance(shape, UnsupportedShape):
        trace.failure = "unsupported-shape"
        trace.failure_detail = shape.reason or "unsupported determinant shape"
        return trace
    if not F.is_square() or rank(F) != F.rows:
        trace.failure = "unsupported-shape"
        trace.failure_detail = "witness construction handles square full-rank inputs only"
        return trace
    if isinstance(shape, LinearShape):
        return _reduce_linear(F, shape, degree_bound, trace)
    trace = _reduce_chain(F, shape, degree_bound, trace)
    if trace.failure in ("completion-not-found", "kernel-not-ZLP"):
        transposed = _reduce_chain(
            F.transpose(), shape, degree_bound, ReductionTrace(input=F.transpose())
        )
        if transposed.success:
            retry = ReductionTrace(input=F)
            U = transposed.v.transpose()
            V = transposed.u.transpose()
            retry.steps.append(
                TraceStep("reduce the transpose and transpose the witnesses back", U, V)
            )
            return _finalize_witnesses(F, retry, U * F * V, U, V)
    return trace


def _reduce_linear(F: PolyMatrix, shape: LinearShape, degree_bound: int, trace: ReductionTrace):
    vs = F.varset
    phi = build_automorphism(list(shape.forms), vs)
    Fi = apply_automorphism(phi, F, "inverse")
    from .criteria import detect_chain_shape

    inner_shape = detect_chain_shape(determinant(Fi))
    if not isinstance(inner_shape, ChainShape):
        trace.failure = "unsupported-shape"
        trace.failure_detail = "conjugated determinant did not become a chain"
        return trace
    inner = reduce_to_smith(Fi, inner_shape, degree_bound)
    if not inner.success:
        trace.failure = inner.failure
        trace.failure_detail = f"inner chain reduction failed: {inner.failure_detail}"
        return trace
    U = apply_automorphism(phi, inner.u, "forward")
    V = apply_automorphism(phi, inner.v, "forward")
    mapped = U * F * V
    trace.steps.append(
        TraceStep("conjugate through the linear-form automorphism and reduce", U, V)
    )
    return _finalize_witnesses(F, trace, mapped, U, V)


def _reduce_chain(F: PolyMatrix, shape: ChainShape | UnivariateDrShape, degree_bound: int, trace: ReductionTrace):
    vs = F.varset
    l = F.rows
    ident = PolyMatrix.identity(l, vs)

    if isinstance(shape, ChainShape):
        chain_factors = list(shape.factors)
        tail, tail_var = shape.tail, shape.tail_var
    else:
        chain_factors = []
        tail, tail_var = determinant(F), shape.var

    try:
        _, roots, residual = rational_linear_split(tail, tail_var)
    except UsageError as exc:
        trace.failure = "unsupported-shape"
        trace.failure_detail = str(exc)
        return trace
    if not residual.is_constant():
        trace.failure = "unsupported-shape"
        trace.failure_detail = (
            f"univariate tail has a non-linear rational-irreducible part ({residual}); "
            "the equivalence verdict stands but witnesses are out of scope"
        )
        return trace

    atoms = [
        _Atom(
            var=tail_var,
            shift=Polynomial.constant(vs, c),
            factor=Polynomial.variable(vs, tail_var) - Polynomial.constant(vs, c),
            is_chain=False,
            root=c,
        )
        for c, _mult in roots
    ]
    atoms.extend(
        _Atom(var=name, shift=f, factor=Polynomial.variable(vs, name) - f, is_chain=True)
        for name, f in chain_factors
    )

    target = polymat.theoretical_smith(F)
    S_target = target.as_matrix(vs)
    if F == S_target:
        trace.u = ident
        trace.v = ident
        trace.s = F
        return trace

    cdiag = [Polynomial.constant(vs, 1)] * l
    G = F
    guard = 0
    while not determinant(G).is_constant():
        guard += 1
        if guard > 200:
            raise InternalConsistencyError("extraction loop failed to terminate")
        phis = _invariant_factors(G)
        picked = _pick_atom(atoms, phis, vs)
        if picked is None:
            trace.failure = "unsupported-shape"
            trace.failure_detail = (
                "determinant still non-constant but no planned factor divides it"
            )
            return trace
        atom, level = picked
        try:
            G, cdiag = _extract_and_fold(trace, G, cdiag, atom, level, degree_bound)
        except ReductionFailure as exc:
            trace.failure = exc.marker
            trace.failure_detail = str(exc)
            return trace

    det_g = determinant(G)
    if not det_g.is_constant() or det_g.is_zero():
        raise InternalConsistencyError("residue after extraction is not unimodular")
    Ginv = inverse_unimodular(G)
    trace.steps.append(TraceStep("strip the unimodular right residue", ident, Ginv))

    current = _diag_matrix(cdiag, vs)
    U_total, V_total = _accumulate(trace, F)
    return _finalize_witnesses(F, trace, current, U_total, V_total)


def _extract_and_fold(trace, G, cdiag, atom, level, degree_bound):
    vs = G.varset
    l = G.rows
    ident = PolyMatrix.identity(l, vs)
    p = atom.factor
    k = level

    if k == 0:
        Gnext = G.map_entries(lambda e: e.exact_divide(p))
        trace.steps.append(
            TraceStep(f"divide out the common factor ({p}) from every entry", ident, ident)
        )
        return Gnext, [c * p for c in cdiag]

    F1 = G.substitute({atom.var: atom.shift})
    actual = rank(F1)
    if actual != k:
        raise InternalConsistencyError(
            f"substituted matrix has rank {actual}, expected level {k} for factor {p}"
        )
    W = left_kernel_fracfield(F1)
    if not is_zlp(W):
        raise ReductionFailure("kernel-not-ZLP", f"kernel basis for factor {p} is not ZLP")

    dmat = [Polynomial.constant(vs, 1)] * k + [p] * (l - k)
    cnew = [c * d for c, d in zip(cdiag, dmat)]

    fallback_U = None
    for U in completion_candidates(W, degree_bound):
        if fallback_U is None:
            fallback_U = U
        Uinv = inverse_unimodular(U)
        N = _conjugate_by_diag(cdiag, Uinv)
        if N is None:
            continue
        Ninv = inverse_unimodular(N)
        Gnext = _divide_extracted(U * G, p, k)
        trace.steps.append(
            TraceStep(f"extract ({p}) at level {k} and fold by conjugation", Ninv, ident)
        )
        return Gnext, cnew

    if fallback_U is None:
        raise ReductionFailure(
            "completion-not-found",
            f"no unimodular completion within degree {degree_bound} for factor {p}",
        )

    # last resort: elementary-operation refold of diag(c) * U^-1 * D
    U = fallback_U
    Uinv = inverse_unimodular(U)
    A = _diag_matrix(cdiag, vs) * Uinv * _diag_matrix(dmat, vs)
    try:
        ops, C = fold_diagonal(A)
    except ShapeError as exc:
        raise ReductionFailure(
            "completion-not-found",
            f"no completion folds for factor {p}: {exc}",
        ) from exc
    L, R = compose_ops(ops, l, vs)
    Gnext_raw = _divide_extracted(U * G, p, k)
    Gnext = inverse_unimodular(R) * Gnext_raw
    trace.steps.append(TraceStep(f"extract ({p}) at level {k} and refold by elementary ops", L, ident))
    return Gnext, [C[i, i] for i in range(l)]


def _accumulate(trace: ReductionTrace, F: PolyMatrix):
    vs = F.varset
    U = PolyMatrix.identity(F.rows, vs)
    V = PolyMatrix.identity(F.cols, vs)
    for step in trace.steps:
        U = step.left * U
        V = V * step.right
    return U, V


def _finalize_witnesses(F, trace, current, U_total, V_total):
    """Normalize the diagonal against the theoretical Smith form and verify."""
    vs = F.varset
    l = F.rows
    target = polymat.theoretical_smith(F)
    S = target.as_matrix(vs)
    scale = []
    for i in range(l):
        c = current[i, i]
        phi = S[i, i]
        if phi.is_zero() or c.is_zero():
            raise InternalConsistencyError("diagonal slot vanished unexpectedly")
        _, lc = c.leading()
        if phi * lc != c:
            raise InternalConsistencyError(
                f"folded diagonal slot {i} ({c}) is not associate to the invariant factor {phi}"
            )
        scale.append(Polynomial.constant(vs, Fraction(1) / lc))
    if any(s != Polynomial.constant(vs, 1) for s in scale):
        D = PolyMatrix.diagonal(scale)
        trace.steps.append(
            TraceStep("scale rows so every invariant factor is monic", D, PolyMatrix.identity(l, vs))
        )
        U_total = D * U_total
    if not verify_witness(F, U_total, V_total, S):
        raise InternalConsistencyError("assembled witnesses failed verification")
    trace.u = U_total
    trace.v = V_total
    trace.s = S
    return trace
