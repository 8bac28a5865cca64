"""Sparse exact multivariate polynomial arithmetic over the rationals.

Polynomials are dictionaries from exponent tuples to nonzero ``Fraction``
coefficients, all over a shared ordered variable set.  Everything is
immutable after construction and safe to share.

The multivariate GCD uses content/primitive-part recursion with a
subresultant pseudo-remainder sequence in the front variable, bottoming
out at univariate Euclid over Q in the last variable.  GCD results (and
everything derived from them, like determinantal divisors downstream)
are normalized to leading coefficient 1 under the global lexicographic
order so that results are unique representatives.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce as _reduce
from typing import Iterable, Mapping, Sequence

from .errors import DivisibilityError, ParseError, UsageError

Monomial = tuple  # exponent tuple, length == len(varset)


class VarSet:
    """An ordered set of distinct variable names; the order fixes variable roles."""

    __slots__ = ("names", "_index")

    def __init__(self, names: Sequence[str]):
        names = tuple(names)
        if not names:
            raise UsageError("a VarSet needs at least one variable")
        if len(set(names)) != len(names):
            raise UsageError(f"variable names must be distinct: {names}")
        if any(not n for n in names):
            raise UsageError("variable names must be nonempty")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UsageError(f"unknown variable {name!r} (have {self.names})") from None

    def __contains__(self, name):
        return name in self._index

    def __len__(self):
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __eq__(self, other):
        return isinstance(other, VarSet) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"VarSet({', '.join(self.names)})"


class MonomialOrder:
    """A multiplicative total well-order on exponent tuples.

    ``kind`` is ``'lex'`` or ``'degrevlex'``; ``perm`` lists variable indices
    by decreasing priority (default: declared order).
    """

    __slots__ = ("kind", "perm")

    def __init__(self, kind: str = "lex", perm: Sequence[int] | None = None):
        if kind not in ("lex", "degrevlex"):
            raise UsageError(f"unknown monomial order kind {kind!r}")
        self.kind = kind
        self.perm = tuple(perm) if perm is not None else None

    def key(self, mono: Monomial):
        """Sort key; max() under this key is the leading monomial."""
        if self.perm is not None:
            mono = tuple(mono[i] for i in self.perm)
        if self.kind == "lex":
            return mono
        # degrevlex: compare by total degree, then by the *last* differing
        # exponent being smaller.
        return (sum(mono), tuple(-e for e in reversed(mono)))

    def __eq__(self, other):
        return (
            isinstance(other, MonomialOrder)
            and self.kind == other.kind
            and self.perm == other.perm
        )

    def __hash__(self):
        return hash((self.kind, self.perm))

    def __repr__(self):
        return f"MonomialOrder({self.kind!r})"


LEX = MonomialOrder("lex")
DEGREVLEX = MonomialOrder("degrevlex")

_ZERO = Fraction(0)
_ONE = Fraction(1)


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def _mono_divides(a: Monomial, b: Monomial) -> bool:
    return all(x <= y for x, y in zip(a, b))


def _mono_div(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x - y for x, y in zip(a, b))


def _mono_lcm(a: Monomial, b: Monomial) -> Monomial:
    return tuple(max(x, y) for x, y in zip(a, b))


class Polynomial:
    """A multivariate polynomial with exact rational coefficients."""

    __slots__ = ("varset", "terms", "_lead_cache")

    def __init__(self, varset: VarSet, terms: Mapping[Monomial, Fraction] | None = None):
        self.varset = varset
        clean = {}
        if terms:
            n = len(varset)
            for mono, coeff in terms.items():
                if coeff:
                    if len(mono) != n:
                        raise UsageError("monomial length does not match the VarSet")
                    clean[mono] = Fraction(coeff)
        self.terms = clean
        self._lead_cache = {}

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, varset: VarSet) -> "Polynomial":
        return cls(varset)

    @classmethod
    def constant(cls, varset: VarSet, value) -> "Polynomial":
        value = Fraction(value)
        if not value:
            return cls(varset)
        return cls(varset, {(0,) * len(varset): value})

    @classmethod
    def variable(cls, varset: VarSet, name: str) -> "Polynomial":
        mono = [0] * len(varset)
        mono[varset.index(name)] = 1
        return cls(varset, {tuple(mono): _ONE})

    # -- basic queries -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and not any(next(iter(self.terms))))

    def constant_value(self) -> Fraction:
        if not self.terms:
            return _ZERO
        if not self.is_constant():
            raise UsageError("polynomial is not constant")
        return next(iter(self.terms.values()))

    def total_degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(m) for m in self.terms)

    def degree_in(self, var: str) -> int:
        if not self.terms:
            return -1
        i = self.varset.index(var)
        return max(m[i] for m in self.terms)

    def variables_present(self) -> tuple[str, ...]:
        if not self.terms:
            return ()
        present = [False] * len(self.varset)
        for m in self.terms:
            for i, e in enumerate(m):
                if e:
                    present[i] = True
        return tuple(n for i, n in enumerate(self.varset.names) if present[i])

    def leading(self, order: MonomialOrder = LEX) -> tuple[Monomial, Fraction]:
        """Leading (monomial, coefficient) under `order`; error on zero."""
        if not self.terms:
            raise UsageError("the zero polynomial has no leading term")
        cached = self._lead_cache.get(order.kind if order.perm is None else order)
        if cached is None:
            cached = max(self.terms, key=order.key)
            self._lead_cache[order.kind if order.perm is None else order] = cached
        return cached, self.terms[cached]

    def sorted_terms(self, order: MonomialOrder = LEX):
        """Terms as (monomial, coefficient) pairs in strictly decreasing order."""
        return [(m, self.terms[m]) for m in sorted(self.terms, key=order.key, reverse=True)]

    # -- ring operations ---------------------------------------------------

    def _check_same_ring(self, other: "Polynomial"):
        if self.varset != other.varset:
            raise UsageError("polynomials live over different VarSets")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.varset, other)
        self._check_same_ring(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, _ZERO) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return Polynomial(self.varset, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.varset, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.varset, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Fraction(other)
            if not other:
                return Polynomial(self.varset)
            return Polynomial(self.varset, {m: c * other for m, c in self.terms.items()})
        self._check_same_ring(other)
        if not self.terms or not other.terms:
            return Polynomial(self.varset)
        # iterate over the smaller operand
        a, b = (self.terms, other.terms) if len(self.terms) <= len(other.terms) else (other.terms, self.terms)
        out: dict = {}
        for ma, ca in a.items():
            for mb, cb in b.items():
                m = _mono_mul(ma, mb)
                s = out.get(m, _ZERO) + ca * cb
                if s:
                    out[m] = s
                else:
                    del out[m]
        return Polynomial(self.varset, out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise UsageError("negative powers are not polynomials")
        result = Polynomial.constant(self.varset, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.varset, other)
        return (
            isinstance(other, Polynomial)
            and self.varset == other.varset
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((self.varset, frozenset(self.terms.items())))

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return poly_to_text(self)

    # -- division ----------------------------------------------------------

    def divrem(self, divisors: Sequence["Polynomial"], order: MonomialOrder = LEX):
        """Multivariate division: self = sum(q_i * divisors_i) + r.

        No monomial of the remainder is divisible by any divisor's leading
        monomial.
        """
        if not divisors:
            raise UsageError("divrem needs at least one divisor")
        for d in divisors:
            self._check_same_ring(d)
            if d.is_zero():
                raise UsageError("divrem divisors must be nonzero")
        leads = [d.leading(order) for d in divisors]
        quots = [dict() for _ in divisors]
        rem: dict = {}
        work = dict(self.terms)
        while work:
            m = max(work, key=order.key)
            c = work[m]
            for i, (lm, lc) in enumerate(leads):
                if _mono_divides(lm, m):
                    qm = _mono_div(m, lm)
                    qc = c / lc
                    q = quots[i]
                    s = q.get(qm, _ZERO) + qc
                    if s:
                        q[qm] = s
                    else:
                        q.pop(qm, None)
                    for dm, dc in divisors[i].terms.items():
                        t = _mono_mul(qm, dm)
                        s = work.get(t, _ZERO) - qc * dc
                        if s:
                            work[t] = s
                        else:
                            work.pop(t, None)
                    break
            else:
                rem[m] = c
                del work[m]
        vs = self.varset
        return [Polynomial(vs, q) for q in quots], Polynomial(vs, rem)

    def exact_divide(self, divisor: "Polynomial") -> "Polynomial":
        """Return q with q * divisor == self; raise DivisibilityError otherwise."""
        if isinstance(divisor, (int, Fraction)):
            divisor = Polynomial.constant(self.varset, divisor)
        if divisor.is_zero():
            raise UsageError("division by the zero polynomial")
        if self.is_zero():
            return Polynomial(self.varset)
        (q,), r = self.divrem([divisor])
        if not r.is_zero():
            raise DivisibilityError(f"({self}) is not divisible by ({divisor})")
        return q

    def divides(self, other: "Polynomial") -> bool:
        if self.is_zero():
            return other.is_zero()
        if other.is_zero():
            return True
        _, r = other.divrem([self])
        return r.is_zero()

    # -- views and maps ------------------------------------------------------

    def univar_view(self, var: str) -> list["Polynomial"]:
        """Coefficients c_0..c_d with self == sum c_i * var**i, c_i free of var."""
        i = self.varset.index(var)
        if not self.terms:
            return [Polynomial(self.varset)]
        d = max(m[i] for m in self.terms)
        buckets: list[dict] = [dict() for _ in range(d + 1)]
        for m, c in self.terms.items():
            stripped = m[:i] + (0,) + m[i + 1:]
            buckets[m[i]][stripped] = c
        return [Polynomial(self.varset, b) for b in buckets]

    def substitute(self, assignments: Mapping[str, "Polynomial"]) -> "Polynomial":
        """Ring-homomorphic image; unassigned variables map to themselves."""
        vs = self.varset
        for name in assignments:
            vs.index(name)  # raises UsageError on unknown variables
        images = {}
        for name, img in assignments.items():
            if isinstance(img, (int, Fraction)):
                img = Polynomial.constant(vs, img)
            if img.varset != vs:
                raise UsageError("substitution images must share the VarSet")
            images[vs.index(name)] = img
        if not images:
            return self
        result = Polynomial(vs)
        pow_cache: dict = {}
        for m, c in self.terms.items():
            fixed = tuple(0 if i in images else e for i, e in enumerate(m))
            part = Polynomial(vs, {fixed: c})
            for i, img in images.items():
                e = m[i]
                if e:
                    key = (i, e)
                    p = pow_cache.get(key)
                    if p is None:
                        p = img ** e
                        pow_cache[key] = p
                    part = part * p
            result = result + part
        return result

    def evaluate(self, point: Sequence) -> Fraction:
        """Exact value at a rational point (one coordinate per variable)."""
        if len(point) != len(self.varset):
            raise UsageError("point length must match the VarSet size")
        point = [Fraction(x) for x in point]
        total = _ZERO
        for m, c in self.terms.items():
            v = c
            for x, e in zip(point, m):
                if e:
                    v *= x ** e
            total += v
        return total

    # -- normalization -------------------------------------------------------

    def monic(self, order: MonomialOrder = LEX) -> "Polynomial":
        """Scale so the leading coefficient under `order` is 1 (zero stays zero)."""
        if not self.terms:
            return self
        _, lc = self.leading(order)
        if lc == 1:
            return self
        return self * (_ONE / lc)

    def integer_primitive(self) -> "Polynomial":
        """Scale by a positive rational so coefficients are coprime integers."""
        if not self.terms:
            return self
        num_gcd = 0
        den_lcm = 1
        for c in self.terms.values():
            num_gcd = math.gcd(num_gcd, abs(c.numerator))
            den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
        factor = Fraction(den_lcm, num_gcd)
        if factor == 1:
            return self
        return self * factor


# -- multivariate GCD --------------------------------------------------------


def _coeffs_in(p: Polynomial, idx: int) -> list[Polynomial]:
    """Coefficient polynomials of p seen as univariate in variable index idx."""
    return p.univar_view(p.varset.names[idx])


def _from_coeffs(coeffs: list[Polynomial], idx: int, vs: VarSet) -> Polynomial:
    out: dict = {}
    for e, c in enumerate(coeffs):
        for m, v in c.terms.items():
            mm = m[:idx] + (e,) + m[idx + 1:]
            out[mm] = v
    return Polynomial(vs, out)


def _deg(p: Polynomial, idx: int) -> int:
    return p.degree_in(p.varset.names[idx])


def _lc_in(p: Polynomial, idx: int) -> Polynomial:
    return _coeffs_in(p, idx)[-1]


def _pseudo_rem(a: Polynomial, b: Polynomial, idx: int) -> Polynomial:
    """prem(a, b) in variable idx: lc(b)^(da-db+1) * a  mod  b."""
    da, db = _deg(a, idx), _deg(b, idx)
    lcb = _lc_in(b, idx)
    vs = a.varset
    v = Polynomial.variable(vs, vs.names[idx])
    r = a
    scale = da - db + 1
    while not r.is_zero() and _deg(r, idx) >= db:
        lcr = _lc_in(r, idx)
        r = r * lcb - lcr * (v ** (_deg(r, idx) - db)) * b
        scale -= 1
    if scale > 0:
        r = r * (lcb ** scale)
    return r


def _content(p: Polynomial, idx: int) -> Polynomial:
    coeffs = [c for c in _coeffs_in(p, idx) if not c.is_zero()]
    return gcd_list(coeffs)


def _gcd_univar_q(p: Polynomial, q: Polynomial, idx: int) -> Polynomial:
    """Euclidean GCD for polynomials univariate in variable idx over Q."""
    a, b = p, q
    while not b.is_zero():
        _, r = a.divrem([b])
        a, b = b, r
    return a


def _first_active_var(p: Polynomial, q: Polynomial) -> int | None:
    n = len(p.varset)
    for i in range(n):
        name = p.varset.names[i]
        if p.degree_in(name) > 0 or q.degree_in(name) > 0:
            return i
    return None


def gcd(p: Polynomial, q: Polynomial) -> Polynomial:
    """Greatest common divisor, normalized to leading coefficient 1 (lex).

    gcd(p, 0) is p normalized; gcd(0, 0) is 0.
    """
    if isinstance(p, Polynomial) and isinstance(q, Polynomial):
        p._check_same_ring(q)
    if p.is_zero() and q.is_zero():
        return Polynomial(p.varset)
    if p.is_zero():
        return q.monic()
    if q.is_zero():
        return p.monic()
    g = _gcd_inner(p, q)
    return g.monic()


def _gcd_inner(p: Polynomial, q: Polynomial) -> Polynomial:
    if p.is_constant() or q.is_constant():
        return Polynomial.constant(p.varset, 1)
    idx = _first_active_var(p, q)
    if idx is None:
        return Polynomial.constant(p.varset, 1)
    name = p.varset.names[idx]
    if p.degree_in(name) == 0 or q.degree_in(name) == 0:
        # one input is free of the front variable: gcd divides its content side
        free, other = (p, q) if p.degree_in(name) == 0 else (q, p)
        return _gcd_inner(free, _content(other, idx))
    # single-variable case: everything else is constant
    rest_active = False
    for j in range(len(p.varset)):
        if j != idx and (p.degree_in(p.varset.names[j]) > 0 or q.degree_in(q.varset.names[j]) > 0):
            rest_active = True
            break
    if not rest_active:
        return _gcd_univar_q(p, q, idx)

    cp, cq = _content(p, idx), _content(q, idx)
    pp, qq = p.exact_divide(cp), q.exact_divide(cq)
    cont = _gcd_inner(cp, cq)

    # subresultant PRS on the primitive parts in variable idx
    a, b = (pp, qq) if _deg(pp, idx) >= _deg(qq, idx) else (qq, pp)
    one = Polynomial.constant(p.varset, 1)
    g_, h_ = one, one
    while True:
        delta = _deg(a, idx) - _deg(b, idx)
        r = _pseudo_rem(a, b, idx)
        if r.is_zero():
            break
        if _deg(r, idx) == 0:
            b = one
            break
        divisor = g_ * (h_ ** delta)
        a, b = b, r.exact_divide(divisor)
        g_ = _lc_in(a, idx)
        if delta == 0:
            h_ = h_  # unchanged
        elif delta == 1:
            h_ = g_
        else:
            h_ = (g_ ** delta).exact_divide(h_ ** (delta - 1))
    if _deg(b, idx) == 0:
        return cont
    prim = b.exact_divide(_content(b, idx))
    return cont * prim


def gcd_list(polys: Iterable[Polynomial]) -> Polynomial:
    """Fold gcd over a sequence; early exit once the gcd is a constant."""
    polys = list(polys)
    if not polys:
        raise UsageError("gcd_list needs at least one polynomial")
    acc = None
    for p in polys:
        acc = p.monic() if acc is None else gcd(acc, p)
        if acc.is_constant() and not acc.is_zero():
            return Polynomial.constant(acc.varset, 1)
    return acc


# -- text grammar -------------------------------------------------------------
#
#   expr   := ['+'|'-'] term (('+'|'-') term)*
#   term   := factor ('*' factor)*
#   factor := base ['^' NAT]
#   base   := NAT ['/' NAT] | IDENT | '(' expr ')'
#
# Implicit multiplication is disallowed; '^' takes a nonnegative integer
# literal; whitespace is insignificant.


class _Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(_Token("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch in "+-*/^()":
            tokens.append(_Token(ch, ch, line, col))
            col += 1
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("end", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens, varset: VarSet):
        self.tokens = tokens
        self.pos = 0
        self.vs = varset

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.col)
        return tok

    def parse_expr(self) -> Polynomial:
        sign = 1
        tok = self.peek()
        if tok.kind in ("+", "-"):
            self.next()
            sign = -1 if tok.kind == "-" else 1
        result = self.parse_term() * sign
        while True:
            tok = self.peek()
            if tok.kind == "+":
                self.next()
                result = result + self.parse_term()
            elif tok.kind == "-":
                self.next()
                result = result - self.parse_term()
            else:
                return result

    def parse_term(self) -> Polynomial:
        result = self.parse_factor()
        while self.peek().kind == "*":
            self.next()
            result = result * self.parse_factor()
        return result

    def parse_factor(self) -> Polynomial:
        base = self.parse_base()
        if self.peek().kind == "^":
            caret = self.next()
            tok = self.peek()
            if tok.kind != "int":
                raise ParseError(
                    f"exponent must be a nonnegative integer literal, found {tok.text!r}",
                    tok.line,
                    tok.col,
                )
            self.next()
            return base ** int(tok.text)
        return base

    def parse_base(self) -> Polynomial:
        tok = self.next()
        if tok.kind == "int":
            num = int(tok.text)
            if self.peek().kind == "/":
                self.next()
                den_tok = self.peek()
                if den_tok.kind != "int":
                    raise ParseError(
                        f"expected integer denominator, found {den_tok.text!r}",
                        den_tok.line,
                        den_tok.col,
                    )
                self.next()
                den = int(den_tok.text)
                if den == 0:
                    raise ParseError("zero denominator", den_tok.line, den_tok.col)
                return Polynomial.constant(self.vs, Fraction(num, den))
            return Polynomial.constant(self.vs, num)
        if tok.kind == "ident":
            if tok.text not in self.vs:
                raise ParseError(f"unknown variable {tok.text!r}", tok.line, tok.col)
            return Polynomial.variable(self.vs, tok.text)
        if tok.kind == "(":
            inner = self.parse_expr()
            self.expect(")")
            return inner
        raise ParseError(f"unexpected token {tok.text!r}", tok.line, tok.col)


def parse_polynomial(text: str, varset: VarSet) -> Polynomial:
    """Parse `text` against the polynomial grammar over `varset`."""
    parser = _Parser(_tokenize(text), varset)
    result = parser.parse_expr()
    tok = parser.peek()
    if tok.kind != "end":
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return result


def poly_to_text(p: Polynomial) -> str:
    """Render in the same grammar parse_polynomial accepts (lex term order)."""
    if p.is_zero():
        return "0"
    parts = []
    for mono, coeff in p.sorted_terms(LEX):
        factors = []
        for name, e in zip(p.varset.names, mono):
            if e == 1:
                factors.append(name)
            elif e > 1:
                factors.append(f"{name}^{e}")
        mag = abs(coeff)
        if not factors or mag != 1:
            factors.insert(0, str(mag))
        body = "*".join(factors)
        if not parts:
            parts.append(body if coeff > 0 else f"-{body}")
        else:
            parts.append(f"+ {body}" if coeff > 0 else f"- {body}")
    return " ".join(parts)
