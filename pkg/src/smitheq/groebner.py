"""Reduced Groebner bases via Buchberger's algorithm.

This is the computational test behind every "the reduced minors generate
the unit ideal" question: an ideal is the whole ring exactly when its
reduced basis is {1}.

Pair selection is normal strategy (smallest lcm of leading monomials
first) with Buchberger's first (coprime leads) and second (chain) pair
criteria.  Intermediate polynomials are made integer-primitive after
each reduction to keep rational arithmetic bounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import UsageError
from .polyring import (
    LEX,
    MonomialOrder,
    Polynomial,
    _mono_div,
    _mono_divides,
    _mono_lcm,
    _mono_mul,
)


@dataclass(frozen=True)
class IdealGens:
    """Generators of an ideal; zero generators are dropped at construction."""

    generators: tuple

    def __init__(self, generators: Sequence[Polynomial]):
        gens = tuple(g for g in generators if not g.is_zero())
        if not gens:
            raise UsageError("the zero ideal is not representable here; pass a nonzero generator")
        vs = gens[0].varset
        for g in gens[1:]:
            if g.varset != vs:
                raise UsageError("ideal generators must share a VarSet")
        object.__setattr__(self, "generators", gens)

    @property
    def varset(self):
        return self.generators[0].varset


@dataclass(frozen=True)
class ReducedGB:
    """The unique reduced Groebner basis of an ideal under `order`.

    Every element is monic, no monomial of one element is divisible by the
    leading monomial of another, and elements are sorted by decreasing
    leading monomial.
    """

    basis: tuple
    order: MonomialOrder

    def is_unit(self) -> bool:
        return len(self.basis) == 1 and self.basis[0].is_constant()


def s_polynomial(f: Polynomial, g: Polynomial, order: MonomialOrder) -> Polynomial:
    mf, cf = f.leading(order)
    mg, cg = g.leading(order)
    lcm = _mono_lcm(mf, mg)
    vs = f.varset
    tf = Polynomial(vs, {_mono_div(lcm, mf): 1 / cf})
    tg = Polynomial(vs, {_mono_div(lcm, mg): 1 / cg})
    return tf * f - tg * g


def _reduce_full(p: Polynomial, basis: list, order: MonomialOrder) -> Polynomial:
    """Full normal form of p modulo basis (tail reduction included)."""
    if not basis:
        return p
    _, r = p.divrem(basis, order)
    return r


def buchberger_reduced(gens: IdealGens, order: MonomialOrder = LEX) -> ReducedGB:
    """Compute the reduced Groebner basis of the ideal generated by `gens`."""
    basis: list[Polynomial] = []
    for g in gens.generators:
        r = _reduce_full(g, basis, order).integer_primitive()
        if not r.is_zero():
            basis.append(r)
            if r.is_constant():
                return _finalize([r], order, gens.varset)

    pairs = {(i, j) for i in range(len(basis)) for j in range(i)}

    def lead(i):
        return basis[i].leading(order)[0]

    while pairs:
        # normal selection: smallest lcm of the leading monomials first
        i, j = min(pairs, key=lambda ij: (order.key(_mono_lcm(lead(ij[0]), lead(ij[1]))), ij))
        pairs.discard((i, j))
        li, lj = lead(i), lead(j)
        lcm = _mono_lcm(li, lj)
        # first criterion: coprime leading monomials reduce to zero
        if lcm == _mono_mul(li, lj):
            continue
        # second (chain) criterion: some k with lead(k) | lcm and both
        # pairs (i,k), (j,k) already handled
        skip = False
        for k in range(len(basis)):
            if k in (i, j):
                continue
            if _mono_divides(lead(k), lcm):
                pik = (max(i, k), min(i, k))
                pjk = (max(j, k), min(j, k))
                if pik not in pairs and pjk not in pairs:
                    skip = True
                    break
        if skip:
            continue
        s = s_polynomial(basis[i], basis[j], order)
        r = _reduce_full(s, basis, order).integer_primitive()
        if r.is_zero():
            continue
        if r.is_constant():
            return _finalize([r], order, gens.varset)
        basis.append(r)
        t = len(basis) - 1
        for k in range(t):
            pairs.add((t, k))

    return _finalize(basis, order, gens.varset)


def _finalize(basis: list, order: MonomialOrder, vs) -> ReducedGB:
    """Interreduce: minimal basis, then full tail reduction, then sort."""
    if any(b.is_constant() and not b.is_zero() for b in basis):
        one = Polynomial.constant(vs, 1)
        return ReducedGB(basis=(one,), order=order)
    # minimal: drop elements whose lead is divisible by another's lead
    basis = sorted(basis, key=lambda p: order.key(p.leading(order)[0]))
    minimal: list[Polynomial] = []
    for p in basis:
        lm = p.leading(order)[0]
        if not any(_mono_divides(q.leading(order)[0], lm) for q in minimal):
            minimal.append(p)
    # reduced: each element fully reduced against the others, monic
    reduced: list[Polynomial] = []
    for i, p in enumerate(minimal):
        others = minimal[:i] + minimal[i + 1:]
        r = _reduce_full(p, others, order) if others else p
        reduced.append(r.monic(order))
    reduced.sort(key=lambda p: order.key(p.leading(order)[0]), reverse=True)
    return ReducedGB(basis=tuple(reduced), order=order)


def normal_form(p: Polynomial, gb: ReducedGB) -> Polynomial:
    """Remainder of p under full division by the basis; zero iff p is in the ideal."""
    if gb.basis and p.varset != gb.basis[0].varset:
        raise UsageError("polynomial and basis live over different VarSets")
    return _reduce_full(p, list(gb.basis), gb.order)


def is_unit_ideal(gens: IdealGens | Sequence[Polynomial], order: MonomialOrder = LEX) -> bool:
    """True iff the generated ideal is the whole ring (reduced basis {1})."""
    if not isinstance(gens, IdealGens):
        gens = IdealGens(gens)
    # cheap exit: a nonzero constant generator settles it
    if any(g.is_constant() for g in gens.generators):
        return True
    return buchberger_reduced(gens, order).is_unit()
