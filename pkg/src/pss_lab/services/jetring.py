"""
Jet-space differential algebra for Pseudospherical Lab

Exact differential polynomials and rational functions in the jet variables
u(i, j), the exponential symbol E (standing for e^x) and the pseudo-potential
g. Coefficients live in Q[mu, s] reduced modulo s^2 = 1 + mu^2, with the free
constants beta, C_strip and c admitted as extra symbols.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Tuple, Union

from sympy.polys.domains import QQ
from sympy.polys.orderings import lex
from sympy.polys.rings import PolyElement, ring

from ..config import settings
from ..errors import JetOrderError, MissingRuleError, ParameterError, UnboundSymbolError

logger = logging.getLogger(__name__)

# Generator order matters: s leads the lex order so s^2 is the leading term
# of the defining relation and `rem` reduces every s-degree to at most one.
PARAMETER_NAMES = ("s", "mu", "beta", "C_strip", "c")
PSEUDO_POTENTIAL = "g"
EXPONENTIAL = "exp_x"
DIRECTIONS = ("x", "t")
RULESETS = ("pde", "flow")

Number = Union[int, Fraction, float]


def jet_name(i: int, j: int = 0) -> str:
    """Plain-text name of u(i, j): u, u_x, u_xx, u_t, u_xt, ..."""
    if i == 0 and j == 0:
        return "u"
    return "u_" + "x" * i + "t" * j


class JetRing:
    """Polynomial ring carrying every symbolic computation"""

    def __init__(self, max_order: int = settings.max_jet_order):
        self.max_order = max_order
        names = list(PARAMETER_NAMES) + [PSEUDO_POTENTIAL, EXPONENTIAL]
        self._jet_index: Dict[Tuple[int, int], int] = {}
        for i in range(max_order + 1):
            for j in (0, 1):
                self._jet_index[(i, j)] = len(names)
                names.append(jet_name(i, j))

        self.names = tuple(names)
        self.ring, *gens = ring(",".join(names), QQ, lex)
        self.gens = tuple(gens)
        self.by_name = dict(zip(names, gens))
        self.index_of = {name: idx for idx, name in enumerate(names)}
        self.jet_of_index = {idx: key for key, idx in self._jet_index.items()}
        self.relation = self.by_name["s"] ** 2 - self.by_name["mu"] ** 2 - 1
        self.display = {name: name for name in names}
        self.display[EXPONENTIAL] = "E"

    def u(self, i: int = 0, j: int = 0) -> PolyElement:
        if j not in (0, 1):
            raise JetOrderError(f"t-order {j} is not supported (only j <= 1)")
        if i < 0 or i > self.max_order:
            raise JetOrderError(f"x-order {i} outside 0..{self.max_order}")
        return self.gens[self._jet_index[(i, j)]]

    def reduce_params(self, p: PolyElement) -> PolyElement:
        return p.rem(self.relation)

    def kind(self, index: int) -> str:
        name = self.names[index]
        if name in PARAMETER_NAMES:
            return "param"
        if name == PSEUDO_POTENTIAL:
            return "g"
        if name == EXPONENTIAL:
            return "E"
        return "jet"

    def lookup(self, name: str) -> int:
        if name == "E":
            name = EXPONENTIAL
        try:
            return self.index_of[name]
        except KeyError:
            raise ParameterError(f"Unknown symbol '{name}'") from None


# Global ring instance
jet_ring = JetRing()


def _ground(value) -> object:
    if isinstance(value, Fraction):
        return QQ(value.numerator, value.denominator)
    if isinstance(value, int):
        return QQ(value)
    raise TypeError(f"Exact coefficient expected, got {type(value).__name__}")


def _to_fraction(coeff) -> Fraction:
    return Fraction(int(coeff.numerator), int(coeff.denominator))


def _product(factors: Mapping[PolyElement, int]) -> PolyElement:
    result = jet_ring.ring.one
    for f, k in factors.items():
        if k:
            result = result * f ** k
    return result


def _split_denominator(p: PolyElement):
    """Split a denominator into (constant, {monic factor: exponent})"""
    p = jet_ring.reduce_params(p)
    if not p:
        raise ZeroDivisionError("zero denominator")

    factors: Dict[PolyElement, int] = {}
    monoms = p.monoms()
    common = tuple(min(m[idx] for m in monoms) for idx in range(len(jet_ring.gens)))
    if any(common):
        p = p.exquo(jet_ring.ring.term_new(common, QQ.one))
        for idx, k in enumerate(common):
            if k:
                factors[jet_ring.gens[idx]] = k

    if p.is_ground:
        return p.LC, factors
    lc = p.LC
    monic = p.monic()
    factors[monic] = factors.get(monic, 0) + 1
    return lc, factors


def _build(num: PolyElement, factors: Mapping[PolyElement, int]) -> "DiffExpr":
    """Canonical representative: reduced numerator, cancelled factors"""
    num = jet_ring.reduce_params(num)
    if not num:
        return DiffExpr(jet_ring.ring.zero)

    kept: Dict[PolyElement, int] = {}
    for f, k in factors.items():
        while k > 0:
            q, r = num.div(f)
            if r:
                break
            num = q
            k -= 1
        if k:
            kept[f] = k

    den = tuple(sorted(kept.items(), key=lambda item: str(item[0])))
    return DiffExpr(num, den)


@dataclass(frozen=True, eq=False)
class DiffExpr:
    """Differential polynomial, or rational function with a factored denominator"""

    num: PolyElement
    den: Tuple[Tuple[PolyElement, int], ...] = ()

    __hash__ = None

    @staticmethod
    def from_poly(p: PolyElement) -> "DiffExpr":
        return _build(p, {})

    @staticmethod
    def constant(value) -> "DiffExpr":
        return DiffExpr(jet_ring.ring.ground_new(_ground(value)))

    @property
    def is_zero(self) -> bool:
        return not self.num

    @property
    def is_polynomial(self) -> bool:
        return not self.den

    def denominator(self) -> PolyElement:
        return _product(dict(self.den))

    def symbols(self) -> set:
        """Names of the generators this expression depends on"""
        polys = [self.num] + [f for f, _ in self.den]
        found = set()
        for p in polys:
            for monom in p.itermonoms():
                for idx, k in enumerate(monom):
                    if k:
                        found.add(jet_ring.names[idx])
        return found

    # -- arithmetic -------------------------------------------------------

    @staticmethod
    def _coerce(other) -> Optional["DiffExpr"]:
        if isinstance(other, DiffExpr):
            return other
        if isinstance(other, PolyElement):
            return DiffExpr.from_poly(other)
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            return DiffExpr.constant(other)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if not self.den and not other.den:
            return _build(self.num + other.num, {})
        fa, fb = dict(self.den), dict(other.den)
        common = {f: max(fa.get(f, 0), fb.get(f, 0)) for f in set(fa) | set(fb)}
        na = self.num * _product({f: k - fa.get(f, 0) for f, k in common.items()})
        nb = other.num * _product({f: k - fb.get(f, 0) for f, k in common.items()})
        return _build(na + nb, common)

    __radd__ = __add__

    def __neg__(self):
        return DiffExpr(-self.num, self.den)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        merged = dict(self.den)
        for f, k in other.den:
            merged[f] = merged.get(f, 0) + k
        return _build(self.num * other.num, merged)

    __rmul__ = __mul__

    def reciprocal(self) -> "DiffExpr":
        if not self.num:
            raise ZeroDivisionError("reciprocal of zero")
        lc, factors = _split_denominator(self.num)
        return _build(self.denominator().quo_ground(lc), factors)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other * self.reciprocal()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.reciprocal() ** (-n)
        if n == 0:
            return DiffExpr.constant(1)
        return _build(self.num ** n, {f: k * n for f, k in self.den})

    def __eq__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return (self - other).is_zero

    def __repr__(self) -> str:
        return f"DiffExpr({render(self)})"


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def const(value) -> DiffExpr:
    return DiffExpr.constant(value)


def u(i: int = 0, j: int = 0) -> DiffExpr:
    return DiffExpr(jet_ring.u(i, j))


def symbol(name: str) -> DiffExpr:
    return DiffExpr(jet_ring.gens[jet_ring.lookup(name)])


def exp_x() -> DiffExpr:
    return symbol(EXPONENTIAL)


def pseudo_potential() -> DiffExpr:
    return symbol(PSEUDO_POTENTIAL)


def eta(eps: int = 1) -> DiffExpr:
    """eta = mu + eps*s"""
    _check_sign(eps)
    return symbol("mu") + symbol("s") * eps


def eta_inv(eps: int = 1) -> DiffExpr:
    """Exact inverse of eta: eps*s - mu"""
    _check_sign(eps)
    return symbol("s") * eps - symbol("mu")


def normalize(e: DiffExpr) -> DiffExpr:
    """Canonical representative of e; raises ZeroDivisionError on a zero denominator"""
    num = e.num
    factors: Dict[PolyElement, int] = {}
    for f, k in e.den:
        lc, split = _split_denominator(f)
        num = num.quo_ground(lc ** k)
        for g, j in split.items():
            factors[g] = factors.get(g, 0) + j * k
    return _build(num, factors)


def is_param_scalar(e: DiffExpr) -> bool:
    """True when e only involves the parameter symbols"""
    return e.symbols() <= set(PARAMETER_NAMES)


def _check_sign(eps: int) -> None:
    if eps not in (1, -1):
        raise ParameterError(f"Branch sign must be +1 or -1, got {eps}")


@lru_cache(maxsize=None)
def phi() -> DiffExpr:
    """phi = u^2 u_xx - 2 u^2 u_x + u u_x^2"""
    u0, u1, u2 = jet_ring.u(0), jet_ring.u(1), jet_ring.u(2)
    return DiffExpr(u0 ** 2 * u2 - 2 * u0 ** 2 * u1 + u0 * u1 ** 2)


@lru_cache(maxsize=None)
def pde_rhs() -> DiffExpr:
    """Right side F of u_t - u_xxt = F"""
    u0, u1, u2, u3 = (jet_ring.u(i) for i in range(4))
    return DiffExpr(
        u0 ** 2 * u3 - u0 ** 2 * u2 - 3 * u0 * u1 ** 2 - 2 * u0 ** 2 * u1
        + 4 * u0 * u1 * u2 + u1 ** 3
    )


@lru_cache(maxsize=None)
def pde_residual() -> DiffExpr:
    """u_t - u_xxt - F"""
    return u(0, 1) - u(2, 1) - pde_rhs()


# ---------------------------------------------------------------------------
# Derivations
# ---------------------------------------------------------------------------

Rules = Optional[Mapping[str, DiffExpr]]


def _generator_derivative(index: int, direction: str, rules: Rules) -> Optional[DiffExpr]:
    kind = jet_ring.kind(index)
    if kind == "param":
        return None
    if kind == "E":
        return DiffExpr(jet_ring.gens[index]) if direction == "x" else None
    if kind == "g":
        if not rules or direction not in rules:
            raise MissingRuleError(f"D_{direction} g needs a substitution rule")
        return rules[direction]

    i, j = jet_ring.jet_of_index[index]
    if direction == "x":
        return DiffExpr(jet_ring.u(i + 1, j))
    if j == 1:
        raise JetOrderError(f"second t-derivative of {jet_name(i, j)} requested")
    return DiffExpr(jet_ring.u(i, 1))


def _poly_total_derivative(p: PolyElement, direction: str, rules: Rules) -> DiffExpr:
    poly_part = jet_ring.ring.zero
    rational_part: Optional[DiffExpr] = None
    for index, degree in enumerate(p.degrees()):
        if degree <= 0:
            continue
        dv = _generator_derivative(index, direction, rules)
        if dv is None:
            continue
        partial = p.diff(jet_ring.gens[index])
        if dv.is_polynomial:
            poly_part = poly_part + partial * dv.num
        else:
            term = DiffExpr(partial) * dv
            rational_part = term if rational_part is None else rational_part + term
    result = DiffExpr.from_poly(poly_part)
    return result if rational_part is None else result + rational_part


def _apply_derivation(e: DiffExpr, derive_poly) -> DiffExpr:
    """Extend a polynomial derivation to rationals (quotient rule)"""
    d_num = derive_poly(e.num)
    if not e.den:
        return d_num
    inverse_q = _build(jet_ring.ring.one, dict(e.den))
    result = d_num * inverse_q
    for f, k in e.den:
        df = derive_poly(f)
        if df.is_zero:
            continue
        result = result - DiffExpr(e.num * k) * df * inverse_q / DiffExpr(f)
    return result


def total_derivative(e: DiffExpr, direction: str, rules: Rules = None) -> DiffExpr:
    """
    Total derivative D_x or D_t of a jet expression

    Args:
        e: Expression to differentiate
        direction: "x" or "t"
        rules: Values of g_x / g_t keyed by direction, required when e holds g

    Returns:
        The derivative as a DiffExpr
    """
    if direction not in DIRECTIONS:
        raise ParameterError(f"Direction must be one of {DIRECTIONS}, got '{direction}'")
    return _apply_derivation(e, lambda p: _poly_total_derivative(p, direction, rules))


def dx(e: DiffExpr, times: int = 1) -> DiffExpr:
    for _ in range(times):
        e = total_derivative(e, "x")
    return e


def dt(e: DiffExpr, rules: Rules = None) -> DiffExpr:
    return total_derivative(e, "t", rules)


def partial(e: DiffExpr, name: str) -> DiffExpr:
    """Partial derivative with respect to one ring generator"""
    gen = jet_ring.gens[jet_ring.lookup(name)]
    return _apply_derivation(e, lambda p: DiffExpr.from_poly(p.diff(gen)))


# ---------------------------------------------------------------------------
# Substitution and reduction
# ---------------------------------------------------------------------------

def _compose(e: DiffExpr, replacements: List[Tuple[PolyElement, PolyElement]]) -> DiffExpr:
    if not replacements:
        return e
    result = DiffExpr.from_poly(e.num.compose(replacements))
    for f, k in e.den:
        composed = f.compose(replacements)
        if composed == f:
            result = result * _build(jet_ring.ring.one, {f: k})
        else:
            result = result / DiffExpr.from_poly(composed) ** k
    return result


def substitute(e: DiffExpr, mapping: Mapping[str, DiffExpr]) -> DiffExpr:
    """Simultaneously replace generators by polynomial expressions"""
    replacements = []
    for name, value in mapping.items():
        value = DiffExpr._coerce(value)
        if value is None or not value.is_polynomial:
            raise ParameterError(f"Replacement for '{name}' must be a polynomial")
        replacements.append((jet_ring.gens[jet_ring.lookup(name)], value.num))
    return _compose(e, replacements)


@lru_cache(maxsize=None)
def _reduction_rules(ruleset: str, top: int) -> Dict[int, PolyElement]:
    """Fully reduced replacement for every u(i, 1) up to order `top`"""
    if ruleset == "pde":
        first, source = 2, pde_rhs()
        source_order = 3
    else:
        first, source = 1, phi()
        source_order = 2

    rules: Dict[int, PolyElement] = {}
    for i in range(first, top + 1):
        shift = i - first
        if source_order + shift > jet_ring.max_order:
            raise JetOrderError(
                f"reducing {jet_name(i, 1)} needs x-order {source_order + shift}"
            )
        lower = i - first
        lowered = rules[lower] if lower >= first else jet_ring.u(lower, 1)
        rules[i] = jet_ring.reduce_params(lowered - dx(source, shift).num)
    logger.debug("Built %s reduction rules up to order %d", ruleset, top)
    return rules


def _t_jet_orders(e: DiffExpr) -> List[int]:
    orders = set()
    for p in [e.num] + [f for f, _ in e.den]:
        for index, degree in enumerate(p.degrees()):
            if degree > 0 and jet_ring.kind(index) == "jet":
                i, j = jet_ring.jet_of_index[index]
                if j == 1:
                    orders.add(i)
    return sorted(orders)


def reduce(e: DiffExpr, ruleset: str) -> DiffExpr:
    """
    Reduce modulo the equation

    pde rewrites u(i, 1), i >= 2, through u_xxt = u_t - F and its
    x-prolongations; flow rewrites u(i, 1), i >= 1, through u_xt = u_t - phi.
    """
    if ruleset not in RULESETS:
        raise ParameterError(f"Ruleset must be one of {RULESETS}, got '{ruleset}'")
    first = 2 if ruleset == "pde" else 1
    orders = [i for i in _t_jet_orders(e) if i >= first]
    if not orders:
        return e
    rules = _reduction_rules(ruleset, max(orders))
    return _compose(e, [(jet_ring.u(i, 1), rules[i]) for i in orders])


# ---------------------------------------------------------------------------
# Exact evaluation and rendering
# ---------------------------------------------------------------------------

def _point_values(point: Mapping[str, Number]) -> Dict[int, Number]:
    values = {jet_ring.lookup(name): value for name, value in point.items()}
    s_index, mu_index = jet_ring.index_of["s"], jet_ring.index_of["mu"]
    if s_index not in values and mu_index in values:
        values[s_index] = _sqrt_one_plus_square(values[mu_index])
    return values


def _sqrt_one_plus_square(mu: Number) -> Number:
    if isinstance(mu, (int, Fraction)):
        target = 1 + Fraction(mu) ** 2
        num, den = math.isqrt(target.numerator), math.isqrt(target.denominator)
        if num * num == target.numerator and den * den == target.denominator:
            return Fraction(num, den)
    return math.sqrt(1 + float(mu) ** 2)


def _evaluate_poly(p: PolyElement, values: Mapping[int, Number]) -> Number:
    total: Number = 0
    missing = set()
    for monom, coeff in p.iterterms():
        term: Number = _to_fraction(coeff)
        for index, k in enumerate(monom):
            if not k:
                continue
            if index not in values:
                missing.add(jet_ring.display[jet_ring.names[index]])
                continue
            term = term * values[index] ** k
        total = total + term
    if missing:
        raise UnboundSymbolError(missing)
    return total


def evaluate(e: DiffExpr, point: Mapping[str, Number]) -> Number:
    """
    Evaluate at a point given by symbol name (u, u_x, ..., E, mu, s, g, ...)

    Exact (Fraction) when every value is rational. s defaults to
    sqrt(1 + mu^2); the branch sign is already folded into e.
    """
    values = _point_values(point)
    numerator = _evaluate_poly(e.num, values)
    denominator: Number = 1
    for f, k in e.den:
        denominator = denominator * _evaluate_poly(f, values) ** k
    if denominator == 0:
        raise ZeroDivisionError("denominator vanishes at the evaluation point")
    if isinstance(numerator, float) or isinstance(denominator, float):
        return float(numerator) / float(denominator)
    return Fraction(numerator) / Fraction(denominator)


def _render_poly(p: PolyElement) -> str:
    if not p:
        return "0"
    pieces = []
    for monom, coeff in p.terms():
        value = _to_fraction(coeff)
        factors = []
        for index, k in enumerate(monom):
            if k:
                name = jet_ring.display[jet_ring.names[index]]
                factors.append(name if k == 1 else f"{name}^{k}")
        magnitude = abs(value)
        if factors:
            body = "*".join(factors)
            if magnitude != 1:
                body = f"{magnitude}*{body}"
        else:
            body = str(magnitude)
        sign = "-" if value < 0 else "+"
        pieces.append((sign, body))

    first_sign, first_body = pieces[0]
    text = ("-" if first_sign == "-" else "") + first_body
    for sign, body in pieces[1:]:
        text += f" {sign} {body}"
    return text


def render(e: DiffExpr) -> str:
    """Plain-text rendering, e.g. 'E*u_x^2 + 2*E*u_x*u_xx'"""
    numerator = _render_poly(e.num)
    if not e.den:
        return numerator
    parts = []
    for f, k in e.den:
        base = _render_poly(f)
        if len(f) > 1:
            base = f"({base})"
        parts.append(base if k == 1 else f"{base}^{k}")
    return f"({numerator})/({'*'.join(parts)})"
