"""
Pseudo-potentials and conservation laws for Pseudospherical Lab

The Riccati pseudo-potential g of the equation, its integrability, the
parameter-dependent conservation law, the two series hierarchies in powers
of eta and the exactness of the resulting conservation laws. g is never
integrated: every derivative of g is replaced from its defining system.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional

from ..config import settings
from ..errors import ParameterError
from ..models.schemas import CheckResult, Expansion, Family, VerificationReport
from .checks import exact_check
from .jetring import (
    DiffExpr,
    const,
    dt,
    dx,
    eta,
    eta_inv,
    exp_x,
    phi,
    pseudo_potential,
    reduce,
    substitute,
    total_derivative,
    u,
)
from .pssforms import OneForm, build_forms, momentum

logger = logging.getLogger(__name__)

FORMS = ("raw", "shifted")


@dataclass(frozen=True)
class RiccatiSystem:
    """g_x = rhs_x, g_t = rhs_t, both quadratic in g"""
    rhs_x: DiffExpr
    rhs_t: DiffExpr
    form: str
    branch: int

    @property
    def rules(self) -> Dict[str, DiffExpr]:
        return {"x": self.rhs_x, "t": self.rhs_t}


@dataclass(frozen=True)
class HierarchyTerm:
    """Coefficient of eta^-k (negative) or eta^k (positive) in the expansion of g"""
    expansion: Expansion
    k: int
    term: DiffExpr


@dataclass(frozen=True)
class ConservationLaw:
    """D_t density = D_x flux on solutions, with a potential when exact"""
    family: Family
    k: int
    density: DiffExpr
    flux: DiffExpr
    potential: Optional[DiffExpr]


def _w() -> DiffExpr:
    """u_x - u - 1"""
    return u(1) - u(0) - 1


def _v() -> DiffExpr:
    """u - u_x + 1"""
    return u(0) - u(1) + 1


def _m_plus_one() -> DiffExpr:
    return momentum() + 1


def riccati_rhs(branch: int = 1, form: str = "shifted") -> RiccatiSystem:
    """
    Right sides of the Riccati system

    The raw form comes from 2 dg = w3 - w2 - 2 g w1 + g^2 (w3 + w2) with the
    one-forms of the branch; the shifted form substitutes g -> g + 1/eta.
    """
    if form not in FORMS:
        raise ParameterError(f"Riccati form must be one of {FORMS}, got '{form}'")
    ps = build_forms(branch)
    g = pseudo_potential()
    half = Fraction(1, 2)

    def side(j: int) -> DiffExpr:
        f1, f2, f3 = ps.f(1, j), ps.f(2, j), ps.f(3, j)
        return half * ((f3 - f2) - 2 * g * f1 + g ** 2 * (f3 + f2))

    rhs_x, rhs_t = side(1), side(2)
    if form == "shifted":
        shift = {"g": g + eta_inv(branch)}
        rhs_x, rhs_t = substitute(rhs_x, shift), substitute(rhs_t, shift)
    return RiccatiSystem(rhs_x=rhs_x, rhs_t=rhs_t, form=form, branch=branch)


def compact_riccati(branch: int = 1) -> RiccatiSystem:
    """2 g_x = 2g + g^2 eta (u - u_xx + 1), 2 g_t = g^2 eta phi"""
    g, e = pseudo_potential(), eta(branch)
    half = Fraction(1, 2)
    return RiccatiSystem(
        rhs_x=g + half * g ** 2 * e * _m_plus_one(),
        rhs_t=half * g ** 2 * e * phi(),
        form="shifted",
        branch=branch,
    )


def check_integrability(branch: int = 1, form: str = "shifted") -> DiffExpr:
    """D_t(g_x) - D_x(g_t) with g-derivatives substituted, reduced modulo pde"""
    system = riccati_rhs(branch, form)
    cross = (total_derivative(system.rhs_x, "t", system.rules)
             - total_derivative(system.rhs_t, "x", system.rules))
    return reduce(cross, "pde")


def conservation_identity_raw(branch: int = 1) -> DiffExpr:
    """D_t[g (u - u_xx + 1)] - D_x[g phi] under the shifted system, unreduced"""
    system = riccati_rhs(branch, "shifted")
    g = pseudo_potential()
    return (total_derivative(g * _m_plus_one(), "t", system.rules)
            - total_derivative(g * phi(), "x", system.rules))


def check_conservation_identity(branch: int = 1) -> DiffExpr:
    """Parameter-dependent conservation law residual, reduced modulo pde"""
    return reduce(conservation_identity_raw(branch), "pde")


def conservation_factorization(branch: int = 1) -> DiffExpr:
    """Unreduced residual minus g [(u - u_xx)_t - phi - D_x phi]; identically zero"""
    g = pseudo_potential()
    return conservation_identity_raw(branch) - g * (dt(momentum()) - phi() - dx(phi()))


def check_closed_form_raw(branch: int = 1) -> DiffExpr:
    """d of [g(f21 + f31) - f11] dx + [g(f22 + f32) - f12] dt under the raw system"""
    ps = build_forms(branch)
    system = riccati_rhs(branch, "raw")
    g = pseudo_potential()
    theta = OneForm(
        g * (ps.f(2, 1) + ps.f(3, 1)) - ps.f(1, 1),
        g * (ps.f(2, 2) + ps.f(3, 2)) - ps.f(1, 2),
    )
    closed = (total_derivative(theta.dt, "x", system.rules)
              - total_derivative(theta.dx, "t", system.rules))
    return reduce(closed, "pde")


def check_raw_conservation(branch: int = 1) -> DiffExpr:
    """Unshifted law [g(m + 1)]_t - [g phi]_x - (eps s - mu) phi under the raw system"""
    system = riccati_rhs(branch, "raw")
    g = pseudo_potential()
    residual = (total_derivative(g * _m_plus_one(), "t", system.rules)
                - total_derivative(g * phi(), "x", system.rules)
                - eta_inv(branch) * phi())
    return reduce(residual, "pde")


def riccati_report(branch: int = 1) -> VerificationReport:
    """Shift match, integrability, conservation identity and the raw variants"""
    tag = f"[{branch:+d}]"
    shifted, compact = riccati_rhs(branch, "shifted"), compact_riccati(branch)
    checks = [
        exact_check(f"riccati-shift-x{tag}", "riccati-shift", shifted.rhs_x - compact.rhs_x),
        exact_check(f"riccati-shift-t{tag}", "riccati-shift", shifted.rhs_t - compact.rhs_t),
        exact_check(f"riccati-integrability{tag}", "riccati-integrability", check_integrability(branch)),
        exact_check(f"riccati-integrability-raw{tag}", "riccati-integrability",
                    check_integrability(branch, "raw")),
        exact_check(f"conservation-identity{tag}", "parametric-conservation-law",
                    check_conservation_identity(branch)),
        exact_check(f"conservation-factorization{tag}", "parametric-conservation-law",
                    conservation_factorization(branch)),
        exact_check(f"closed-one-form-raw{tag}", "closed-one-form", check_closed_form_raw(branch)),
        exact_check(f"conservation-raw{tag}", "parametric-conservation-law",
                    check_raw_conservation(branch)),
    ]
    return VerificationReport(suite="riccati", checks=checks)


# ---------------------------------------------------------------------------
# Hierarchies
# ---------------------------------------------------------------------------

def series_term(expansion, k: int) -> HierarchyTerm:
    """
    Closed form of the k-th series coefficient

    negative (k >= 1): 1 / (2^(k-2) E^(k-1) (u_x - u - 1)^k)
    positive (k >= 0): E^(k+1) (u - u_x + 1)^k / 2^k
    """
    expansion = Expansion(expansion)
    if expansion == Expansion.NEGATIVE:
        if k < 1:
            raise ParameterError(f"negative expansion needs k >= 1, got {k}")
        term = const(Fraction(2) ** (2 - k)) * exp_x() ** (-(k - 1)) * _w() ** (-k)
    else:
        if k < 0:
            raise ParameterError(f"positive expansion needs k >= 0, got {k}")
        term = const(Fraction(1, 2 ** k)) * exp_x() ** (k + 1) * _v() ** k
    return HierarchyTerm(expansion=expansion, k=k, term=term)


def convolution_sum(expansion: Expansion, k: int, term: Callable[[int], DiffExpr]) -> DiffExpr:
    """sum_{i=1..k} T_i T_{k+1-i} (negative) or sum_{i=0..k-1} T_i T_{k-1-i} (positive)"""
    total = const(0)
    if expansion == Expansion.NEGATIVE:
        for i in range(1, k + 1):
            total = total + term(i) * term(k + 1 - i)
    else:
        for i in range(0, k):
            total = total + term(i) * term(k - 1 - i)
    return total


def convolution_closed(expansion: Expansion, k: int) -> DiffExpr:
    if expansion == Expansion.NEGATIVE:
        return const(Fraction(8 * k, 2 ** k)) * _w() ** (-(k + 1)) * exp_x() ** (-(k - 1))
    return const(Fraction(k, 2 ** (k - 1))) * exp_x() ** (k + 1) * _v() ** (k - 1)


def t_derivative_closed(expansion: Expansion, k: int) -> DiffExpr:
    """D_t of the k-th term written through (u_x - u)_t, without reduction"""
    if expansion == Expansion.NEGATIVE:
        w_t = u(1, 1) - u(0, 1)
        return (const(Fraction(-4 * k, 2 ** k)) * w_t
                * _w() ** (-(k + 1)) * exp_x() ** (-(k - 1)))
    v_t = u(0, 1) - u(1, 1)
    return const(Fraction(k, 2 ** k)) * exp_x() ** (k + 1) * _v() ** (k - 1) * v_t


def _hierarchy_checks(expansion: Expansion, k: int, term: Callable[[int], DiffExpr]) -> List[CheckResult]:
    tag = f"[{expansion.value},k={k}]"
    anchor = f"hierarchy-{expansion.value}"
    half = Fraction(1, 2)
    t_k = term(k)
    conv = convolution_sum(expansion, k, term)

    checks = [
        exact_check(f"x-recursion{tag}", anchor, dx(t_k) - (half * conv * _m_plus_one() + t_k)),
    ]
    if expansion == Expansion.POSITIVE and k == 0:
        checks.append(exact_check(f"t-derivative{tag}", anchor, dt(t_k)))
        return checks

    checks.extend([
        exact_check(f"convolution{tag}", anchor, conv - convolution_closed(expansion, k)),
        exact_check(f"t-derivative-closed{tag}", anchor, dt(t_k) - t_derivative_closed(expansion, k)),
        exact_check(f"t-derivative-flow{tag}", anchor, reduce(dt(t_k) - half * phi() * conv, "flow")),
    ])
    return checks


def verify_hierarchy(expansion, kmax: int = settings.kmax,
                     overrides: Optional[Mapping[int, DiffExpr]] = None) -> VerificationReport:
    """
    Verify recursions, convolution identities and t-relations up to kmax

    Args:
        expansion: "negative" or "positive"
        kmax: Highest index to verify (>= 2)
        overrides: Replacement terms by index, for mutation testing

    Returns:
        VerificationReport with one check per identity and index
    """
    expansion = Expansion(expansion)
    if kmax < 2:
        raise ParameterError(f"kmax must be >= 2, got {kmax}")
    overrides = dict(overrides or {})

    def term(i: int) -> DiffExpr:
        if i in overrides:
            return overrides[i]
        return series_term(expansion, i).term

    first = 1 if expansion == Expansion.NEGATIVE else 0
    indices = list(range(first, kmax + 1))
    with ThreadPoolExecutor(max_workers=max(1, settings.threads)) as pool:
        results = list(pool.map(lambda k: _hierarchy_checks(expansion, k, term), indices))

    checks = [check for group in results for check in group]
    logger.info("Hierarchy %s up to k=%d: %d checks", expansion.value, kmax, len(checks))
    return VerificationReport(suite=f"hierarchy-{expansion.value}", checks=checks)


# ---------------------------------------------------------------------------
# Conservation laws and exactness
# ---------------------------------------------------------------------------

def _check_family_range(family: Family, k: int) -> None:
    lowest = 2 if family == Family.NEG else 1
    if k < lowest:
        raise ParameterError(f"{family.value} family needs k >= {lowest}, got {k}")


def conservation_law(family, k: int) -> ConservationLaw:
    """Density, flux and potential of the k-th law of a family"""
    family = Family(family)
    _check_family_range(family, k)
    if family == Family.NEG:
        weight = exp_x() ** (-(k - 1)) * _w() ** (-k)
        potential = const(Fraction(1, k - 1)) * exp_x() ** (-(k - 1)) * _w() ** (-(k - 1))
    else:
        weight = exp_x() ** (k + 1) * _v() ** k
        potential = const(Fraction(1, k + 1)) * exp_x() ** (k + 1) * _v() ** (k + 1)
    return ConservationLaw(
        family=family,
        k=k,
        density=weight * _m_plus_one(),
        flux=weight * phi(),
        potential=potential,
    )


def conservation_residual_expr(family, k: int) -> DiffExpr:
    """D_t(density) - D_x(flux), expanded but not reduced"""
    law = conservation_law(family, k)
    return dt(law.density) - dx(law.flux)


def check_conservation_law(family, k: int) -> DiffExpr:
    """Conservation residual reduced modulo the flow ruleset"""
    return reduce(conservation_residual_expr(family, k), "flow")


def check_exactness(family, k: int) -> VerificationReport:
    """D_x(potential) = density exactly and D_t(potential) = flux modulo flow"""
    law = conservation_law(family, k)
    tag = f"[{law.family.value},k={k}]"
    checks = [
        exact_check(f"potential-density{tag}", "exactness", dx(law.potential) - law.density),
        exact_check(f"potential-flux{tag}", "exactness", reduce(dt(law.potential), "flow") - law.flux),
        exact_check(f"conservation-law{tag}", "conservation-laws", check_conservation_law(law.family, k)),
    ]
    return VerificationReport(suite="exactness", checks=checks)


def flow_identity_expressions() -> Dict[str, DiffExpr]:
    """L = u_t - u_xt - phi and R = u_t - u_xxt - phi - D_x phi"""
    return {
        "L": u(0, 1) - u(1, 1) - phi(),
        "R": u(0, 1) - u(2, 1) - phi() - dx(phi()),
    }


def check_flow_identity_implies_pde() -> DiffExpr:
    """D_x(L) + L - R; identically zero"""
    parts = flow_identity_expressions()
    return dx(parts["L"]) + parts["L"] - parts["R"]
