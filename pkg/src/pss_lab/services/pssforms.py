"""
Pseudospherical one-forms for Pseudospherical Lab

Builds the one-forms of the generalized Camassa-Holm equation for both
branches, checks the structure equations modulo the equation and checks the
instantiation of the general family these forms belong to.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Tuple

from ..errors import ParameterError
from ..models.schemas import VerificationReport
from .checks import exact_check
from .jetring import (
    DiffExpr,
    const,
    dt,
    dx,
    exp_x,
    jet_name,
    jet_ring,
    partial,
    pde_residual,
    phi,
    reduce,
    substitute,
    symbol,
    u,
)

logger = logging.getLogger(__name__)

COEFFICIENT_NAMES = ("f11", "f12", "f21", "f22", "f31", "f32")


@dataclass(frozen=True)
class OneForm:
    """dx-coefficient dx + dt-coefficient dt"""
    dx: DiffExpr
    dt: DiffExpr


def wedge(a: OneForm, b: OneForm) -> DiffExpr:
    """Coefficient of dx^dt in a^b"""
    return a.dx * b.dt - a.dt * b.dx


def exterior(a: OneForm) -> DiffExpr:
    """Coefficient of dx^dt in da"""
    return dx(a.dt) - dt(a.dx)


@dataclass(frozen=True)
class PsForms:
    """One-forms of one branch with the pairwise determinants"""
    branch: int
    omega1: OneForm
    omega2: OneForm
    omega3: OneForm
    delta12: DiffExpr
    delta13: DiffExpr
    delta23: DiffExpr

    @property
    def forms(self) -> Tuple[OneForm, OneForm, OneForm]:
        return (self.omega1, self.omega2, self.omega3)

    def f(self, i: int, j: int) -> DiffExpr:
        form = self.forms[i - 1]
        return form.dx if j == 1 else form.dt

    @property
    def coefficients(self) -> Dict[str, DiffExpr]:
        return {name: self.f(int(name[1]), int(name[2])) for name in COEFFICIENT_NAMES}

    def delta(self, i: int, j: int) -> DiffExpr:
        """Delta_ij = f_i1 f_j2 - f_j1 f_i2"""
        return self.f(i, 1) * self.f(j, 2) - self.f(j, 1) * self.f(i, 2)


@dataclass(frozen=True)
class FamilyData:
    """Data selecting one member of the general pseudospherical family"""
    lam: DiffExpr
    f: DiffExpr
    phi12: DiffExpr
    C: DiffExpr
    eta2: DiffExpr
    mu2: DiffExpr
    sign: int = 1


def momentum() -> DiffExpr:
    """m = u - u_xx"""
    return u(0) - u(2)


def phi12() -> DiffExpr:
    """phi_12 = -2 u^2 u_x + u u_x^2 + u^3"""
    return -2 * u(0) ** 2 * u(1) + u(0) * u(1) ** 2 + u(0) ** 3


def g_target() -> DiffExpr:
    """Right side of the equation minus u^2 u_xxx"""
    u0, u1, u2 = u(0), u(1), u(2)
    return (-u0 ** 2 * u2 - 3 * u0 * u1 ** 2 - 2 * u0 ** 2 * u1
            + 4 * u0 * u1 * u2 + u1 ** 3)


@lru_cache(maxsize=None)
def build_forms(branch: int = 1) -> PsForms:
    """
    One-forms of the equation with the branch sign realized as eps*s

    Args:
        branch: +1 or -1

    Returns:
        PsForms with the six coefficients and Delta_12, Delta_13, Delta_23
    """
    if branch not in (1, -1):
        raise ParameterError(f"Branch sign must be +1 or -1, got {branch}")
    mu, s = symbol("mu"), symbol("s")
    m = momentum()
    f12 = -u(0) ** 2 * m + phi12()

    omega1 = OneForm(m, f12)
    omega2 = OneForm(mu * m + branch * s, mu * f12)
    omega3 = OneForm(branch * s * m + mu, branch * s * f12)

    def det(a: OneForm, b: OneForm) -> DiffExpr:
        return a.dx * b.dt - b.dx * a.dt

    ps = PsForms(
        branch=branch,
        omega1=omega1,
        omega2=omega2,
        omega3=omega3,
        delta12=det(omega1, omega2),
        delta13=det(omega1, omega3),
        delta23=det(omega2, omega3),
    )
    logger.debug("Built one-forms for branch %+d", branch)
    return ps


def structure_residuals(ps: PsForms) -> Tuple[DiffExpr, DiffExpr, DiffExpr]:
    """
    Raw residuals of the structure equations

    r1 = d(omega1) - omega3^omega2, r2 = d(omega2) - omega1^omega3,
    r3 = d(omega3) - omega1^omega2, each the dx^dt coefficient. They vanish
    after reduce(., "pde").
    """
    w1, w2, w3 = ps.forms
    r1 = exterior(w1) - wedge(w3, w2)
    r2 = exterior(w2) - wedge(w1, w3)
    r3 = exterior(w3) - wedge(w1, w2)
    return r1, r2, r3


def genericity_exprs(ps: PsForms) -> Tuple[DiffExpr, DiffExpr, DiffExpr]:
    """(Delta_12, Delta_13, Delta_23)"""
    return ps.delta12, ps.delta13, ps.delta23


def family_data(branch: int = 1) -> FamilyData:
    """Family data reproducing the equation: lambda = 1, f = m, C = 0, eta_2 = eps*s"""
    return FamilyData(
        lam=const(1),
        f=momentum(),
        phi12=phi12(),
        C=const(0),
        eta2=branch * symbol("s"),
        mu2=symbol("mu"),
        sign=branch,
    )


def family_g(data: FamilyData) -> DiffExpr:
    """G(u, u_x, u_xx) of the general family for the given data"""
    s = symbol("s")
    u0, u1, u2 = u(0), u(1), u(2)
    f_prime = partial(data.f, "u")
    sign = data.sign
    bracket = (
        u1 * partial(data.phi12, "u")
        + u2 * partial(data.phi12, "u_x")
        - data.lam * u0 ** 2 * u1 * f_prime
        + sign * data.eta2 / s * data.phi12
        - (2 * data.lam * u0 * u1 + sign * data.lam * data.eta2 * u0 ** 2 / s
           + sign * data.C / s) * data.f
    )
    return bracket / f_prime


def family_forms(data: FamilyData) -> Tuple[OneForm, OneForm, OneForm]:
    """One-forms of the general family for the given data"""
    s = symbol("s")
    sign = data.sign
    f, lam, mu2, eta2, C = data.f, data.lam, data.mu2, data.eta2, data.C
    u2f = u(0) ** 2 * f
    omega1 = OneForm(f, -lam * u2f + data.phi12)
    omega2 = OneForm(mu2 * f + eta2, -lam * mu2 * u2f + mu2 * data.phi12 + C)
    omega3 = OneForm(
        sign * (s * f + mu2 * eta2 / s),
        sign * (-s * lam * u2f + s * data.phi12 + mu2 * C / s),
    )
    return omega1, omega2, omega3


def family_instantiation_check(branch: int = 1) -> VerificationReport:
    """G_computed - G_target = 0 and the constraint (lambda*eta_2)^2 + C^2 = 1 + mu^2"""
    data = family_data(branch)
    checks = [
        exact_check(
            f"family-g-matches[{branch:+d}]",
            "family-instantiation",
            family_g(data) - g_target(),
        ),
        exact_check(
            f"family-constraint[{branch:+d}]",
            "family-constraint",
            (data.lam * data.eta2) ** 2 + data.C ** 2 - (1 + symbol("mu") ** 2),
        ),
    ]
    return VerificationReport(suite="family", checks=checks)


def family_forms_check(branch: int = 1) -> VerificationReport:
    """The family one-forms coincide with build_forms coefficient by coefficient"""
    ps = build_forms(branch)
    family = family_forms(family_data(branch))
    checks = []
    for i, form in enumerate(family, start=1):
        checks.append(exact_check(f"family-form-f{i}1[{branch:+d}]", "family-forms", form.dx - ps.f(i, 1)))
        checks.append(exact_check(f"family-form-f{i}2[{branch:+d}]", "family-forms", form.dt - ps.f(i, 2)))
    return VerificationReport(suite="family-forms", checks=checks)


def exponential_family_substitution(e: DiffExpr) -> DiffExpr:
    """
    Restrict to the solutions u = c(t) e^x

    u(i, 0) -> c*E, and every u(i, 1) -> u_t since all x-derivatives of
    c'(t) e^x coincide.
    """
    mapping = {jet_name(i, 0): symbol("c") * exp_x() for i in range(jet_ring.max_order + 1)}
    mapping.update({jet_name(i, 1): u(0, 1) for i in range(1, jet_ring.max_order + 1)})
    return substitute(e, mapping)


def structure_report(branch: int = 1) -> VerificationReport:
    """Structure equations, proportionality, determinant identities and the exponential family"""
    ps = build_forms(branch)
    mu, s = symbol("mu"), symbol("s")
    r1, r2, r3 = structure_residuals(ps)
    f12 = ps.f(1, 2)
    tag = f"[{branch:+d}]"
    checks = [
        exact_check(f"structure-r1{tag}", "structure-equations", reduce(r1, "pde")),
        exact_check(f"structure-r2{tag}", "structure-equations", reduce(r2, "pde")),
        exact_check(f"structure-r3{tag}", "structure-equations", reduce(r3, "pde")),
        exact_check(f"structure-r2-mu-r1{tag}", "structure-proportionality", r2 - mu * r1),
        exact_check(f"structure-r3-eps-s-r1{tag}", "structure-proportionality", r3 - branch * s * r1),
        exact_check(f"delta12{tag}", "determinants", ps.delta12 + branch * s * f12),
        exact_check(f"delta13{tag}", "determinants", ps.delta13 + mu * f12),
        exact_check(f"delta23{tag}", "determinants", ps.delta23 - f12),
        exact_check(f"f12-is-phi{tag}", "determinants", f12 - phi()),
        exact_check(
            f"exponential-family-delta12{tag}",
            "exponential-family",
            exponential_family_substitution(ps.delta12),
        ),
    ]
    return VerificationReport(suite="structure", checks=checks)


def exponential_family_check() -> VerificationReport:
    """u = c e^x kills phi and the PDE residual identically"""
    phi_sub = exponential_family_substitution(phi())
    residual = exponential_family_substitution(pde_residual())
    return VerificationReport(
        suite="exponential-family",
        checks=[
            exact_check("exponential-family-phi", "exponential-family", phi_sub),
            exact_check("exponential-family-pde", "exponential-family", residual),
        ],
    )
