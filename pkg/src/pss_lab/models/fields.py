"""
Numeric field containers for Pseudospherical Lab

Arrays are never mutated after construction; containers are shared freely
between workers.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ParameterError
from .schemas import Provenance

JET_NAMES = ("u", "u_x", "u_xx", "u_xxx", "u_t", "u_xt", "u_xxt")


@dataclass(frozen=True)
class Grid1D:
    """Periodic grid on [0, L) with n points"""
    length: float
    n: int

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ParameterError(f"Grid needs a power of two n >= 16, got {self.n}")
        if self.length <= 0:
            raise ParameterError(f"Grid length must be positive, got {self.length}")

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the rfft modes"""
        return 2 * math.pi * np.fft.rfftfreq(self.n, d=self.h)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Stepping options for one solver run"""
    dt: Optional[float] = None
    dealias: bool = True
    forcing: Optional[Callable[[np.ndarray, float], np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class SolverState:
    """Momentum field m = u - u_xx at time t"""
    grid: Grid1D
    m: np.ndarray
    t: float = 0.0
    config: SolverConfig = field(default_factory=SolverConfig)


@dataclass(frozen=True, eq=False)
class JetFields:
    """Jets of u at one time slice"""
    x: np.ndarray
    t: float
    u: np.ndarray
    u_x: np.ndarray
    u_xx: np.ndarray
    u_xxx: np.ndarray
    u_t: np.ndarray
    u_xt: np.ndarray
    u_xxt: np.ndarray

    def restrict(self, mask: np.ndarray) -> "JetFields":
        return JetFields(self.x[mask], self.t, *(getattr(self, name)[mask] for name in JET_NAMES))


@dataclass(frozen=True, eq=False)
class JetGrid:
    """Jets of u sampled on x-nodes (columns) times t-nodes (rows)"""
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    u_xx: np.ndarray
    u_xxx: np.ndarray
    u_t: np.ndarray
    u_xt: np.ndarray
    u_xxt: np.ndarray

    @property
    def shape(self):
        return self.u.shape

    def slice(self, row: int) -> JetFields:
        return JetFields(self.x, float(self.t[row]), *(getattr(self, name)[row] for name in JET_NAMES))


@dataclass(frozen=True)
class ImmersionParams:
    """Parameters of the universal second fundamental form"""
    mu: float
    beta: float
    C_strip: float = 0.0
    a_sign: int = 1
    eps: int = 1

    def __post_init__(self):
        if self.a_sign not in (1, -1):
            raise ParameterError(f"a-branch sign must be +1 or -1, got {self.a_sign}")
        if self.eps not in (1, -1):
            raise ParameterError(f"Branch sign must be +1 or -1, got {self.eps}")
        if self.mu == 0:
            if self.C_strip <= 0 or self.C_strip ** 2 <= 4 * self.beta ** 2 or self.beta == 0:
                raise ParameterError(
                    f"mu = 0 needs C > 0, C^2 > 4 beta^2 and beta != 0 "
                    f"(C={self.C_strip}, beta={self.beta})"
                )
        elif self.beta == 0:
            raise ParameterError("beta = 0 is impossible for mu != 0")


@dataclass(frozen=True, eq=False)
class SffCoeffs:
    """Second fundamental form coefficients a, b, c on x-nodes"""
    x: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a_x: np.ndarray
    b_x: np.ndarray
    c_x: np.ndarray
    provenance: Provenance
    params: ImmersionParams
    phi_aux: Optional[np.ndarray] = None
    delta: Optional[np.ndarray] = None
    stop_reason: str = "completed"
    interpolant: Optional[Callable[[np.ndarray], np.ndarray]] = None

    @property
    def gauss_residual(self) -> np.ndarray:
        return self.a * self.c - self.b ** 2 + 1

    @property
    def mean_curvature(self) -> np.ndarray:
        return (self.a + self.c) / 2


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Immersed points and frames on the (t, x) vertex grid"""
    x: np.ndarray
    t: np.ndarray
    positions: np.ndarray
    frames: np.ndarray
    valid: np.ndarray
    ortho_drift: float = 0.0

    @property
    def shape(self):
        return self.valid.shape
