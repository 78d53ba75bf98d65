"""
Expression compiler for Pseudospherical Lab

Turns exact jet expressions into numpy evaluators over sampled jet fields.
Numerator and denominator are compiled separately so that every division
can be guarded.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np
import sympy

from ..config import settings
from ..errors import GuardedDivisionError, JetOrderError, ParameterError, UnboundSymbolError
from ..models.fields import JET_NAMES, JetFields
from .jetring import EXPONENTIAL, PARAMETER_NAMES, PSEUDO_POTENTIAL, DiffExpr, jet_ring

logger = logging.getLogger(__name__)

BINDABLE = PARAMETER_NAMES + (PSEUDO_POTENTIAL,)


@dataclass(frozen=True, eq=False)
class CompiledExpr:
    """Numpy evaluator of a DiffExpr with its parameters bound"""
    numerator: Callable[..., np.ndarray]
    denominator: Optional[Callable[..., np.ndarray]]
    arguments: Tuple[str, ...]
    bindings: Dict[str, float] = field(default_factory=dict)
    div_eps: float = settings.div_eps

    @property
    def inputs(self) -> Tuple[str, ...]:
        """Field inputs still required at call time (x stands for E)"""
        names = []
        for name in self.arguments:
            if name == EXPONENTIAL:
                names.append("x")
            elif name not in self.bindings:
                names.append(name)
        return tuple(names)

    def evaluate(self, inputs: Mapping[str, object], shape: Optional[Tuple[int, ...]] = None) -> np.ndarray:
        """
        Evaluate on arrays (or scalars) keyed by x, u, u_x, ..., u_xxt

        The result is broadcast to `shape` when given, otherwise to the
        common shape of the inputs.
        """
        values = []
        for name in self.arguments:
            if name in self.bindings:
                values.append(self.bindings[name])
            elif name == EXPONENTIAL:
                if "x" not in inputs:
                    raise UnboundSymbolError(["x"])
                values.append(np.exp(np.asarray(inputs["x"], dtype=float)))
            elif name in inputs:
                values.append(np.asarray(inputs[name], dtype=float))
            else:
                raise UnboundSymbolError([name])

        if shape is None:
            shape = np.broadcast_shapes(*(np.shape(v) for v in values)) if values else ()

        num = np.broadcast_to(np.asarray(self.numerator(*values), dtype=float), shape)
        if self.denominator is None:
            return np.array(num, dtype=float)

        den = np.broadcast_to(np.asarray(self.denominator(*values), dtype=float), shape)
        small = ~(np.abs(den) >= self.div_eps)
        if np.any(small):
            index = tuple(int(i) for i in np.argwhere(small)[0])
            raise GuardedDivisionError(index, float(den[index]), self.div_eps)
        return num / den

    def __call__(self, **inputs) -> np.ndarray:
        return self.evaluate(inputs)


def _supported(name: str) -> bool:
    return name in JET_NAMES or name == EXPONENTIAL or name in BINDABLE


def _resolve_bindings(bindings: Mapping[str, float]) -> Dict[str, float]:
    unknown = sorted(set(bindings) - set(BINDABLE))
    if unknown:
        raise ParameterError(f"Cannot bind {unknown}; bindable symbols are {BINDABLE}")
    resolved = {name: float(value) for name, value in bindings.items()}
    if "s" not in resolved and "mu" in resolved:
        resolved["s"] = math.sqrt(1.0 + resolved["mu"] ** 2)
    return resolved


def compile_expr(e: DiffExpr, bindings: Optional[Mapping[str, float]] = None,
                 div_eps: Optional[float] = None, use_cse: bool = True) -> CompiledExpr:
    """
    Compile a jet expression into a numpy evaluator

    Args:
        e: Expression over the jets u..u_xxx, u_t..u_xxt, E and parameters
        bindings: Values for mu (s follows as sqrt(1 + mu^2)), beta, C_strip, c, g
        div_eps: Smallest admissible denominator magnitude
        use_cse: Let sympy hoist common subexpressions

    Returns:
        CompiledExpr whose remaining inputs are jet fields and x
    """
    resolved = _resolve_bindings(bindings or {})
    used = e.symbols()

    beyond = sorted(name for name in used if not _supported(name))
    if beyond:
        raise JetOrderError(f"Jets {beyond} are not available as field inputs")
    unbound = sorted(name for name in used if name in BINDABLE and name not in resolved)
    if unbound:
        raise UnboundSymbolError(unbound)

    arguments = tuple(name for name in jet_ring.names if name in used)
    symbols = [jet_ring.ring.symbols[jet_ring.index_of[name]] for name in arguments]

    numerator = sympy.lambdify(symbols, e.num.as_expr(), modules="numpy", cse=use_cse)
    denominator = None
    if e.den:
        product = sympy.Mul(*(f.as_expr() ** k for f, k in e.den))
        denominator = sympy.lambdify(symbols, product, modules="numpy", cse=use_cse)

    logger.debug("Compiled expression over %s", ", ".join(arguments) or "constants")
    return CompiledExpr(
        numerator=numerator,
        denominator=denominator,
        arguments=arguments,
        bindings={name: resolved[name] for name in arguments if name in resolved},
        div_eps=settings.div_eps if div_eps is None else div_eps,
    )


def jet_inputs(jets: JetFields, xs: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
    inputs = {name: getattr(jets, name) for name in JET_NAMES}
    inputs["x"] = jets.x if xs is None else xs
    return inputs


def eval_field(c: CompiledExpr, jets: JetFields, xs: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluate a compiled expression pointwise on one time slice"""
    inputs = jet_inputs(jets, xs)
    shape = np.broadcast_shapes(np.shape(jets.u), np.shape(inputs["x"]))
    return c.evaluate(inputs, shape=shape)
