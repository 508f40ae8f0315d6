"""Named builders addressable from config files.

Four registries: principal symbols, weights derived from them, grid
operators, potentials.  Each entry carries a parameter schema used by
the command-line listing; params arrive as plain dicts from config.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import hamiltonians as ham
from .metric import WeightEvaluator
from .symbols import (daho_symbol, grushin_a2, harmonic_a2, with_confinement)

__all__ = ["symbol_names", "weight_names", "operator_names", "potential_names",
           "get_a2", "get_weight", "get_operator", "get_potential",
           "describe_builders", "UnknownBuilderError"]


class UnknownBuilderError(KeyError):
    pass


_SYMBOLS = {
    "daho": ("c_prime: float = 3", lambda p: daho_symbol(float(p.get("c_prime", 3.0)))),
    "harmonic": ("n: int = 2", lambda p: harmonic_a2(int(p.get("n", 2)))),
    "grushin_pure": ("", lambda p: grushin_a2()),
}

_WEIGHTS = {
    "daho": ("c_prime: float = 3",
             lambda p: WeightEvaluator.from_a2(daho_symbol(float(p.get("c_prime", 3.0))), name="daho")),
    "harmonic": ("n: int = 2",
                 lambda p: WeightEvaluator.from_a2(harmonic_a2(int(p.get("n", 2))), name="harmonic")),
    "grushin_pure": ("", lambda p: WeightEvaluator.from_a2(grushin_a2(), name="grushin_pure")),
    "broken_half_bracket": ("n: int = 2; fails the uncertainty gate by design",
                            lambda p: WeightEvaluator.half_bracket(int(p.get("n", 2)))),
}


def _sum_of_squares_op(grid, p):
    fields = []
    for axis, coeff in p.get("fields", [[0, "1"], [1, "1"]]):
        if coeff == "1":
            fields.append((int(axis), None))
        elif coeff == "x1":
            fields.append((int(axis), lambda X: X[:, 0]))
        else:
            raise UnknownBuilderError(f"unknown field coefficient {coeff!r}")
    return ham.sum_of_squares_matrix(fields, grid)


_OPERATORS = {
    "harmonic": ("order: int = 6", lambda g, p: ham.harmonic_matrix(g, int(p.get("order", 6)))),
    "daho": ("c_prime: float = 3, order: int = 6",
             lambda g, p: ham.daho_matrix(g, float(p.get("c_prime", 3.0)), int(p.get("order", 6)))),
    "grushin_pure": ("order: int = 6", lambda g, p: ham.grushin_kinetic(g, int(p.get("order", 6)))),
    "single_field": ("order: int = 6", lambda g, p: ham.single_field_kinetic(g, int(p.get("order", 6)))),
    "sum_of_squares": ("fields: list of [axis, coeff] with coeff in {1, x1}", _sum_of_squares_op),
}

_POTENTIALS = {
    "quadratic": ("", lambda g, p: ham.quadratic_potential(g)),
    "bounded_noise": ("amplitude: float = 1, seed: int",
                      lambda g, p: ham.bounded_noise_potential(
                          g, float(p.get("amplitude", 1.0)), int(p["seed"]))),
    "step": ("amplitude: float = 1, base: float = 0",
             lambda g, p: ham.step_potential(g, float(p.get("amplitude", 1.0)),
                                             float(p.get("base", 0.0)))),
    "table": ("file: path to CSV of grid values", lambda g, p: ham.table_potential(g, p["file"])),
}


def symbol_names():
    return sorted(_SYMBOLS)


def weight_names():
    return sorted(_WEIGHTS)


def operator_names():
    return sorted(_OPERATORS)


def potential_names():
    return sorted(_POTENTIALS)


def _lookup(table, kind, name):
    try:
        return table[name]
    except KeyError:
        raise UnknownBuilderError(f"unknown {kind} builder {name!r}; "
                                  f"available: {', '.join(sorted(table))}") from None


def get_a2(name: str, params: Optional[dict] = None):
    return _lookup(_SYMBOLS, "symbol", name)[1](params or {})


def get_weight(name: str, params: Optional[dict] = None) -> WeightEvaluator:
    return _lookup(_WEIGHTS, "weight", name)[1](params or {})


def get_operator(name: str, grid, params: Optional[dict] = None):
    return _lookup(_OPERATORS, "operator", name)[1](grid, params or {})


def get_potential(name: str, grid, params: Optional[dict] = None):
    return _lookup(_POTENTIALS, "potential", name)[1](grid, params or {})


def describe_builders() -> str:
    lines = []
    for title, table in (("symbols", _SYMBOLS), ("weights", _WEIGHTS),
                         ("operators", _OPERATORS), ("potentials", _POTENTIALS)):
        lines.append(f"{title}:")
        for name in sorted(table):
            schema = table[name][0] or "(no parameters)"
            lines.append(f"  {name:22s} {schema}")
    return "\n".join(lines)
