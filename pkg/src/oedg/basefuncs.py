"""Base functions used inside benchmark subcomponents.

All three are zero at the origin; elliptic and schwefel_1_2 are zero only
there. ``rastrigin`` is evaluated on a 0.05-scaled argument when used inside
a composed problem so its oscillatory region spans the [-100, 100] box; the
raw functions below apply no scaling.
"""

from __future__ import annotations

import numpy as np

from .errors import StructuralError

BASE_KINDS = ("schwefel_1_2", "elliptic", "rastrigin")

# argument scaling applied by composed problems, per base kind
INPUT_SCALE = {"schwefel_1_2": 1.0, "elliptic": 1.0, "rastrigin": 0.05}


def elliptic(z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    d = z.size
    if d == 0:
        raise StructuralError("empty argument")
    if d == 1:
        return float(z[0] * z[0])
    coef = 10.0 ** (6.0 * np.arange(d) / (d - 1))
    return float(np.dot(coef, z * z))


def rastrigin(z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise StructuralError("empty argument")
    return float(np.sum(z * z - 10.0 * np.cos(2.0 * np.pi * z) + 10.0))


def schwefel_1_2(z: np.ndarray) -> float:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise StructuralError("empty argument")
    c = np.cumsum(z)
    return float(np.dot(c, c))


_FUNCS = {"elliptic": elliptic, "rastrigin": rastrigin, "schwefel_1_2": schwefel_1_2}


def eval_base(kind: str, z) -> float:
    try:
        fn = _FUNCS[kind]
    except KeyError:
        raise StructuralError(f"unknown base function {kind!r}") from None
    return fn(np.asarray(z, dtype=float))


def elliptic_coefficients(d: int) -> np.ndarray:
    if d == 1:
        return np.ones(1)
    return 10.0 ** (6.0 * np.arange(d) / (d - 1))
