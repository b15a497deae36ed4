"""Built-in expressions, profile sets and random field generators.

Everything here is smooth on the default sampling box
``r in [0.5, 3], theta in [0.2, pi - 0.2], phi in [0.1, 2 pi - 0.1]``.
"""

from __future__ import annotations

import math

import numpy as np

from .calculus import Chart, ConnectionField, ExprField, MetricField, VectorFieldDef
from .so3 import FIRST

COORDS_3D = ("r", "theta", "phi")
COORDS_4D = ("u", "v", "theta", "phi")

SAMPLE_BOX_3D = ((0.5, 3.0), (0.2, math.pi - 0.2), (0.1, 2 * math.pi - 0.1))

EXPRESSIONS = (
    "r^2",
    "sin(theta)*cos(phi)",
    "exp(2*r)",
    "log(r)",
    "sqrt(r)*theta",
    "tan(theta/2)",
    "cot(theta)",
    "r^theta",
    "1/(1+r^2)",
    "-r*(1+r/10)",
    "sin(r)/4",
    "r/(1+r^2)",
    "1/(2*r)",
    "1/r + 1/(1+r^2)",
    "exp(-r)*sin(phi)",
    "r^2.5 - 3*r^-2",
    "(r + cos(phi))^3",
    "2^(phi/4)*sin(theta)^2",
    "log(1 + r*sin(theta)^2)",
    "sqrt(r^2 + theta^2 + phi^2)",
    "-sin(theta)*cos(theta)",
    "r*sin(theta)^2*cos(phi - pi/3)",
)

# (A111, A212) pairs for the 3D round trip and the (K, L) constants.
PROFILE_PAIRS_3D = (
    ("0", "1/r"),
    ("1/r", "1/r"),
    ("r/(1+r^2)", "1/(2*r)"),
    ("sin(r)/4", "1/r + 1/(1+r^2)"),
)
KL_PAIRS = ((1.0, 1.0), (2.0, 0.5), (-1.0, 3.0))

# (A000, A111, A212) triples for the 4D round trip and the (C1, C2) constants.
PROFILE_TRIPLES_4D = (
    ("0", "0", "1/v"),
    ("u/(1+u^2)", "1/v", "1/v"),
)
C_PAIRS = ((1.0, 1.0), (0.5, 2.0))

# Small, well-conditioned building blocks for random fields.
_POOL = (
    "1",
    "r",
    "1/r",
    "sin(theta)",
    "cos(theta)",
    "sin(phi)",
    "cos(phi)",
    "r*cos(theta)",
    "exp(-r/2)",
    "sin(theta)*cos(phi)",
    "log(1+r)",
    "r^2/4",
)


def field(src: str, coords=COORDS_3D) -> ExprField:
    return ExprField.parse(src, coords)


def random_expression(rng: np.random.Generator, terms: int = 2) -> str:
    """A short random linear combination of pool terms (3D coordinates)."""
    picks = rng.choice(len(_POOL), size=terms, replace=False)
    coeffs = rng.uniform(-1.0, 1.0, size=terms)
    return " + ".join(f"({float(c)!r})*({_POOL[k]})" for c, k in zip(coeffs, picks))


def random_vector_field(rng: np.random.Generator, chart: Chart = FIRST, name: str = "") -> VectorFieldDef:
    return VectorFieldDef(chart, [field(random_expression(rng)) for _ in range(chart.dim)], name)


def random_connection(rng: np.random.Generator, chart: Chart = FIRST) -> ConnectionField:
    """A random torsion-free connection (one expression per symmetric slot)."""
    n = chart.dim
    entries = {}
    for i in range(n):
        for j in range(n):
            for k in range(j, n):
                entries[(i, j, k)] = field(random_expression(rng))
    return ConnectionField.from_entries(chart, entries)


def sample_metric(chart: Chart = FIRST) -> MetricField:
    """A fixed, non-invariant, positive definite metric on the first chart."""
    a = field("1 + 0.2*sin(theta)*cos(phi)")
    b = field("r^2*(1 + 0.1*cos(theta))")
    c = field("r^2*sin(theta)^2 + 0.05*r*sin(phi)")
    d = field("0.1*r*sin(phi)*sin(theta)")
    e = field("0.05*cos(theta)")
    z = field("0")
    return MetricField(chart, [[a, d, e], [d, b, z], [e, z, c]])


def sample_points(rng: np.random.Generator, count: int, box=SAMPLE_BOX_3D) -> np.ndarray:
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * rng.random((count, len(box)))
