"""Butcher tableaus for diagonally implicit Runge-Kutta schemes.

Holds the tableau value type, structural validation, the elementary order
conditions, a JSON file format and a catalog of named two- and three-stage
schemes whose irrational coefficients are evaluated from closed forms.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ButcherTableau",
    "ValidationResult",
    "OrderReport",
    "TableauFormatError",
    "UnknownSchemeError",
    "validate",
    "order_report",
    "catalog",
    "CATALOG_IDS",
    "alexander33_gamma",
    "norsett34_gamma",
    "to_dict",
    "from_dict",
    "dumps",
    "loads",
    "save",
    "load",
]

DEFAULT_ORDER_TOL = 1e-10


class TableauFormatError(ValueError):
    """Raised when a tableau document is malformed."""


class UnknownSchemeError(KeyError):
    """Raised for a scheme identifier that is not in the catalog."""


def _frozen(x, ndim: int) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != ndim:
        raise TableauFormatError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """The ``(A, b, c)`` data of an ``s``-stage Runge-Kutta scheme.

    Arrays are copied and made read-only on construction, so instances can be
    shared freely.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = ""

    def __post_init__(self):
        A = _frozen(self.A, 2)
        b = _frozen(self.b, 1)
        c = _frozen(self.c, 1)
        s = b.shape[0]
        if A.shape != (s, s) or c.shape != (s,):
            raise TableauFormatError(
                f"inconsistent shapes: A{A.shape}, b{b.shape}, c{c.shape}"
            )
        if s < 1:
            raise TableauFormatError("a tableau needs at least one stage")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def s(self) -> int:
        return self.b.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ButcherTableau):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
        )

    def __hash__(self):
        return hash((self.name, self.A.tobytes(), self.b.tobytes(), self.c.tobytes()))

    def __repr__(self):
        return f"ButcherTableau(name={self.name!r}, s={self.s})"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate(tableau: ButcherTableau) -> ValidationResult:
    """Check the DIRK structure: zero strict upper triangle, positive diagonal.

    Collocation times outside ``[0, 1]`` only produce warnings, since several
    well-known schemes use them.
    """
    A, c, s = tableau.A, tableau.c, tableau.s
    violations = []
    warnings = []
    for name, arr in (("A", A), ("b", tableau.b), ("c", c)):
        if not np.all(np.isfinite(arr)):
            violations.append(f"{name} has non-finite entries")
    for i in range(s):
        for j in range(i + 1, s):
            if A[i, j] != 0.0:
                violations.append(f"a_{i + 1}{j + 1} = {A[i, j]:.6g} != 0 above the diagonal")
    for i in range(s):
        if not A[i, i] > 0.0:
            violations.append(f"a_{i + 1}{i + 1} ≤ 0 (a_{i + 1}{i + 1} = {A[i, i]:.6g})")
    for i in range(s):
        if not 0.0 <= c[i] <= 1.0:
            warnings.append(f"c_{i + 1} = {c[i]:.6g} outside [0, 1]")
    return ValidationResult(tuple(violations), tuple(warnings))


@dataclass(frozen=True)
class OrderReport:
    order1_row_sum_residual: float
    order1_weight_residual: float
    order2_residual: float
    order3_residual: float
    certified_order: int
    tol: float


def order_report(tableau: ButcherTableau, tol: float = DEFAULT_ORDER_TOL) -> OrderReport:
    """Residuals of the order one, two and three conditions.

    Only ``b^T 1 = 1``, ``A 1 = c``, ``b^T c = 1/2`` and ``b^T A c = 1/6`` are
    checked; these are necessary, not sufficient, for order three.
    """
    A, b, c = tableau.A, tableau.b, tableau.c
    row = float(np.max(np.abs(A.sum(axis=1) - c)))
    weight = abs(float(b.sum()) - 1.0)
    o2 = abs(float(b @ c) - 0.5)
    o3 = abs(float(b @ (A @ c)) - 1.0 / 6.0)
    certified = 0
    if row < tol and weight < tol:
        certified = 1
        if o2 < tol:
            certified = 2
            if o3 < tol:
                certified = 3
    return OrderReport(row, weight, o2, o3, certified, tol)


# --------------------------------------------------------------------------
# catalog


def alexander33_gamma() -> float:
    """Root of ``6g^3 - 18g^2 + 9g - 1`` in ``(1/6, 1/2)``."""
    return 1.0 - math.sqrt(2.0) * math.sin(2.0 * math.atan(math.sqrt(2.0) / 2.0) / 3.0)


def norsett34_gamma(variant: int) -> float:
    """Roots of ``g^3 - 3/2 g^2 + 1/2 g - 1/24``; variant 1 is Crouzeix-Raviart."""
    r3 = math.sqrt(3.0) / 3.0
    if variant == 1:
        return r3 * math.cos(math.pi / 18.0) + 0.5
    if variant == 2:
        return 0.5 - r3 * math.sin(2.0 * math.pi / 9.0)
    if variant == 3:
        return 0.5 - r3 * math.sin(math.pi / 9.0)
    raise UnknownSchemeError(f"norsett34 variant must be 1, 2 or 3, got {variant!r}")


def _alexander22() -> ButcherTableau:
    g = 1.0 - math.sqrt(2.0) / 2.0
    return ButcherTableau(
        [[g, 0.0], [1.0 - g, g]], [1.0 - g, g], [g, 1.0], name="alexander22"
    )


def _butcher_burrage22(variant: str) -> ButcherTableau:
    if variant == "plus":
        g = 1.0 + math.sqrt(2.0) / 2.0
    elif variant == "minus":
        g = 1.0 - math.sqrt(2.0) / 2.0
    else:
        raise UnknownSchemeError(f"butcher_burrage22 variant must be plus/minus, got {variant!r}")
    return ButcherTableau(
        [[g, 0.0], [1.0 - 2.0 * g, g]],
        [0.5, 0.5],
        [g, 1.0 - g],
        name=f"butcher_burrage22-{variant}",
    )


def _kraaijevanger_spijker22() -> ButcherTableau:
    return ButcherTableau(
        [[0.5, 0.0], [-0.5, 2.0]], [-0.5, 1.5], [0.5, 1.5], name="kraaijevanger_spijker22"
    )


def _crouzeix23() -> ButcherTableau:
    g = math.sqrt(3.0) / 6.0
    return ButcherTableau(
        [[0.5 + g, 0.0], [-2.0 * g, 0.5 + g]],
        [0.5, 0.5],
        [0.5 + g, 0.5 - g],
        name="crouzeix23",
    )


def _alexander33() -> ButcherTableau:
    g = alexander33_gamma()
    b1 = -1.5 * g * g + 4.0 * g - 0.25
    b2 = 1.5 * g * g - 5.0 * g + 1.25
    return ButcherTableau(
        [[g, 0.0, 0.0], [(1.0 - g) / 2.0, g, 0.0], [b1, b2, g]],
        [b1, b2, g],
        [g, (1.0 + g) / 2.0, 1.0],
        name="alexander33",
    )


def _norsett34(variant: int) -> ButcherTableau:
    g = norsett34_gamma(variant)
    d = 1.0 / (6.0 * (1.0 - 2.0 * g) ** 2)
    return ButcherTableau(
        [[g, 0.0, 0.0], [0.5 - g, g, 0.0], [2.0 * g, 1.0 - 4.0 * g, g]],
        [d, 1.0 - 2.0 * d, d],
        [g, 0.5, 1.0 - g],
        name=f"norsett34-{variant}",
    )


_BUILDERS = {
    "alexander22": _alexander22,
    "butcher_burrage22-plus": lambda: _butcher_burrage22("plus"),
    "butcher_burrage22-minus": lambda: _butcher_burrage22("minus"),
    "kraaijevanger_spijker22": _kraaijevanger_spijker22,
    "crouzeix23": _crouzeix23,
    "alexander33": _alexander33,
    "norsett34-1": lambda: _norsett34(1),
    "norsett34-2": lambda: _norsett34(2),
    "norsett34-3": lambda: _norsett34(3),
}

#: Every catalog identifier, one per concrete tableau.
CATALOG_IDS: tuple[str, ...] = tuple(_BUILDERS)


def catalog(scheme_id: str, variant: str | int | None = None) -> ButcherTableau:
    """Look up a named scheme.

    ``variant`` selects the root for the parametrized families and may also be
    given inline, e.g. ``catalog("norsett34-1")`` or
    ``catalog("butcher_burrage22", "minus")``.
    """
    key = scheme_id.strip().lower()
    if variant is not None:
        key = f"{key}-{str(variant).lower()}"
    for alias, canonical in (("norsett34_", "norsett34-"), ("butcher_burrage22_", "butcher_burrage22-")):
        if key.startswith(alias):
            key = canonical + key[len(alias):]
    key = key.replace("norsett34-gamma", "norsett34-")
    try:
        return _BUILDERS[key]()
    except KeyError:
        raise UnknownSchemeError(
            f"unknown scheme {scheme_id!r}; known: {', '.join(CATALOG_IDS)}"
        ) from None


# --------------------------------------------------------------------------
# file format


def to_dict(tableau: ButcherTableau) -> dict:
    return {
        "name": tableau.name,
        "s": tableau.s,
        "A": tableau.A.tolist(),
        "b": tableau.b.tolist(),
        "c": tableau.c.tolist(),
    }


def _real(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise TableauFormatError(f"{where}: expected a number, got {x!r}")
    x = float(x)
    if not math.isfinite(x):
        raise TableauFormatError(f"{where}: non-finite value")
    return x


def from_dict(doc: dict) -> ButcherTableau:
    if not isinstance(doc, dict):
        raise TableauFormatError("tableau document must be a JSON object")
    missing = {"s", "A", "b", "c"} - set(doc)
    if missing:
        raise TableauFormatError(f"missing keys: {sorted(missing)}")
    s = doc["s"]
    if isinstance(s, bool) or not isinstance(s, int) or s < 1:
        raise TableauFormatError(f"s must be a positive integer, got {s!r}")
    A, b, c = doc["A"], doc["b"], doc["c"]
    if not isinstance(A, list) or len(A) != s:
        raise TableauFormatError(f"A must have {s} rows")
    rows = []
    for i, row in enumerate(A):
        if not isinstance(row, list) or len(row) != s:
            raise TableauFormatError(f"A row {i + 1} must list all {s} entries")
        rows.append([_real(x, f"A[{i}][{j}]") for j, x in enumerate(row)])
    for key, vec in (("b", b), ("c", c)):
        if not isinstance(vec, list) or len(vec) != s:
            raise TableauFormatError(f"{key} must have length {s}")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise TableauFormatError("name must be a string")
    return ButcherTableau(
        rows,
        [_real(x, f"b[{i}]") for i, x in enumerate(b)],
        [_real(x, f"c[{i}]") for i, x in enumerate(c)],
        name=name,
    )


def _reject_constant(token):
    raise TableauFormatError(f"non-finite number {token!r} is not allowed")


def dumps(tableau: ButcherTableau) -> str:
    return json.dumps(to_dict(tableau), indent=2)


def loads(text: str) -> ButcherTableau:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise TableauFormatError(f"invalid JSON: {exc}") from exc
    return from_dict(doc)


def save(tableau: ButcherTableau, path) -> None:
    Path(path).write_text(dumps(tableau) + "\n")


def load(path) -> ButcherTableau:
    return loads(Path(path).read_text())
