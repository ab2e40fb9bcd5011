"""Energy-balance coefficients and remarkable-stability certification.

For a two- or three-stage DIRK tableau this module computes

* the extrapolation weights ``lambda = b^T A^{-1}``,
* the artificial-damping weights ``delta_i`` and the stage work weights
  ``nu_ij`` of the per-step energy identity,
* the dissipation form ``Q(u_n, v_1, ..., v_s)`` as a symmetric Gram matrix
  together with a nonnegativity certificate,

and combines them into a verdict. ``Q`` is stored so that
``Q(w_0, ..., w_s) = sum_ij q_ij (w_i, w_j)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tableau import ButcherTableau, validate

__all__ = [
    "UnsupportedStageCount",
    "ConditionInapplicable",
    "EnergyCoefficients",
    "QuadraticFormMatrix",
    "Check",
    "StabilityVerdict",
    "KappaAnalysis",
    "extrapolation_weights",
    "extrapolation_weights_closed_form",
    "energy_coefficients",
    "quadratic_form",
    "sufficient_nonnegativity_check",
    "certify",
    "kappa_analysis",
    "row_echelon_rank",
    "analysis_report",
    "format_report",
    "EIGEN_TOL",
    "DELTA_TOL",
    "NU_TOL",
]

EIGEN_TOL = 1e-10
DELTA_TOL = 1e-12
NU_TOL = 1e-12


class UnsupportedStageCount(ValueError):
    """Energy analysis is only available for two- and three-stage schemes."""

    def __init__(self, s: int):
        super().__init__(f"unsupported stage count s={s}; energy analysis needs s in {{2, 3}}")
        self.s = s


class ConditionInapplicable(ValueError):
    """The sufficient nonnegativity test does not apply to this input."""


def _require_supported(tableau: ButcherTableau) -> None:
    if tableau.s not in (2, 3):
        raise UnsupportedStageCount(tableau.s)


def extrapolation_weights(tableau: ButcherTableau) -> np.ndarray:
    """Solve ``A^T lambda = b`` by back substitution (``A`` is lower triangular).

    Then ``u_{n+1} = (1 - sum(lambda)) u_n + sum_i lambda_i v_{n,i}``.
    """
    A, b, s = tableau.A, tableau.b, tableau.s
    lam = np.zeros(s)
    for i in range(s - 1, -1, -1):
        acc = b[i] - sum(A[j, i] * lam[j] for j in range(i + 1, s))
        lam[i] = acc / A[i, i]
    return lam


def extrapolation_weights_closed_form(tableau: ButcherTableau) -> np.ndarray:
    """Explicit formulas for ``lambda`` when ``s`` is 2 or 3."""
    _require_supported(tableau)
    A, b = tableau.A, tableau.b
    if tableau.s == 2:
        a11, a21, a22 = A[0, 0], A[1, 0], A[1, 1]
        b1, b2 = b
        return np.array([b1 / a11 - b2 * a21 / (a22 * a11), b2 / a22])
    a11, a21, a22 = A[0, 0], A[1, 0], A[1, 1]
    a31, a32, a33 = A[2, 0], A[2, 1], A[2, 2]
    b1, b2, b3 = b
    lam1 = (
        b1 / a11
        - b2 * a21 / (a11 * a22)
        - b3 * a31 / (a11 * a33)
        + b3 * a32 * a21 / (a11 * a22 * a33)
    )
    lam2 = b2 / a22 - b3 * a32 / (a22 * a33)
    lam3 = b3 / a33
    return np.array([lam1, lam2, lam3])


@dataclass(frozen=True)
class EnergyCoefficients:
    """Coefficients of the per-step energy identity of one tableau.

    Indices in ``nu_offdiag`` are 1-based stage pairs ``(i, j)`` with ``i < j``.
    """

    s: int
    lam: np.ndarray
    delta: np.ndarray
    nu_diag: np.ndarray
    nu_offdiag: dict
    nu: np.ndarray

    @property
    def nu_total(self) -> float:
        return float(self.nu_diag.sum() + sum(self.nu_offdiag.values()))


def energy_coefficients(tableau: ButcherTableau) -> EnergyCoefficients:
    _require_supported(tableau)
    A = tableau.A
    lam = extrapolation_weights(tableau)
    if tableau.s == 2:
        l1, l2 = lam
        a11, a21, a22 = A[0, 0], A[1, 0], A[1, 1]
        delta = np.array([
            0.5 * (l1 + l2) * (2.0 - l1 - l2),
            0.5 * l2 * (2.0 - l2),
        ])
        nu11 = a11 * (l1 * (1.0 - l2) + l2 * (2.0 - l2))
        nu22 = a22 * l2
        nu12 = l2 * (a21 + a11 * (l1 + l2 - 2.0))
        nu_diag = np.array([nu11, nu22])
        off = {(1, 2): float(nu12)}
    else:
        l1, l2, l3 = lam
        a11, a21, a22 = A[0, 0], A[1, 0], A[1, 1]
        a31, a32, a33 = A[2, 0], A[2, 1], A[2, 2]
        delta = np.array([
            0.5 * (l1 + l2 + l3) * (2.0 - l1 - l2 - l3),
            0.5 * (l2 + l3) * (2.0 - l2 - l3),
            0.5 * l3 * (2.0 - l3),
        ])
        nu11 = a11 * (l1 * (1.0 - l2 - l3) + (2.0 - l2 - l3) * (l2 + l3))
        nu22 = a22 * (l2 * (1.0 - l3) + (2.0 - l3) * l3)
        nu33 = a33 * l3
        nu12 = a21 * (l2 * (1.0 - l3) + (2.0 - l3) * l3) + a11 * (
            l2 * (-2.0 + l1 + l2) + 2.0 * (-1.0 + l2) * l3 + l3 * l3
        )
        nu13 = l3 * (a31 + a11 * l1 + a21 * (-2.0 + l2 + l3))
        nu23 = l3 * (a32 + a22 * (-2.0 + l2 + l3))
        nu_diag = np.array([nu11, nu22, nu33])
        off = {(1, 2): float(nu12), (1, 3): float(nu13), (2, 3): float(nu23)}
    s = tableau.s
    nu = nu_diag.copy()
    for (i, j), val in off.items():
        nu[i - 1] += val
    return EnergyCoefficients(s, lam, delta, nu_diag, off, nu)


# --------------------------------------------------------------------------
# dissipation form


def _basis(s: int, i: int) -> np.ndarray:
    e = np.zeros(s + 1)
    e[i] = 1.0
    return e


def _q_terms(tableau: ButcherTableau, coeffs: EnergyCoefficients) -> list:
    """``Q`` as a list of ``(coef, x, y)`` meaning ``coef * (X x, X y)``.

    ``x`` and ``y`` are coefficient vectors over ``(u_n, v_1, ..., v_s)``,
    i.e. the increments the form is built from.
    """
    s, A = tableau.s, tableau.A
    e = [_basis(s, i) for i in range(s + 1)]
    d = [None] + [e[k] - e[k - 1] for k in range(1, s + 1)]
    terms = [(float(coeffs.delta[k - 1]), d[k], d[k]) for k in range(1, s + 1)]
    a11, a21, a22 = A[0, 0], A[1, 0], A[1, 1]
    nu12 = coeffs.nu_offdiag[(1, 2)]
    terms.append((-nu12 / a11, d[1], d[2]))
    if s == 3:
        nu13 = coeffs.nu_offdiag[(1, 3)]
        nu23 = coeffs.nu_offdiag[(2, 3)]
        terms.append((-nu13 / a11, d[1], e[3] - e[1]))
        terms.append((-nu23 / a22, e[2] - e[0], d[3]))
        terms.append((nu23 * a21 / (a11 * a22), d[1], d[3]))
    return terms


def row_echelon_rank(matrix: np.ndarray, tol: float) -> int:
    """Rank by Gaussian elimination with partial pivoting.

    A pivot counts only if its magnitude exceeds ``tol``.
    """
    M = np.array(matrix, dtype=float, copy=True)
    n_rows, n_cols = M.shape
    rank = 0
    for col in range(n_cols):
        if rank == n_rows:
            break
        p = rank + int(np.argmax(np.abs(M[rank:, col])))
        if abs(M[p, col]) <= tol:
            continue
        M[[rank, p]] = M[[p, rank]]
        M[rank + 1:] -= np.outer(M[rank + 1:, col] / M[rank, col], M[rank])
        rank += 1
    return rank


@dataclass(frozen=True)
class QuadraticFormMatrix:
    """Gram matrix of ``Q`` over ``(u_n, v_1, ..., v_s)`` plus certificates.

    ``rank_zero_count`` comes from row-echelon reduction; ``eigen_zero_count``
    is the independent count from the symmetric eigensolver.
    """

    q: np.ndarray
    eigenvalues: np.ndarray
    rank_zero_count: int
    eigen_zero_count: int
    nonnegative: bool
    eigen_tol: float
    terms: tuple = field(repr=False, default=())

    @property
    def size(self) -> int:
        return self.q.shape[0]

    def evaluate(self, states, pairing=None) -> float:
        """``sum_ij q_ij (w_i, w_j)`` for ``states = [u_n, v_1, ..., v_s]``."""
        X = np.asarray(states, dtype=float)
        if pairing is None:
            G = X @ X.T
        else:
            n = X.shape[0]
            G = np.empty((n, n))
            for i in range(n):
                for j in range(i, n):
                    G[i, j] = G[j, i] = pairing(X[i], X[j])
        return float(np.sum(self.q * G))

    def evaluate_increments(self, states, pairing=None) -> float:
        """Evaluate ``Q`` term by term from state increments."""
        X = np.asarray(states, dtype=float)
        pair = pairing if pairing is not None else (lambda a, b: float(a @ b))
        return float(sum(coef * pair(x @ X, y @ X) for coef, x, y in self.terms))


def quadratic_form(
    tableau: ButcherTableau,
    coeffs: EnergyCoefficients | None = None,
    eigen_tol: float = EIGEN_TOL,
) -> QuadraticFormMatrix:
    _require_supported(tableau)
    if coeffs is None:
        coeffs = energy_coefficients(tableau)
    terms = _q_terms(tableau, coeffs)
    n = tableau.s + 1
    q = np.zeros((n, n))
    for coef, x, y in terms:
        q += 0.5 * coef * (np.outer(x, y) + np.outer(y, x))
    scale = max(1.0, float(np.max(np.abs(q))))
    tol = eigen_tol * scale
    eig = np.linalg.eigvalsh(q)
    eigen_zero = int(np.sum(np.abs(eig) < tol))
    rank = row_echelon_rank(q, tol)
    nonneg = bool(eig[0] >= -tol)
    return QuadraticFormMatrix(
        q=q,
        eigenvalues=eig,
        rank_zero_count=n - rank,
        eigen_zero_count=eigen_zero,
        nonnegative=nonneg,
        eigen_tol=eigen_tol,
        terms=tuple(terms),
    )


def sufficient_nonnegativity_check(
    coeffs: EnergyCoefficients, tableau: ButcherTableau, tol: float = 1e-12
) -> bool:
    """Two-stage test ``|nu_12 / a_11| <= 2 sqrt(delta_1 delta_2)``.

    Sufficient, not necessary, for ``Q >= 0``.
    """
    if tableau.s != 2:
        raise ConditionInapplicable("condition inapplicable: only defined for s = 2")
    d1, d2 = coeffs.delta
    if d1 < -DELTA_TOL or d2 < -DELTA_TOL:
        raise ConditionInapplicable(
            f"condition inapplicable: needs delta_1, delta_2 >= 0 (got {d1:.6g}, {d2:.6g})"
        )
    ratio = abs(coeffs.nu_offdiag[(1, 2)] / tableau.A[0, 0])
    bound = 2.0 * math.sqrt(max(d1, 0.0)) * math.sqrt(max(d2, 0.0))
    return ratio <= bound + tol


# --------------------------------------------------------------------------
# verdict


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    passed: bool
    text: str
    decisive: bool = True


@dataclass(frozen=True)
class StabilityVerdict:
    remarkable: bool
    reasons: tuple[Check, ...]

    @property
    def failed(self) -> tuple[Check, ...]:
        return tuple(c for c in self.reasons if c.decisive and not c.passed)


def certify(
    tableau: ButcherTableau,
    eigen_tol: float = EIGEN_TOL,
    delta_tol: float = DELTA_TOL,
    nu_tol: float = NU_TOL,
) -> StabilityVerdict:
    """Remarkable stability: ``delta_i >= 0``, ``nu_i > 0`` and ``Q >= 0``."""
    _require_supported(tableau)
    coeffs = energy_coefficients(tableau)
    qf = quadratic_form(tableau, coeffs, eigen_tol)
    checks = []
    for i, d in enumerate(coeffs.delta, start=1):
        ok = bool(d >= -delta_tol)
        rel = "≥" if ok else "<"
        checks.append(Check(f"delta{i}", float(d), ok, f"δ{i} = {d:.6f} {rel} 0"))
    for i, v in enumerate(coeffs.nu, start=1):
        ok = bool(v > nu_tol)
        rel = ">" if ok else "≤"
        checks.append(Check(f"nu{i}", float(v), ok, f"ν{i} = {v:.6f} {rel} 0"))
    lo = float(qf.eigenvalues[0])
    checks.append(Check(
        "Q_nonnegative", lo, qf.nonnegative,
        f"Q {'nonnegative' if qf.nonnegative else 'indefinite'}: min eigenvalue {lo:.6g}"
        f", {qf.rank_zero_count} certified zero eigenvalue(s)",
    ))
    if tableau.s == 2:
        try:
            ok = sufficient_nonnegativity_check(coeffs, tableau)
            ratio = abs(coeffs.nu_offdiag[(1, 2)] / tableau.A[0, 0])
            bound = 2.0 * math.sqrt(max(coeffs.delta[0], 0.0) * max(coeffs.delta[1], 0.0))
            text = f"|ν12/a11| = {ratio:.6f} {'≤' if ok else '>'} 2√δ1√δ2 = {bound:.6f}"
            checks.append(Check("sufficient_condition", ratio - bound, ok, text, decisive=False))
        except ConditionInapplicable as exc:
            checks.append(Check("sufficient_condition", float("nan"), False, str(exc), decisive=False))
    remarkable = all(c.passed for c in checks if c.decisive)
    return StabilityVerdict(remarkable, tuple(checks))


# --------------------------------------------------------------------------
# partial damping for Alexander's two-stage scheme


@dataclass(frozen=True)
class KappaAnalysis:
    """Partial absorption of the off-diagonal work term by a free ``kappa``.

    ``q_kappa`` is the Gram matrix over ``(u_n, v_1, u_{n+1})``.
    ``absorbed_work_weights`` multiply ``<A v_1, v_1>`` and
    ``<A u_{n+1}, u_{n+1}>``; ``residual_coefficient`` multiplies the leftover
    ``-<A v_1, u_{n+1}>``. ``cauchy_schwarz_weights`` are the weights left
    after bounding that remainder for a symmetric nonnegative operator.
    """

    kappa: float
    gamma: float
    q_kappa: np.ndarray
    eigenvalues: np.ndarray
    absorbed_work_weights: tuple[float, float]
    residual_coefficient: float
    cauchy_schwarz_weights: tuple[float, float]
    q_kappa_nonnegative: bool

    def evaluate(self, u, v1, u_next, pairing=None) -> float:
        X = np.array([u, v1, u_next], dtype=float)
        if pairing is None:
            G = X @ X.T
        else:
            G = np.array([[pairing(a, b) for b in X] for a in X])
        return float(np.sum(self.q_kappa * G))


def kappa_analysis(kappa: float, eigen_tol: float = EIGEN_TOL) -> KappaAnalysis:
    g = 1.0 - math.sqrt(2.0) / 2.0
    d1 = np.array([-1.0, 1.0, 0.0])
    d2 = np.array([0.0, -1.0, 1.0])
    q = 0.5 * np.outer(d1, d1) + 0.5 * np.outer(d2, d2)
    q -= 0.5 * (kappa / g) * (np.outer(d1, d2) + np.outer(d2, d1))
    eig = np.linalg.eigvalsh(q)
    tol = eigen_tol * max(1.0, float(np.max(np.abs(q))))
    rest = 1.0 - 2.0 * g - kappa
    return KappaAnalysis(
        kappa=float(kappa),
        gamma=g,
        q_kappa=q,
        eigenvalues=eig,
        absorbed_work_weights=(g + kappa, g),
        residual_coefficient=rest,
        cauchy_schwarz_weights=(g + kappa - abs(rest) / 2.0, g - abs(rest) / 2.0),
        q_kappa_nonnegative=bool(eig[0] >= -tol),
    )


# --------------------------------------------------------------------------
# reports


def analysis_report(tableau: ButcherTableau, eigen_tol: float = EIGEN_TOL) -> dict:
    """JSON-ready certification report for one tableau."""
    _require_supported(tableau)
    coeffs = energy_coefficients(tableau)
    qf = quadratic_form(tableau, coeffs, eigen_tol)
    verdict = certify(tableau, eigen_tol=eigen_tol)
    return {
        "scheme": tableau.name,
        "s": tableau.s,
        "lambda": coeffs.lam.tolist(),
        "delta": coeffs.delta.tolist(),
        "nu_diag": coeffs.nu_diag.tolist(),
        "nu_offdiag": {f"{i}{j}": v for (i, j), v in coeffs.nu_offdiag.items()},
        "nu": coeffs.nu.tolist(),
        "nu_sum": coeffs.nu_total,
        "b_sum": float(tableau.b.sum()),
        "Q": {
            "matrix": qf.q.tolist(),
            "eigenvalues": qf.eigenvalues.tolist(),
            "rank_zero_count": qf.rank_zero_count,
            "nonnegative": qf.nonnegative,
        },
        "verdict": {
            "remarkable": verdict.remarkable,
            "reasons": [c.text for c in verdict.reasons],
        },
        "validation_warnings": list(validate(tableau).warnings),
    }


def _row(label: str, values) -> str:
    return f"  {label:<10}" + "".join(f"{v:>22.15g}" for v in values)


def format_report(report: dict) -> str:
    lines = [f"scheme: {report['scheme'] or '<unnamed>'} (s = {report['s']})"]
    lines.append(_row("lambda", report["lambda"]))
    lines.append(_row("delta", report["delta"]))
    lines.append(_row("nu_ii", report["nu_diag"]))
    off = report["nu_offdiag"]
    lines.append(f"  {'nu_ij':<10}" + "".join(f"{'(' + k + ')':>8}{v:>14.10g}" for k, v in off.items()))
    lines.append(_row("nu_i", report["nu"]))
    lines.append(f"  sum nu = {report['nu_sum']:.15g}   sum b = {report['b_sum']:.15g}")
    lines.append("  Q =")
    for row in report["Q"]["matrix"]:
        lines.append("    " + "".join(f"{v:>20.12g}" for v in row))
    lines.append(_row("sigma(Q)", report["Q"]["eigenvalues"]))
    lines.append(f"  certified zero eigenvalues: {report['Q']['rank_zero_count']}")
    for w in report.get("validation_warnings", []):
        lines.append(f"  warning: {w}")
    verdict = report["verdict"]
    lines.append("  verdict: " + ("remarkably stable" if verdict["remarkable"] else "NOT remarkably stable"))
    for r in verdict["reasons"]:
        lines.append(f"    - {r}")
    return "\n".join(lines)
