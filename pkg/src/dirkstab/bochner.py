"""Discrete Bochner-norm bookkeeping and a posteriori audits of a run.

All weights are fixed to ``omega_i = gamma_i = nu_i`` and the constants come
from the Young split of the forcing term,
``C_A = C1 / p'`` and ``C_f = 1 / (p' C1^(1/(p-1)))``.
Every inequality is reported as a slack ``RHS - LHS`` together with a
normalized version ``(RHS - LHS) / max(|RHS|, |LHS|)`` (0 if both vanish).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .integrator import RunResult
from .problems import CoercivityProfile, EvolutionProblem
from .stability import EnergyCoefficients, certify, energy_coefficients
from .tableau import order_report

__all__ = [
    "SLACK_TOL",
    "TELESCOPE_TOL",
    "BochnerError",
    "BochnerAudit",
    "StageBoundReport",
    "DerivativeEstimate",
    "normalized_slack",
    "audit",
    "stage_bound_check",
    "derivative_estimate_check",
    "audit_report",
]

SLACK_TOL = 1e-9
TELESCOPE_TOL = 1e-12


class BochnerError(ValueError):
    """Raised when an estimate's hypotheses are not met."""


def normalized_slack(rhs: float, lhs: float) -> float:
    scale = max(abs(rhs), abs(lhs))
    if scale == 0.0:
        return 0.0
    return (rhs - lhs) / scale


def _require_profile(problem: EvolutionProblem) -> CoercivityProfile:
    if problem.profile is None:
        raise BochnerError(
            f"problem {problem.name!r} has no coercivity profile; Bochner estimates are inapplicable"
        )
    return problem.profile


@dataclass
class BochnerAudit:
    p: float
    q: float
    C_A: float
    C_f: float
    omega: np.ndarray
    gamma: np.ndarray
    mu: float
    linf_H: float
    stage_V_integral: float
    forcing_integral: float
    forcing_integral_qconj: float
    derivative_integral: float
    frakC3: float
    max_stage_norm: float
    stages_in_band: bool
    step_slacks: np.ndarray = field(repr=False)
    step_normalized_slacks: np.ndarray = field(repr=False)
    global_rhs: float = 0.0
    global_lhs: float = 0.0
    global_bound_slack: float = 0.0
    global_normalized_slack: float = 0.0
    telescoped_slack: float = 0.0
    telescoping_gap: float = 0.0
    literal_global_slack: float = 0.0
    derivative_bound_slack: float = math.nan
    derivative_normalized_slack: float = math.nan

    @property
    def min_step_normalized_slack(self) -> float:
        if self.step_normalized_slacks.size == 0:
            return 0.0
        return float(np.min(self.step_normalized_slacks))

    @property
    def per_step_pass(self) -> bool:
        return self.min_step_normalized_slack >= -SLACK_TOL

    @property
    def global_pass(self) -> bool:
        return self.global_normalized_slack >= -SLACK_TOL

    @property
    def telescoping_pass(self) -> bool:
        scale = max(1.0, abs(self.global_rhs))
        return self.telescoping_gap <= TELESCOPE_TOL * scale

    @property
    def derivative_pass(self) -> bool:
        if math.isnan(self.derivative_normalized_slack):
            return False
        return self.derivative_normalized_slack >= -SLACK_TOL


def _stage_arrays(result: RunResult):
    led = result.ledgers
    taus = np.array([l.tau_n for l in led])
    V = np.array([l.stage_states for l in led]) if led else np.zeros((0, result.tableau.s, result.problem.dim))
    fs = np.array([l.stage_forcing for l in led]) if led else np.zeros_like(V)
    return taus, V, fs


def audit(result: RunResult, problem: EvolutionProblem | None = None,
          coeffs: EnergyCoefficients | None = None) -> BochnerAudit:
    """Accumulate the discrete norms of ``result`` and check the stability bounds.

    The per-step bound is
    ``½|u+|² + C_A τ Σ ω_i ||v_i||^p <= ½|u|² + C_f τ Σ γ_i ||f_i||_*^p'``.
    The global bound is checked along the run: for every ``m`` the partial
    sums up to ``m`` must satisfy it with ``½|u_m|²`` on the left.
    """
    problem = problem if problem is not None else result.problem
    profile = _require_profile(problem)
    tableau = result.tableau
    verdict = certify(tableau)
    if not verdict.remarkable:
        raise BochnerError("Bochner audit requires dissipative balance (scheme is not remarkably stable)")
    coeffs = coeffs if coeffs is not None else energy_coefficients(tableau)
    nu = np.asarray(coeffs.nu, dtype=float)
    p, q = profile.p, profile.q
    pc, qc = profile.p_conj, profile.q_conj
    C_A, C_f = profile.C_A, profile.C_f

    taus, V, fs = _stage_arrays(result)
    n_steps, s = len(taus), tableau.s
    vnorm = np.array([[problem.v_norm(V[n, i]) for i in range(s)] for n in range(n_steps)]).reshape(n_steps, s)
    fnorm = np.array([[problem.dual_norm(fs[n, i]) for i in range(s)] for n in range(n_steps)]).reshape(n_steps, s)
    hnorm = np.array([[problem.norm(V[n, i]) for i in range(s)] for n in range(n_steps)]).reshape(n_steps, s)

    v_terms = taus * ((vnorm ** p) @ nu)
    f_terms = taus * ((fnorm ** pc) @ nu)
    fq_terms = taus * ((fnorm ** qc) @ nu)
    energies = np.array([problem.energy(u) for u in result.states])

    lhs_step = energies[1:] + C_A * v_terms
    rhs_step = energies[:-1] + C_f * f_terms
    slacks = rhs_step - lhs_step
    norm_slacks = np.array([normalized_slack(r, l) for r, l in zip(rhs_step, lhs_step)])

    # running form of the global bound
    V_part = np.concatenate(([0.0], np.cumsum(v_terms)))
    F_part = np.concatenate(([0.0], np.cumsum(f_terms)))
    lhs_run = energies + C_A * V_part
    rhs_run = energies[0] + C_f * F_part
    k = int(np.argmin(rhs_run - lhs_run))
    g_rhs, g_lhs = float(rhs_run[k]), float(lhs_run[k])
    telescoped = float(np.sum(slacks))
    direct_final = float(rhs_run[-1] - lhs_run[-1])
    literal = float(rhs_run[-1] - (np.max(energies) + C_A * V_part[-1]))

    deriv = np.array([
        problem.dual_norm((result.states[n + 1] - result.states[n]) / taus[n]) for n in range(n_steps)
    ])
    C3_vals = [profile.C3(h) for h in hnorm.ravel()]
    frakC3 = float(max(C3_vals)) if C3_vals else 0.0
    max_h = float(hnorm.max()) if hnorm.size else 0.0
    if profile.band is None or hnorm.size == 0:
        in_band = True
    else:
        lo, hi = profile.band
        in_band = bool(np.all((hnorm >= lo) & (hnorm <= hi)))

    out = BochnerAudit(
        p=p, q=q, C_A=C_A, C_f=C_f,
        omega=nu.copy(), gamma=nu.copy(), mu=float(np.min(nu)),
        linf_H=float(np.max(energies)),
        stage_V_integral=float(np.sum(v_terms)),
        forcing_integral=float(np.sum(f_terms)),
        forcing_integral_qconj=float(np.sum(fq_terms)),
        derivative_integral=float(np.sum(taus * deriv ** qc)),
        frakC3=frakC3,
        max_stage_norm=max_h,
        stages_in_band=in_band,
        step_slacks=slacks,
        step_normalized_slacks=norm_slacks,
        global_rhs=g_rhs,
        global_lhs=g_lhs,
        global_bound_slack=g_rhs - g_lhs,
        global_normalized_slack=normalized_slack(g_rhs, g_lhs),
        telescoped_slack=telescoped,
        telescoping_gap=abs(telescoped - direct_final),
        literal_global_slack=literal,
    )
    if p == q and not math.isclose(out.forcing_integral, out.forcing_integral_qconj, rel_tol=1e-14, abs_tol=0.0):
        raise AssertionError("forcing norms with p' and q' differ although p = q")
    try:
        d = derivative_estimate_check(result, out)
        out.derivative_bound_slack = d.slack
        out.derivative_normalized_slack = d.normalized_slack
    except BochnerError:
        pass
    return out


@dataclass(frozen=True)
class StageBoundReport:
    max_stage_norm: float
    max_state_norm: float
    kappa1: float
    frakC3: float
    step_slacks: np.ndarray = field(repr=False)
    step_normalized_slacks: np.ndarray = field(repr=False)
    global_slacks: np.ndarray = field(repr=False)
    global_normalized_slacks: np.ndarray = field(repr=False)

    @property
    def min_normalized_slack(self) -> float:
        vals = np.concatenate((self.step_normalized_slacks, self.global_normalized_slacks))
        return float(np.min(vals)) if vals.size else 0.0

    @property
    def passed(self) -> bool:
        return self.min_normalized_slack >= -SLACK_TOL


def stage_bound_check(result: RunResult, problem: EvolutionProblem | None = None) -> StageBoundReport:
    """First-stage energy bound, per step and against global data.

    Per step:
    ``½|v1|² + ½|v1-u|² + C1 a11 τ ||v1||^p / p' <= ½|u|² + a11 τ ||f1||_*^p' / (p' C1^(1/(p-1)))``.
    Globally the right side is replaced by ``½ max |u_n|² + κ1 ||f||^p'`` with
    ``κ1 = a11 / (p' C1^(1/(p-1)) ν1)``, the ``1/ν1`` turning the single stage
    term into the weighted partition norm.
    """
    problem = problem if problem is not None else result.problem
    profile = _require_profile(problem)
    p, pc, C1 = profile.p, profile.p_conj, profile.C1
    a11 = float(result.tableau.A[0, 0])
    coeffs = result.coeffs if result.coeffs is not None else energy_coefficients(result.tableau)
    nu = np.asarray(coeffs.nu, dtype=float)
    if nu[0] <= 0:
        raise BochnerError("stage bound needs nu_1 > 0")
    young = 1.0 / (pc * C1 ** (1.0 / (p - 1.0)))
    kappa1 = a11 * young / nu[0]

    taus, V, fs = _stage_arrays(result)
    states = result.states
    n_steps = len(taus)
    energies = np.array([problem.energy(u) for u in states])
    f_norm_total = sum(
        taus[n] * sum(nu[i] * problem.dual_norm(fs[n, i]) ** pc for i in range(result.tableau.s))
        for n in range(n_steps)
    )
    rhs_global = float(np.max(energies)) + kappa1 * f_norm_total
    step_sl, step_ns, glob_sl, glob_ns = [], [], [], []
    for n in range(n_steps):
        v1, u = V[n, 0], states[n]
        lhs = problem.energy(v1) + problem.energy(v1 - u) + C1 * a11 * taus[n] / pc * problem.v_norm(v1) ** p
        rhs = energies[n] + a11 * taus[n] * young * problem.dual_norm(fs[n, 0]) ** pc
        step_sl.append(rhs - lhs)
        step_ns.append(normalized_slack(rhs, lhs))
        glob_sl.append(rhs_global - lhs)
        glob_ns.append(normalized_slack(rhs_global, lhs))
    stage_norms = [problem.norm(V[n, i]) for n in range(n_steps) for i in range(result.tableau.s)]
    max_stage = float(max(stage_norms)) if stage_norms else 0.0
    return StageBoundReport(
        max_stage_norm=max_stage,
        max_state_norm=float(max(problem.norm(u) for u in states)),
        kappa1=kappa1,
        frakC3=float(profile.C3(max_stage)),
        step_slacks=np.array(step_sl),
        step_normalized_slacks=np.array(step_ns),
        global_slacks=np.array(glob_sl),
        global_normalized_slacks=np.array(glob_ns),
    )


@dataclass(frozen=True)
class DerivativeEstimate:
    lhs: float
    rhs: float
    slack: float
    normalized_slack: float


def derivative_estimate_check(result: RunResult, aud: BochnerAudit) -> DerivativeEstimate:
    """Dual-norm bound on the discrete time derivative.

    ``[μ Σ τ ||(u+ - u)/τ||_*^q']^(1/q') <= (μ T)^((p'-q')/(p'q')) ||f||_{p'}``
    ``+ C3 [Σ τ Σ ω_i ||v_i||^p]^(1/q')`` with ``C3`` the run's realized
    maximum. Needs ``b >= 0`` and a consistent scheme.
    """
    tableau = result.tableau
    if order_report(tableau).certified_order < 1:
        raise BochnerError("derivative estimate needs a scheme of order at least 1")
    if np.any(tableau.b < 0):
        raise BochnerError("derivative estimate needs nonnegative weights b")
    pc, qc = aud.p / (aud.p - 1.0), aud.q / (aud.q - 1.0)
    T = float(np.sum(result.partition.tau[: len(result.ledgers)]))
    lhs = (aud.mu * aud.derivative_integral) ** (1.0 / qc)
    rhs = (aud.mu * T) ** ((pc - qc) / (pc * qc)) * aud.forcing_integral ** (1.0 / pc) \
        + aud.frakC3 * aud.stage_V_integral ** (1.0 / qc)
    return DerivativeEstimate(lhs, rhs, rhs - lhs, normalized_slack(rhs, lhs))


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, list):
        return [_jsonable(v) for v in x]
    return x


def audit_report(aud: BochnerAudit, stage: StageBoundReport | None = None) -> dict:
    """JSON-ready dict of every audit field plus pass/fail flags."""
    doc = {k: _jsonable(v) for k, v in asdict(aud).items() if k not in ("step_slacks", "step_normalized_slacks")}
    doc["min_step_normalized_slack"] = aud.min_step_normalized_slack
    doc["passes"] = {
        "per_step": aud.per_step_pass,
        "global": aud.global_pass,
        "telescoping": aud.telescoping_pass,
        "derivative": aud.derivative_pass,
    }
    if stage is not None:
        doc["stage_bound"] = {
            "max_stage_norm": stage.max_stage_norm,
            "max_state_norm": stage.max_state_norm,
            "kappa1": stage.kappa1,
            "frakC3": stage.frakC3,
            "min_normalized_slack": stage.min_normalized_slack,
        }
        doc["passes"]["stage_bound"] = stage.passed
    return doc
