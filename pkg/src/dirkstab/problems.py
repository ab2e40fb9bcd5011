"""Finite-dimensional evolution problems ``du/dt = f(t) - A(u)``.

Each problem carries its operator, the inner product standing in for the
pivot space, and surrogates for the energy norm ``||.||`` and its dual norm
``||.||_*``. Dual vectors are represented in the same coordinates as states,
so ``<g, w>`` is just ``pairing(g, w)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "CoercivityProfile",
    "EvolutionProblem",
    "heat_1d",
    "skew_rotation",
    "generic_system",
    "cubic_reaction_diffusion",
    "scalar_decay",
    "manufactured",
    "sine_decay_solution",
    "smooth_scalar_solution",
    "parse_problem",
    "PROBLEM_IDS",
]

Vector = np.ndarray


@dataclass(frozen=True)
class CoercivityProfile:
    """``<A(w), w> >= C1 ||w||^p`` and ``||A(w)||_* <= C3(|w|) ||w||^(p/q')``.

    ``band`` restricts the range of ``|w|`` over which an empirically
    calibrated ``C3`` is claimed to hold; ``None`` means everywhere.
    """

    p: float
    q: float
    C1: float
    C3: Callable[[float], float]
    band: Optional[tuple[float, float]] = None

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q_conj(self) -> float:
        return self.q / (self.q - 1.0)

    @property
    def C_A(self) -> float:
        return self.C1 / self.p_conj

    @property
    def C_f(self) -> float:
        return 1.0 / (self.p_conj * self.C1 ** (1.0 / (self.p - 1.0)))


def _zero_forcing(dim: int) -> Callable[[float], Vector]:
    zero = np.zeros(dim)
    zero.setflags(write=False)
    return lambda t: zero


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    """An operator ``A``, forcing ``f`` and the norms used to audit a run.

    ``matrix`` is set for linear problems (``A(u) = matrix @ u``) so stage
    systems can be factored; ``jacobian`` is used by Newton otherwise.
    The pairing is ``weight * (w . v)``.
    """

    name: str
    dim: int
    apply_A: Callable[[Vector], Vector]
    v_norm: Callable[[Vector], float]
    dual_norm: Callable[[Vector], float]
    structure: str
    weight: float = 1.0
    matrix: Optional[np.ndarray] = None
    jacobian: Optional[Callable[[Vector], np.ndarray]] = None
    forcing: Optional[Callable[[float], Vector]] = None
    profile: Optional[CoercivityProfile] = None
    params: dict = field(default_factory=dict)

    @property
    def linear(self) -> bool:
        return self.matrix is not None

    @property
    def has_forcing(self) -> bool:
        return self.forcing is not None

    def pairing(self, w: Vector, v: Vector) -> float:
        return self.weight * float(np.dot(w, v))

    def norm(self, u: Vector) -> float:
        return math.sqrt(max(self.pairing(u, u), 0.0))

    def energy(self, u: Vector) -> float:
        return 0.5 * self.pairing(u, u)

    def f(self, t: float) -> Vector:
        if self.forcing is None:
            return np.zeros(self.dim)
        return np.asarray(self.forcing(t), dtype=float)

    def slope(self, t: float, v: Vector) -> Vector:
        return self.f(t) - self.apply_A(v)

    def with_forcing(self, forcing: Optional[Callable[[float], Vector]]) -> "EvolutionProblem":
        return replace(self, forcing=forcing)


def _euclid(u: Vector) -> float:
    return float(np.linalg.norm(u))


def _stiffness(N: int) -> np.ndarray:
    return 2.0 * np.eye(N) - np.eye(N, k=1) - np.eye(N, k=-1)


def _grid(N: int) -> tuple[float, np.ndarray]:
    h = 1.0 / (N + 1)
    return h, h * np.arange(1, N + 1)


def _gradient_norm(h: float) -> Callable[[Vector], float]:
    def v_norm(u):
        padded = np.concatenate(([0.0], np.asarray(u, dtype=float), [0.0]))
        grad = np.diff(padded) / h
        return math.sqrt(h * float(grad @ grad))

    return v_norm


def _riesz_dual_norm(G: np.ndarray, h: float) -> Callable[[Vector], float]:
    # ||g||_* = sup <g, w> / ||w|| with <g, w> = h g.w and ||w||^2 = h w.Gw
    factor = cho_factor(G)

    def dual_norm(g):
        g = np.asarray(g, dtype=float)
        return math.sqrt(max(h * float(g @ cho_solve(factor, g)), 0.0))

    return dual_norm


def heat_1d(N: int, K0: float = 1.0) -> EvolutionProblem:
    """Linear heat equation on ``(0, 1)``, homogeneous Dirichlet, ``N`` interior nodes.

    Uses the ``h``-weighted inner product and the discrete ``H^1_0``
    seminorm, so ``<A u, u> = K0 ||u||^2`` exactly (``C1 = C3 = K0``).
    """
    if int(N) != N or N < 1:
        raise ValueError(f"heat_1d needs an integer N >= 1, got {N!r}")
    if not K0 > 0:
        raise ValueError(f"heat_1d needs K0 > 0, got {K0!r}")
    N = int(N)
    h, _ = _grid(N)
    G = _stiffness(N) / h**2
    M = K0 * G
    M.setflags(write=False)
    profile = CoercivityProfile(p=2.0, q=2.0, C1=float(K0), C3=lambda r, K0=float(K0): K0)
    return EvolutionProblem(
        name="heat",
        dim=N,
        apply_A=lambda u: M @ u,
        v_norm=_gradient_norm(h),
        dual_norm=_riesz_dual_norm(G, h),
        structure="symmetric_positive",
        weight=h,
        matrix=M,
        jacobian=lambda u: M,
        profile=profile,
        params={"N": N, "K0": float(K0), "h": h},
    )


def _rotation_blocks(N: int, omega: float) -> np.ndarray:
    S = np.zeros((N, N))
    for k in range(0, N, 2):
        S[k, k + 1] = -omega
        S[k + 1, k] = omega
    return S


def skew_rotation(N: int = 2, omega: float = 1.0) -> EvolutionProblem:
    """Decoupled planar rotations; ``<A u, v> = -<A v, u>``."""
    if int(N) != N or N < 2 or N % 2:
        raise ValueError(f"skew_rotation needs an even N >= 2, got {N!r}")
    N = int(N)
    S = _rotation_blocks(N, float(omega))
    S.setflags(write=False)
    return EvolutionProblem(
        name="skew",
        dim=N,
        apply_A=lambda u: S @ u,
        v_norm=_euclid,
        dual_norm=_euclid,
        structure="skew",
        matrix=S,
        jacobian=lambda u: S,
        params={"N": N, "omega": float(omega)},
    )


def generic_system(N: int = 4, omega: float = 1.0, epsilon: float = 0.0, K0: float = 1.0) -> EvolutionProblem:
    """Skew rotation plus ``epsilon`` times a positive diagonal damping.

    The damping entries are the eigenvalues ``K0 (2 - 2 cos(k pi h)) / h^2``
    of the one-dimensional heat operator on ``N`` nodes.
    """
    if int(N) != N or N < 2 or N % 2:
        raise ValueError(f"generic_system needs an even N >= 2, got {N!r}")
    if not epsilon >= 0:
        raise ValueError(f"generic_system needs epsilon >= 0, got {epsilon!r}")
    if not K0 > 0:
        raise ValueError(f"generic_system needs K0 > 0, got {K0!r}")
    N = int(N)
    h, _ = _grid(N)
    k = np.arange(1, N + 1)
    D = np.diag(K0 * (2.0 - 2.0 * np.cos(k * np.pi * h)) / h**2)
    M = _rotation_blocks(N, float(omega)) + epsilon * D
    M.setflags(write=False)
    return EvolutionProblem(
        name="generic",
        dim=N,
        apply_A=lambda u: M @ u,
        v_norm=_euclid,
        dual_norm=_euclid,
        structure=f"generic({float(epsilon):g})",
        matrix=M,
        jacobian=lambda u: M,
        params={"N": N, "omega": float(omega), "epsilon": float(epsilon), "K0": float(K0)},
    )


def _calibrate_envelope(A, v_norm, dual_norm, pair, N, x, band, rng) -> float:
    lo, hi = band
    dirs = [np.sin(k * np.pi * x) for k in range(1, min(N, 6) + 1)]
    dirs += list(rng.standard_normal((24, N)))
    worst = 0.0
    for d in dirs:
        d = d / math.sqrt(pair(d, d))
        for r in np.geomspace(lo, hi, 25):
            w = r * d
            bound = (1.0 + r ** (5.0 / 3.0)) * v_norm(w) ** (4.0 / 3.0)
            worst = max(worst, dual_norm(A(w)) / bound)
    return worst


def cubic_reaction_diffusion(N: int, K0: float = 1.0, band: tuple[float, float] = (0.1, 10.0)) -> EvolutionProblem:
    """Heat operator plus the monotone reaction ``u^3``.

    ``p = 2``, ``q = 3``, ``C1 = K0``. The growth function is the envelope
    ``C3(r) = C_env (1 + r^(5/3))`` with ``C_env`` sampled once per instance;
    it is only claimed for ``|w|`` inside ``band``.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"cubic_reaction_diffusion needs an integer N >= 2, got {N!r}")
    if not K0 > 0:
        raise ValueError(f"cubic_reaction_diffusion needs K0 > 0, got {K0!r}")
    N = int(N)
    h, x = _grid(N)
    G = _stiffness(N) / h**2
    K = K0 * G
    K.setflags(write=False)

    def apply_A(u):
        u = np.asarray(u, dtype=float)
        return K @ u + u**3

    def jacobian(u):
        return K + np.diag(3.0 * np.asarray(u, dtype=float) ** 2)

    v_norm = _gradient_norm(h)
    dual_norm = _riesz_dual_norm(G, h)
    pair = lambda a, b: h * float(a @ b)
    c_env = 1.25 * _calibrate_envelope(
        apply_A, v_norm, dual_norm, pair, N, x, band, np.random.default_rng(20221)
    )
    profile = CoercivityProfile(
        p=2.0, q=3.0, C1=float(K0),
        C3=lambda r, c=c_env: c * (1.0 + r ** (5.0 / 3.0)),
        band=band,
    )
    return EvolutionProblem(
        name="cubic",
        dim=N,
        apply_A=apply_A,
        v_norm=v_norm,
        dual_norm=dual_norm,
        structure="nonlinear",
        weight=h,
        jacobian=jacobian,
        profile=profile,
        params={"N": N, "K0": float(K0), "h": h, "C_env": c_env},
    )


def scalar_decay(a: float = 1.0) -> EvolutionProblem:
    """The scalar test equation ``u' = f - a u`` with ``a >= 0``."""
    if not a >= 0:
        raise ValueError(f"scalar_decay needs a >= 0, got {a!r}")
    M = np.array([[float(a)]])
    M.setflags(write=False)
    profile = None
    if a > 0:
        profile = CoercivityProfile(p=2.0, q=2.0, C1=float(a), C3=lambda r, a=float(a): a)
    return EvolutionProblem(
        name="scalar",
        dim=1,
        apply_A=lambda u: M @ u,
        v_norm=_euclid,
        dual_norm=_euclid,
        structure="symmetric_positive",
        matrix=M,
        jacobian=lambda u: M,
        profile=profile,
        params={"a": float(a)},
    )


# --------------------------------------------------------------------------
# manufactured solutions


def manufactured(problem: EvolutionProblem, u_exact, du_exact) -> EvolutionProblem:
    """Attach ``f(t) = A(u_exact(t)) + u_exact'(t)`` so ``u_exact`` solves the ODE."""

    def forcing(t):
        return problem.apply_A(np.asarray(u_exact(t), dtype=float)) + np.asarray(du_exact(t), dtype=float)

    return problem.with_forcing(forcing)


def sine_decay_solution(problem: EvolutionProblem, rate: float = 1.0):
    """``u(x, t) = sin(pi x) exp(-rate t)`` sampled at the grid nodes."""
    N = problem.dim
    _, x = _grid(N)
    shape = np.sin(np.pi * x)
    return (lambda t: shape * math.exp(-rate * t)), (lambda t: -rate * shape * math.exp(-rate * t))


def smooth_scalar_solution():
    """``u(t) = 1 + sin(t) / 2`` for one-dimensional problems."""
    return (lambda t: np.array([1.0 + 0.5 * math.sin(t)])), (lambda t: np.array([0.5 * math.cos(t)]))


# --------------------------------------------------------------------------
# CLI-style identifiers, e.g. "skew:N=2,omega=1"

_FACTORIES = {
    "heat": (heat_1d, {"N": int, "K0": float}),
    "skew": (skew_rotation, {"N": int, "omega": float}),
    "generic": (generic_system, {"N": int, "omega": float, "epsilon": float, "K0": float}),
    "cubic": (cubic_reaction_diffusion, {"N": int, "K0": float}),
    "scalar": (scalar_decay, {"a": float}),
}

PROBLEM_IDS = tuple(_FACTORIES)


def parse_problem(spec: str) -> EvolutionProblem:
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name not in _FACTORIES:
        raise ValueError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_IDS)}")
    factory, types = _FACTORIES[name]
    kwargs = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in types:
            raise ValueError(f"bad parameter {item!r} for problem {name!r}; allowed: {', '.join(types)}")
        try:
            kwargs[key] = types[key](value)
        except ValueError:
            raise ValueError(f"parameter {key} expects {types[key].__name__}, got {value!r}") from None
    try:
        return factory(**kwargs)
    except TypeError as exc:
        raise ValueError(f"problem {name!r}: {exc}") from None
