"""Frozen reference values.

PRINTED values are reference constants, some given only to limited
precision; CLOSED values are exact algebraic forms evaluated in double
precision. Keys of ``nu_offdiag`` are (i, j) with i < j.
"""
import math

r2 = math.sqrt(2.0)
r3 = math.sqrt(3.0)

# ---------------------------------------------------------------- PRINTED
TWO_STAGE = {
    # gamma = 1 - sqrt(2)/2
    "butcher_burrage22-minus": dict(
        lam=[-r2 / 2, 1 + r2 / 2],
        delta=[0.5, 0.25],
        nu_diag=[1 - r2 / 2, 0.5],
        nu12=-0.5 + r2 / 2,
        nu=[0.5, 0.5],
        nu12_over_a11=r2 / 2,
        two_sqrt_delta=r2 / 2,
    ),
    # gamma = 1 + sqrt(2)/2
    "butcher_burrage22-plus": dict(
        lam=[r2 / 2, 1 - r2 / 2],
        delta=[0.5, 0.25],
        nu_diag=[r2 / 2 + 1, 0.5],
        nu12=-r2 / 2 - 0.5,
        nu=[0.5, 0.5],
        nu12_over_a11=-r2 / 2,
        two_sqrt_delta=r2 / 2,
    ),
    "crouzeix23": dict(
        lam=[3 * r3 / 2 - 1.5, 1.5 - r3 / 2],
        delta=[r3 - 1.5, r3 / 4],
        nu_diag=[1.0, 0.5],
        nu12=-0.5,
        nu=[0.5, 0.5],
        nu12_over_a11=r3 / 2 - 1.5,
        two_sqrt_delta=1.5 - r3 / 2,
    ),
    "alexander22": dict(
        lam=[0.0, 1.0],
        delta=[0.5, 0.5],
        nu_diag=[1 - r2 / 2, 1 - r2 / 2],
        nu12=r2 - 1,
        nu=[r2 / 2, 1 - r2 / 2],
    ),
    "kraaijevanger_spijker22": dict(
        lam=[-0.25, 0.75],
        delta=[3 / 8, 15 / 32],
        nu_diag=[7 / 16, 1.5],
        nu12=-15 / 16,
        nu=[-0.5, 1.5],
    ),
}

ALEXANDER22_SPECTRUM = sorted([0.0, (1 - r2) / 2, 3 * (1 + r2) / 2])

# 20-digit table for the gamma_1 Norsett scheme
NORSETT1 = dict(
    lam=[0.44562240728771388189, 1.0641777724759121408, 0.12061475842818323189],
    delta=[0.30128850285230865863, 0.48292586026102947830, 0.11334079845283873290],
    nu_diag=[0.94409386961162504966, 1.2422271989685591552, 0.12888640051572042236],
    nu_offdiag={(1, 2): -1.1863210685801842049, (1, 3): 0.37111359948427957763, (2, 3): -0.5},
    nu_approx=[0.12888, 0.74222, 0.12888],
)
NORSETT1_NONZERO_EIGENVALUE = 0.564309

ALEXANDER33 = dict(
    lam=[0.0, 0.0, 1.0],
    delta=[0.5, 0.5, 0.5],
    nu_diag_approx=[0.435866, 0.435866, 0.435866],
    nu_offdiag_approx={(1, 2): -0.153799, (1, 3): 0.926429, (2, 3): -1.080229},
    nu_approx=[1.2084966, -0.644363, 0.43586652],
)

GAMMAS = dict(
    alexander33=0.4358665,
    norsett1=1.068579021,
    norsett2=0.1288864005,
    norsett3=0.3025345781,
)

REMARKABLE = {"butcher_burrage22-plus", "butcher_burrage22-minus", "crouzeix23", "norsett34-1"}
NOT_REMARKABLE = {"alexander22", "kraaijevanger_spijker22", "alexander33", "norsett34-2", "norsett34-3"}

# ---------------------------------------------------------------- CLOSED
ALEXANDER22_GAMMA = 1 - r2 / 2
# Gram matrix of Q for alexander22 over (u, v1, v2):
# Q = 1/2|v1-u|^2 + 1/2|v2-v1|^2 - sqrt(2)(v1-u, v2-v1)
ALEXANDER22_Q = [
    [0.5, -0.5 - r2 / 2, r2 / 2],
    [-0.5 - r2 / 2, 1 + r2, -0.5 - r2 / 2],
    [r2 / 2, -0.5 - r2 / 2, 0.5],
]
