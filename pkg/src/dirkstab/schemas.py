"""JSON Schemas for the machine-readable CLI outputs."""
from __future__ import annotations

_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_vec = {"type": "array", "items": _num}

ANALYSIS = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "tableau analysis",
    "type": "object",
    "required": ["scheme", "s", "lambda", "delta", "nu_diag", "nu_offdiag", "nu",
                 "nu_sum", "b_sum", "Q", "verdict", "validation_warnings"],
    "properties": {
        "scheme": {"type": "string"},
        "s": {"type": "integer", "enum": [2, 3]},
        "lambda": _vec,
        "delta": _vec,
        "nu_diag": _vec,
        "nu_offdiag": {"type": "object", "patternProperties": {"^[0-9]{2}$": _num},
                       "additionalProperties": False},
        "nu": _vec,
        "nu_sum": _num,
        "b_sum": _num,
        "Q": {
            "type": "object",
            "required": ["matrix", "eigenvalues", "rank_zero_count", "nonnegative"],
            "properties": {
                "matrix": {"type": "array", "items": _vec},
                "eigenvalues": _vec,
                "rank_zero_count": {"type": "integer", "minimum": 0},
                "nonnegative": {"type": "boolean"},
            },
        },
        "verdict": {
            "type": "object",
            "required": ["remarkable", "reasons"],
            "properties": {
                "remarkable": {"type": "boolean"},
                "reasons": {"type": "array", "items": {"type": "string"}},
            },
        },
        "validation_warnings": {"type": "array", "items": {"type": "string"}},
    },
}

RUN_SUMMARY = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "run summary",
    "type": "object",
    "required": ["scheme", "problem", "steps_requested", "steps_completed", "T", "completed",
                 "initial_energy", "final_energy", "max_energy", "max_identity_residual",
                 "cumulative_identity_residual", "max_update_mismatch", "energy_nonincreasing",
                 "q_negative_steps", "residual_checks_pass", "failure", "bochner"],
    "properties": {
        "scheme": {"type": "string"},
        "problem": {"type": "string"},
        "steps_requested": {"type": "integer", "minimum": 1},
        "steps_completed": {"type": "integer", "minimum": 0},
        "T": _num,
        "completed": {"type": "boolean"},
        "initial_energy": _num,
        "final_energy": _num,
        "max_energy": _num,
        "max_identity_residual": _num_or_null,
        "cumulative_identity_residual": _num_or_null,
        "max_update_mismatch": _num,
        "energy_nonincreasing": {"type": "boolean"},
        "q_negative_steps": {"type": "integer", "minimum": 0},
        "residual_checks_pass": {"type": "boolean"},
        "failure": {"type": ["object", "null"]},
        "bochner": {
            "oneOf": [
                {"type": "null"},
                {"type": "object", "required": ["applicable"], "properties": {
                    "applicable": {"type": "boolean"},
                    "reason": {"type": "string"},
                    "passes": {"type": "object", "additionalProperties": {"type": "boolean"}},
                }},
            ]
        },
    },
}

CONVERGENCE = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "convergence study",
    "type": "object",
    "required": ["scheme", "problem", "T", "rows", "order"],
    "properties": {
        "scheme": {"type": "string"},
        "problem": {"type": "string"},
        "T": _num,
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tau", "error", "rate"],
                "properties": {"tau": _num, "error": _num, "rate": _num_or_null},
            },
        },
        "order": _num_or_null,
    },
}

ALL = {"analysis": ANALYSIS, "run_summary": RUN_SUMMARY, "convergence": CONVERGENCE}
