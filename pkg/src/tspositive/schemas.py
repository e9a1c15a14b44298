"""JSON schemas for system files and every emitted report."""

EXT_REAL = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf"]}]}
NUMBERS = {"type": "array", "items": {"type": "number"}}
MATRIX = {"type": "array", "items": NUMBERS}
COMPLEX_LIST = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
}

ATOM = {
    "type": "object",
    "oneOf": [
        {"required": ["point"], "properties": {"point": {"type": "number"}}},
        {
            "required": ["interval"],
            "properties": {"interval": {**NUMBERS, "minItems": 2, "maxItems": 2}},
        },
    ],
}

TIMESCALE = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["continuous", "uniform", "atoms", "geometric"]},
        "horizon": {**NUMBERS, "minItems": 2, "maxItems": 2},
        "h": {"type": "number", "exclusiveMinimum": 0},
        "atoms": {"type": "array", "items": ATOM, "minItems": 1},
        "period": {"type": ["number", "null"]},
        "repetitions": {"type": ["integer", "null"], "minimum": 1},
        "q": {"type": "number"},
        "start": {"type": "number"},
        "count": {"type": "integer"},
    },
}

SYSTEM_FILE = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SystemFile",
    "type": "object",
    "required": ["A", "timescale"],
    "properties": {
        "A": MATRIX,
        "B": MATRIX,
        "timescale": TIMESCALE,
        "metadata": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}

POSITIVITY_REPORT = {
    "title": "PositivityReport",
    "type": "object",
    "required": ["verdict", "is_metzler", "c_of_A", "gamma", "violating_entries"],
    "properties": {
        "verdict": {"type": "boolean"},
        "is_metzler": {"type": "boolean"},
        "c_of_A": {"type": "number", "minimum": 0},
        "gamma": EXT_REAL,
        "violating_entries": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["matrix", "i", "j", "value"],
                "properties": {
                    "matrix": {"enum": ["A", "A_T", "B"]},
                    "i": {"type": "integer"},
                    "j": {"type": "integer"},
                    "value": {"type": "number"},
                },
            },
        },
    },
}

STABILITY_REPORT = {
    "title": "StabilityReport",
    "type": "object",
    "required": [
        "verdict",
        "method",
        "chi_coefficients",
        "spectrum",
        "disc_margins",
        "exact_region",
    ],
    "properties": {
        "verdict": {"enum": ["Stable", "Unstable", "Inconclusive"]},
        "method": {"enum": ["CoefficientTest", "DiscTest", "HalfPlaneTest"]},
        "chi_coefficients": NUMBERS,
        "spectrum": COMPLEX_LIST,
        "disc_margins": NUMBERS,
        "exact_region": {"type": "boolean"},
        "gamma": EXT_REAL,
        "positive": {"type": "boolean"},
        "marginal": {"type": "boolean"},
    },
}

ANALYZE_OUTPUT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "AnalyzeOutput",
    "type": "object",
    "required": ["positivity", "stability"],
    "properties": {
        "positivity": POSITIVITY_REPORT,
        "stability": STABILITY_REPORT,
        "near_zero_entries": {"type": "array"},
    },
}

DECAY_FIT = {
    "type": "object",
    "required": ["K_hat", "alpha_hat", "residual"],
    "properties": {
        "K_hat": EXT_REAL,
        "alpha_hat": EXT_REAL,
        "residual": {"type": "number"},
        "samples": {"type": "integer"},
    },
}

CLOSED_LOOP_REPORT = {
    "type": "object",
    "required": [
        "positivity",
        "coefficients_positive",
        "chi_coefficients",
        "factorization_error",
        "decay",
        "passed",
    ],
    "properties": {
        "positivity": POSITIVITY_REPORT,
        "coefficients_positive": {"type": "boolean"},
        "chi_coefficients": NUMBERS,
        "factorization_error": {"type": "number"},
        "factorization_ok": {"type": "boolean"},
        "decay": {"anyOf": [DECAY_FIT, {"type": "null"}]},
        "decay_ok": {"type": "boolean"},
        "passed": {"type": "boolean"},
    },
}

STABILIZATION_RESULT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "StabilizationResult",
    "type": "object",
    "required": ["status", "K", "conservative"],
    "properties": {
        "status": {"enum": ["Feasible", "Infeasible", "NotStabilizable"]},
        "K": {"anyOf": [NUMBERS, {"type": "null"}]},
        "conservative": {"type": "boolean"},
        "margin": {"type": "number"},
        "decomposition": {
            "type": "object",
            "required": ["k", "a", "alpha"],
            "properties": {
                "k": {"type": "integer", "minimum": 0},
                "a": NUMBERS,
                "alpha": {"type": "array", "items": EXT_REAL},
            },
        },
        "constraints": {"type": "array", "items": {"type": "string"}},
        "witness": {"type": "array", "items": {"type": "string"}},
        "failing": COMPLEX_LIST,
        "closed_loop": CLOSED_LOOP_REPORT,
        "note": {"type": "string"},
    },
    "allOf": [
        {
            "if": {"properties": {"status": {"const": "Feasible"}}},
            "then": {"required": ["closed_loop"], "properties": {"K": NUMBERS}},
        },
        {
            "if": {"properties": {"status": {"const": "Infeasible"}}},
            "then": {"required": ["witness", "constraints"]},
        },
    ],
}

ERROR_OBJECT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Error",
    "type": "object",
    "required": ["error", "message"],
    "properties": {
        "error": {"type": "string"},
        "message": {"type": "string"},
        "assumption": {"type": ["string", "null"]},
        "field": {"type": ["string", "null"]},
        "line": {"type": ["integer", "null"]},
        "column": {"type": ["integer", "null"]},
    },
}

ALL = {
    "system_file": SYSTEM_FILE,
    "analyze": ANALYZE_OUTPUT,
    "stabilize": STABILIZATION_RESULT,
    "error": ERROR_OBJECT,
}
