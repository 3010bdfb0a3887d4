"""JSON Schemas for the files the CLI writes (draft 2020-12)."""

_number = {"type": "number"}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "metricreg evaluation report",
    "type": "object",
    "required": ["format", "version", "mode", "split", "radius", "metrics", "rv_per_k", "config"],
    "properties": {
        "format": {"const": "metricreg-report"},
        "version": {"const": 1},
        "mode": {"enum": ["rm", "mse", "l1"]},
        "split": {"enum": ["train", "val", "test"]},
        "radius": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "metrics": {
            "type": "object",
            "required": ["mae", "r2", "d5", "rv", "rv_best_k", "n_test", "extrapolated_fraction"],
            "additionalProperties": False,
            "properties": {
                "mae": {"type": "number", "minimum": 0},
                "r2": {"type": "number", "maximum": 1},
                "d5": {"type": "number", "minimum": 0},
                "rv": {"type": "number", "minimum": 0, "maximum": 2},
                "rv_best_k": {"type": "integer", "minimum": 1},
                "n_test": {"type": "integer", "minimum": 3},
                "extrapolated_fraction": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "rv_per_k": {"type": "object", "additionalProperties": _number},
        "config": {"type": "object"},
    },
}

TRAIN_LOG_RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "metricreg training log record (one JSON object per line)",
    "type": "object",
    "required": ["iteration", "loss"],
    "properties": {
        "iteration": {"type": "integer", "minimum": 1},
        "loss": _number,
        "lbar": _number,
        "batch_mean": _number,
        "s": {"type": "number", "exclusiveMinimum": 0},
        "selected_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "fallback": {"type": "boolean"},
        "val_mae": {"type": "number", "minimum": 0},
        "radius": {"type": "number", "exclusiveMinimum": 0},
    },
}
