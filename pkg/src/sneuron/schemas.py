"""JSON Schemas for the structured files the CLI writes."""

_coord = {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2}
_scored = {
    "type": "array",
    "prefixItems": [{"type": "integer", "minimum": 0}, {"type": "integer", "minimum": 0}, {"type": "number"}],
    "minItems": 3,
    "maxItems": 3,
}

ATLAS = {
    "type": "object",
    "required": [
        "format", "version", "styles", "k", "n_layers", "d_ffn", "active_counts",
        "top_a", "top_b", "only_a", "only_b", "overlap",
    ],
    "properties": {
        "format": {"const": "sneuron-atlas"},
        "version": {"const": 1},
        "styles": {"type": "array", "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        "k": {"type": "integer", "minimum": 1},
        "n_layers": {"type": "integer", "minimum": 1},
        "d_ffn": {"type": "integer", "minimum": 1},
        "active_counts": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
        **{key: {"type": "array", "items": _scored} for key in ("top_a", "top_b", "only_a", "only_b", "overlap")},
    },
}

REGISTRY = {
    "type": "object",
    "required": ["A", "B"],
    "properties": {"A": {"type": "array", "items": _coord}, "B": {"type": "array", "items": _coord}},
}

STEP = {
    "type": "object",
    "required": ["token", "premature_layer", "jsd", "phi_size"],
    "properties": {
        "token": {"type": "integer", "minimum": 0},
        "premature_layer": {"type": ["integer", "null"]},
        "jsd": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "phi_size": {"type": ["integer", "null"]},
        "p_final": {"type": "number"},
        "p_premature": {"type": ["number", "null"]},
    },
}

TRANSFER_RECORD = {
    "type": "object",
    "required": ["input", "output", "strategy", "steps"],
    "properties": {
        "input": {"type": "string"},
        "output": {"type": "string"},
        "output_tokens": {"type": "array", "items": {"type": "integer"}},
        "strategy": {"enum": ["greedy", "nucleus", "dola_early", "sneuron"]},
        "deactivate": {"enum": ["none", "source", "target", "both"]},
        "steps": {"type": "array", "items": STEP},
    },
}

EVAL_REPORT = {
    "type": "object",
    "required": ["copy_ratio", "mean_perplexity", "target_lexicon_rate", "count"],
    "properties": {
        "copy_ratio": {"type": "number", "minimum": 0, "maximum": 1},
        "mean_perplexity": {"type": "number", "exclusiveMinimum": 0},
        "target_lexicon_rate": {"type": "number", "minimum": 0, "maximum": 1},
        "count": {"type": "integer", "minimum": 1},
        "skipped_perplexity": {"type": "integer", "minimum": 0},
    },
}

ATLAS_STATS = {
    "type": "object",
    "required": ["styles", "k", "overlap_fraction", "per_layer_a", "per_layer_b"],
    "properties": {
        "overlap_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "per_layer_a": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "per_layer_b": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
}
