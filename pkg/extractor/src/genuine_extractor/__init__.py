"""Record extraction: prompt a model, capture per-token stats, parse, emit JSONL."""

__version__ = "0.1.0"
