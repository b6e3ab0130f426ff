"""ticket-embed-exporter: real sentence embeddings to EMBV1 files."""

__version__ = "0.1.0"
