"""Algorithm selection from text embeddings of raw instance files."""

__version__ = "0.1.0"
