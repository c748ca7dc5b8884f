"""Process-model embeddings for Petri nets."""

__version__ = "0.1.0"
