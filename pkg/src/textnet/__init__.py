"""Community extraction on document-similarity networks built from free text."""

__version__ = "0.1.0"
