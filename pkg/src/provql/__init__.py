"""provql: a comprehension query language with where-provenance and lineage
computed by source-to-source query rewriting."""

__version__ = "0.1.0"
