"""Ontology-mediated query answering and rewriting for DL-Lite (OWL 2 QL)."""

__version__ = "0.1.0"
