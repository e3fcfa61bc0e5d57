"""Adverse-event data to property graph and OWL ontology pipeline."""

__version__ = "0.1.0"
