"""Toolkit for learning foundational distinctions (class vs. instance,
physical object vs. not) over knowledge-graph entities.

Pipeline stages: N-Triples ingest -> entity store -> alignment-path
verdicts -> crowd label aggregation -> feature extraction -> weighted
classifiers -> cross-validated evaluation reports.
"""

__version__ = "0.1.0"
