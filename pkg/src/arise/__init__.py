"""Agentic rubric-guided survey engine.

Pipeline: topic scoping -> citation preparation -> citation-keyed knowledge
base -> citation-preserving outline -> section composition -> citation and
LaTeX hygiene -> rubric-guided iterative refinement, with an audit kit for
citation traceability and inter-rater reliability. All model access runs
through a provider-agnostic gateway with a deterministic scripted backend.
"""

__version__ = "0.1.0"
