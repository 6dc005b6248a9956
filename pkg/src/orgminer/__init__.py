"""Informal-group mining for employee questionnaires.

Stages: prepare, reduce redundant attributes, cluster, classify clusters with
decision trees, mine association rules that conclude cluster membership, and
write a reproducible report bundle.
"""

__version__ = "0.1.0"
