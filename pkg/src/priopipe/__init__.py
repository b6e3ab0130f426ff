"""priopipe: benchmark engine for embedding-based ticket prioritization.

Pipelines combine optional dimensionality reduction, clustering with
cluster-to-label mapping (or direct centroid classification), supervised
tree ensembles, and a random baseline, evaluated with imbalance-aware
metrics over combined urgency/impact labels.
"""

__version__ = "0.1.0"
