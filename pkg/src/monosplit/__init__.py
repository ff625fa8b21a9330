"""Overlapping microservice extraction from monolithic codebases.

The pipeline: parse a Java source tree into a class/method call graph,
derive a structural dependency matrix and semantic feature vectors per
class, train two graph-convolutional soft-clustering models (one per
feature view), fuse and threshold the resulting membership matrices into
overlapping services, and score candidate decompositions with standard
modularity metrics.
"""

__version__ = "0.1.0"
