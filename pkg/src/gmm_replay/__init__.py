"""Selective generative replay for class-incremental learning.

A single SGD-trained Gaussian mixture scholar serves as both generator
and classifier: new-task samples query it for similar known samples,
and only the overlapping parts of its representation are re-trained.
"""

__version__ = "0.1.0"
