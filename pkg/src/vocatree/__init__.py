"""Speech-based depression screening: pause and acoustic features, ReliefF selection,
per-segment classifiers and count-to-2 binary-tree late fusion."""

__version__ = "0.1.0"
