"""uniformid: offline school-uniform detection, clothing-color attribute
prediction, and candidate-school ranking."""

__version__ = "0.1.0"
