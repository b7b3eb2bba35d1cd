"""officetwin: a deterministic digital twin of an automated smart office."""

__version__ = "0.1.0"
