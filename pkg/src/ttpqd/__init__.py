"""ttpqd - Quality diversity for the Traveling Thief Problem."""

__version__ = "0.1.0"

__all__ = ["__version__"]
