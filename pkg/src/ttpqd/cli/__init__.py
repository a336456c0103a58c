from .ttpqd_cli import cli

__all__ = ["cli"]
