"""Init file for solver tests."""
