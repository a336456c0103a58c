"""Init file for operator tests."""
