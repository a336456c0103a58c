"""Init file for instance tests."""
