"""Init file for core tests."""
