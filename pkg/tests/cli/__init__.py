"""Init file for CLI tests."""
