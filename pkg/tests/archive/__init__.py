"""Init file for archive tests."""
