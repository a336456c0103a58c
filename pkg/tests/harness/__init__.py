"""Init file for harness tests."""
