"""Test module for config components."""
