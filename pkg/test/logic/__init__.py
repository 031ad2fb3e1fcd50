"""Unit-test logic."""
