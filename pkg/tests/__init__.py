"""Tests for anisoheat."""
