"""Unit tests for transfair."""
