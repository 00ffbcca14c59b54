"""Test suite for transfair."""
