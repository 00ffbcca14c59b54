"""End-to-end tests for transfair."""
