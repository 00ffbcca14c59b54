"""
BDD (Behavior Driven Development) tests for transfair.

This package contains feature files and step definitions for BDD testing.
"""
