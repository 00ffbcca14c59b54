"""Command line interface for transfair."""
