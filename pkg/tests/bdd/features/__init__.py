"""
Feature files for BDD testing.
"""
