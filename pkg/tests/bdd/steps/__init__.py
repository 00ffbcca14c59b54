"""
Step definitions for BDD testing.
"""
