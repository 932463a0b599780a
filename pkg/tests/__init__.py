"""
Test package for geimlab.
"""
