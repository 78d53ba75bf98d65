"""
Command-line package for Pseudospherical Lab
"""
