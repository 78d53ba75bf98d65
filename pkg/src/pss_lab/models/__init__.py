"""
Models package for Pseudospherical Lab
"""
