"""
Services package for Pseudospherical Lab
"""
