"""
Source package root for the couplingcheck toolkit.
"""
