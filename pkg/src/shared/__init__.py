"""
Shared library: configuration, contracts and the numeric modules of the comparison toolkit.
"""
