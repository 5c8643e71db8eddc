"""
Numeric modules: fields and clouds, operators, couplings, penalties, convolutions,
the doubling diagnostics and exact finite-state resolvents.
"""
