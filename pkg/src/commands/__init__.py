"""
Batch entry points: check, solve, trace, report and schema.
"""
