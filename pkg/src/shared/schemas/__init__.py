"""
Pydantic schemas for problem documents, reports and trace rows.
"""
