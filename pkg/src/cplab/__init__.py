"""Desk-scale laboratory for dynamic cell-probe lower-bound machinery."""
