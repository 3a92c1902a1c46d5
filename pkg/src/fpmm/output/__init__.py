"""Rendered reports."""
