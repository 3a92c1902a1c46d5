"""Pydantic models for every file-backed or user-facing record."""
