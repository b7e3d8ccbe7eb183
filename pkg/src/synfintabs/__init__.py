"""Synthetic financial table images with exact annotations, plus QA evaluation tools."""
