"""Truthfulness checks for feature-importance explanations."""
