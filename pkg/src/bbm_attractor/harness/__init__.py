"""Ensemble orchestration, statistical tests, configuration and the CLI."""
