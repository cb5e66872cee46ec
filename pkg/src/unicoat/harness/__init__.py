"""Instances, experiment runner, charts and command-line entry point."""
