"""Configuration, model persistence, experiment commands, and the CLI."""
