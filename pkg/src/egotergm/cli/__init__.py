"""Command-line interface: configuration loading and the verb implementations."""
