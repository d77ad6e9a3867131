"""Configuration, metrics, logs, plot exports and the command line (see ``navguard.harness.cli``)."""
