"""HTTP scoring microservice for the abduct-ir pipeline."""

__version__ = "0.1.0"
