"""Exception mining for business-process event logs."""

__version__ = "0.1.0"
