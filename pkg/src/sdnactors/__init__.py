"""Stateless model checking of SDN controllers encoded as actors."""

__version__ = "0.1.0"
