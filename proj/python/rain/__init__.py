"""Complaint-driven training data debugging for model-backed SQL queries."""

from rain._rain import *  # noqa: F401,F403
