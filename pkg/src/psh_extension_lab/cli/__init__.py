"""Command-line front end for the lab."""
