"""Bundled scenario files; see quadexp.cli for the grammar."""
