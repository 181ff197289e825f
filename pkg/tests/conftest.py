"""Anchors the test directory on sys.path so sibling helper modules
(oracle.py, helpers.py) are importable from every test file."""
