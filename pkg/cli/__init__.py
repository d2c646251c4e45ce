"""
CLI package: constants, argument parser, one runner per command, output files
with the digest manifest, and the human summaries printed to stdout.
Used by smgi.py.
"""
