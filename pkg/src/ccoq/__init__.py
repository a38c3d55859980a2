"""Cybersecurity cost of quality on the NIST CSF Framework Core."""
