"""AFDM-SCMA link-level simulation library."""
