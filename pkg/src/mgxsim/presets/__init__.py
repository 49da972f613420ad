"""Bundled network descriptions, loaded by name via the workload catalog."""
