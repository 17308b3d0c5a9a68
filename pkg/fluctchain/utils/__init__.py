"""Configuration and result I/O for fluct-chain."""

from .config_loader import ConfigError, ConfigLoader, RunConfig
from .result_writer import RunRecord, emit_heatmap, read_csv, write_csv, write_json, write_run_record

__all__ = [
    "ConfigError",
    "ConfigLoader",
    "RunConfig",
    "RunRecord",
    "emit_heatmap",
    "read_csv",
    "write_csv",
    "write_json",
    "write_run_record",
]
