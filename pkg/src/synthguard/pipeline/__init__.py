"""End-to-end orchestration and the command-line interface."""

from synthguard.pipeline.config import PipelineConfig, dump_ini, parse_ini, preset_config
from synthguard.pipeline.run import STAGES, EvalBundle, Pipeline, emit_reports, load_bundle

__all__ = ["STAGES", "EvalBundle", "Pipeline", "PipelineConfig", "dump_ini", "emit_reports", "load_bundle", "parse_ini", "preset_config"]
