"""Stage-per-command orchestration of the full pipeline."""
from .config import PipelineConfig, config_from_dict, demo_config_path, load_config, stage_rng
from .stages import STAGE_FUNCS, MissingInput
