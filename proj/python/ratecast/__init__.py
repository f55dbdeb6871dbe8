"""Coarse-to-fine video generation across frame-rate levels.

The heavy lifting lives in the compiled ``_ratecast`` extension; this package
re-exports it and adds a couple of numpy conveniences.
"""

from ._ratecast import (  # noqa: F401
    ConfigError,
    ContractError,
    Dataset,
    DimensionError,
    EvalReport,
    FlopReport,
    FlopStage,
    IoError,
    ModelConfig,
    NumericError,
    ParallelConfig,
    ParseError,
    PlanError,
    SceneParams,
    ShotParams,
    TrainConfig,
    TrainReport,
    TrainStage,
    TrainState,
    VideoSequence,
    __version__,
    analytic_bound,
    canonical_t_start,
    continue_video,
    derive_seed,
    evaluate,
    flop_count,
    flops_forward,
    generate,
    logit_normal_pdf,
    make_dataset,
    parse_config,
    prompt_of,
    render_scene,
    render_scene_level,
    run_stage1,
    run_stage2,
    sigma_shift_map,
    subsample_indices,
    time_grid,
    verify,
)


def load_tmv(path):
    """Load a .tmv sequence file."""
    return VideoSequence.load(str(path))


def load_dataset(path):
    """Load a .tmd dataset file."""
    return Dataset.load(str(path))


def load_checkpoint(path):
    """Load a .tmck training checkpoint."""
    return TrainState.load(str(path))
