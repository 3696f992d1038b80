"""Binomial diffusion on binary piano rolls.

Pipeline pieces, in data-flow order: MIDI parsing and rasterization
(pianoroll, smf), a tape-based autodiff kernel set (tensor), the hourglass
denoiser (unet), the corruption kernels and the XOR-mask sampler (diffusion),
minibatch training with checkpoints (training), filter visualization
(interpret), and the file-driven command line (cli).
"""

from .diffusion import (
    ConditionSpec,
    NoiseSchedule,
    SamplerTrace,
    StepRecord,
    forward_jump,
    forward_step,
    jump_success_prob,
    jump_success_probs,
    make_schedule,
    sample,
    sample_conditional,
    sample_variation,
    step_success_probs,
)
from .interpret import AMConfig, AMResult, activation_maximization, default_layer
from .pianoroll import (
    PITCH_MAX,
    PITCH_MIN,
    ROWS,
    SEGMENT_COLS,
    TICKS_PER_QUARTER,
    CatalogRecord,
    PianoRoll,
    dedup_catalog,
    events_to_roll,
    load_roll,
    ones_ratio,
    parse_midi,
    pitch_range_ok,
    read_catalog,
    render_raster,
    roll_to_midi,
    save_roll,
    segment,
)
from .rng import as_rng, make_rng
from .smf import MidiError, NoteEvent, parse_smf, write_smf
from .tensor import (
    AdamState,
    Tape,
    Tensor,
    adam_step,
    backward,
    channel_mean,
    concat_channels,
    conv2d,
    mse_loss,
    relu,
    sigmoid,
    tsum,
    upsample_nn2x,
)
from .training import (
    TrainConfig,
    TrainReport,
    epoch_pairs,
    load_checkpoint,
    make_pair,
    pairs_per_epoch,
    save_checkpoint,
    train,
)
from .unet import (
    UNetConfig,
    UNetParams,
    conv_layout,
    forward,
    forward_to,
    init_params,
    predict_binary,
)

__version__ = "0.1.0"

__all__ = [
    "AMConfig",
    "AMResult",
    "AdamState",
    "CatalogRecord",
    "ConditionSpec",
    "MidiError",
    "NoiseSchedule",
    "NoteEvent",
    "PITCH_MAX",
    "PITCH_MIN",
    "PianoRoll",
    "ROWS",
    "SEGMENT_COLS",
    "SamplerTrace",
    "StepRecord",
    "TICKS_PER_QUARTER",
    "Tape",
    "Tensor",
    "TrainConfig",
    "TrainReport",
    "UNetConfig",
    "UNetParams",
    "activation_maximization",
    "adam_step",
    "as_rng",
    "backward",
    "channel_mean",
    "concat_channels",
    "conv2d",
    "conv_layout",
    "dedup_catalog",
    "default_layer",
    "epoch_pairs",
    "events_to_roll",
    "forward",
    "forward_jump",
    "forward_step",
    "forward_to",
    "init_params",
    "jump_success_prob",
    "jump_success_probs",
    "load_checkpoint",
    "load_roll",
    "make_pair",
    "make_rng",
    "make_schedule",
    "mse_loss",
    "ones_ratio",
    "pairs_per_epoch",
    "parse_midi",
    "parse_smf",
    "pitch_range_ok",
    "predict_binary",
    "read_catalog",
    "relu",
    "render_raster",
    "roll_to_midi",
    "sample",
    "sample_conditional",
    "sample_variation",
    "save_checkpoint",
    "save_roll",
    "segment",
    "sigmoid",
    "step_success_probs",
    "train",
    "tsum",
    "upsample_nn2x",
    "write_smf",
]
