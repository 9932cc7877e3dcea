"""Neural surrogates (U-Net, SRResNet) for photonic-crystal dispersion data."""

from .data import F1Dataset, F2Dataset, Normalization, load_pcbd_for_task
from .evaluate import METRIC_REPORT_SCHEMA, MetricReport, evaluate, mre_tensors
from .models import (
    SRResNet,
    SRResNetConfig,
    UNet,
    UNetConfig,
    build_srresnet,
    build_unet,
    parameter_count,
)
from .pcbd import Dataset, Record, SplitManifest, read_pcbd
from .train import (
    DivergenceError,
    TrainConfig,
    TrainResult,
    fine_tune,
    load_checkpoint,
    lr_at_epoch,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
