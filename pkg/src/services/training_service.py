"""
Training service: one optimisation step and the full training loop with
CSV logging and periodic checkpoints.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .checkpoint_service import Checkpoint, CheckpointService
from .data_pipeline_service import DataPipelineService, step_rng
from ..core import bsrn_model
from ..core.optim import adam_step, clip_gradients, l1_loss, lr_schedule
from ..models.configs import ModelConfig, TrainConfig
from ..models.images import PatchPair
from ..models.params import ModelParams, init_params
from ..models.state import AdamState
from ..utils.errors import ConfigError, UsageError
from ..utils.logging_utils import setup_logger

# Set up logger for this module
logger = setup_logger("TrainingService")

LOG_FILENAME = "train_log.csv"
CHECKPOINT_FILENAME = "checkpoint.bsrn"


@dataclass
class StepResult:
    loss: float
    lr: float
    grad_norms: Dict[str, float]


def batch_gradients(params: ModelParams, batch: Sequence[PatchPair]):
    """Mean L1 loss over the batch and the matching mean gradients."""
    if not batch:
        raise ConfigError("Empty training batch")
    scale = batch[0].scale
    if any(pair.scale != scale for pair in batch):
        raise ConfigError("All items of a batch must share one scale")

    total_loss = 0.0
    grads: Dict[str, np.ndarray] = {}
    for pair in batch:
        tape = bsrn_model.forward_tape(pair.lr, params, scale)
        loss, grad_output = l1_loss(tape.output, pair.hr)
        total_loss += loss
        for name, g in bsrn_model.backward(tape, params, grad_output).items():
            if name in grads:
                grads[name] += g
            else:
                grads[name] = g
    inv = np.float32(1.0 / len(batch))
    return total_loss / len(batch), {name: g * inv for name, g in grads.items()}


def train_step(
    params: ModelParams,
    opt_state: AdamState,
    batch: Sequence[PatchPair],
    cfg: TrainConfig,
) -> StepResult:
    """Forward, mean loss, backprop, per-tensor clipping and one Adam update (in place)."""
    lr = lr_schedule(opt_state.step, cfg)
    loss, grads = batch_gradients(params, batch)
    clipped, norms = clip_gradients(grads, cfg.clip_theta)
    adam_step(params.tensors, clipped, opt_state, lr)
    return StepResult(loss=loss, lr=lr, grad_norms=norms)


class TrainingService:
    """Runs the training loop for one model configuration."""

    def __init__(
        self,
        model_config: ModelConfig,
        train_config: TrainConfig,
        data_service: Optional[DataPipelineService] = None,
        checkpoint_service: Optional[CheckpointService] = None,
    ):
        unknown = [f for f in train_config.scales if f not in model_config.scales]
        if unknown:
            raise ConfigError(f"Training scales {unknown} are not part of the model {list(model_config.scales)}")
        self.model_config = model_config
        self.train_config = train_config
        self.data_service = data_service or DataPipelineService()
        self.checkpoint_service = checkpoint_service or CheckpointService()

    def log_columns(self, params: ModelParams) -> List[str]:
        return ["step", "lr", "loss"] + [f"{name}_gradnorm" for name in params]

    def _flush_log(self, rows: List[dict], columns: List[str], log_path: Path):
        if not rows:
            return
        frame = pd.DataFrame(rows, columns=columns)
        frame.to_csv(log_path, mode="a", header=not log_path.exists(), index=False, float_format="%.9g")
        rows.clear()

    def _truncate_log(self, log_path: Path, step: int):
        """Drop rows logged after `step`, so a resumed run does not repeat them."""
        if not log_path.exists():
            return
        frame = pd.read_csv(log_path)
        kept = frame[frame["step"] <= step]
        if len(kept) < len(frame):
            logger.info(f"Dropping {len(frame) - len(kept)} log rows after step {step}")
            kept.to_csv(log_path, index=False, float_format="%.9g")

    def initial_state(self, resume: Optional[str]) -> Checkpoint:
        if resume:
            ckpt = self.checkpoint_service.load(resume, expected_config=self.model_config)
            logger.info(f"Resuming from step {ckpt.step}")
            return ckpt
        params = init_params(self.model_config, self.train_config.seed)
        logger.info(f"Initialised {params.num_scalars():,} parameters with seed {self.train_config.seed}")
        return Checkpoint(config=self.model_config, params=params, opt_state=AdamState(), step=0)

    def run(self, data_dir: str, out_dir: str, resume: Optional[str] = None) -> Checkpoint:
        cfg = self.train_config
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        log_path = out / LOG_FILENAME
        ckpt_path = out / CHECKPOINT_FILENAME

        ckpt = self.initial_state(resume)
        if ckpt.step > cfg.total_steps:
            raise UsageError(f"Checkpoint is already at step {ckpt.step}, beyond --steps {cfg.total_steps}")
        if ckpt.step == cfg.total_steps:
            self.checkpoint_service.save(ckpt, ckpt_path)
            logger.info("No training steps requested; wrote checkpoint and stopping")
            return ckpt

        self.data_service.load_directory(data_dir, cfg.scales, cfg.patch_size)
        if not resume and log_path.exists():
            log_path.unlink()
        elif resume:
            self._truncate_log(log_path, ckpt.step)

        columns = self.log_columns(ckpt.params)
        rows: List[dict] = []
        logger.info(
            f"Training {self.model_config} for steps {ckpt.step + 1}..{cfg.total_steps} "
            f"(batch {cfg.batch}, patch {cfg.patch_size}, scales {list(cfg.scales)})"
        )
        while ckpt.step < cfg.total_steps:
            rng = step_rng(cfg.seed, ckpt.step)
            _, batch = self.data_service.sample_batch(rng, cfg.scales, cfg.batch, cfg.patch_size)
            result = train_step(ckpt.params, ckpt.opt_state, batch, cfg)
            ckpt.step = ckpt.opt_state.step

            if ckpt.step % cfg.log_every == 0 or ckpt.step == cfg.total_steps:
                row = {"step": ckpt.step, "lr": result.lr, "loss": result.loss}
                for name in ckpt.params:
                    row[f"{name}_gradnorm"] = result.grad_norms.get(name, 0.0)
                rows.append(row)
                logger.info(f"step {ckpt.step} x{batch[0].scale} lr={result.lr:.3g} loss={result.loss:.6f}")
                logger.debug(f"grad norms: {result.grad_norms}")
                self._flush_log(rows, columns, log_path)

            if ckpt.step % cfg.checkpoint_every == 0 and ckpt.step != cfg.total_steps:
                self.checkpoint_service.save(ckpt, ckpt_path)

        self.checkpoint_service.save(ckpt, ckpt_path)
        return ckpt
