#!/usr/bin/env python3
"""
BSRN Super-Resolution Toolkit - Main Entry Point

This is the main entry point for the BSRN toolkit. It provides multiple
modes of operation:
- train: Train a model on a directory of images
- upscale: Upscale one image with a checkpoint (optionally dumping progressive outputs)
- eval: PSNR/SSIM/timing report over a directory of ground-truth images
- params: Print exact parameter counts for a configuration
- gradcheck: Finite-difference verification of every backward pass
- test: Run the test suite

Usage:
    python main.py train --data-dir data/train --out runs/x2 --scale 2 --steps 1000
    python main.py upscale --checkpoint runs/x2/checkpoint.bsrn --input lr.ppm --output sr.ppm --scale 2
    python main.py eval --checkpoint runs/x2/checkpoint.bsrn --data-dir data/val --scale 2 --out report.csv
    python main.py params --c 64 --s 64
    python main.py gradcheck
    python main.py test
"""

import sys
import argparse
from pathlib import Path
from typing import List, Optional

# Add the project root to the Python path
PROJECT_ROOT = Path(__file__).parent
sys.path.insert(0, str(PROJECT_ROOT))

# Import core modules
from src.config.settings import settings
from src.utils.errors import BSRNError, ConfigError, SamplingError, UsageError
from src.utils.logging_utils import set_log_level, setup_logger

# Set up main logger
logger = setup_logger("BSRNApp")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class BSRNApp:
    """Main application class for the BSRN toolkit."""

    def __init__(self):
        """Initialize the application."""
        self.logger = logger
        self.logger.debug("Initializing BSRN toolkit")

    def run_train(self, args) -> bool:
        """Train a model; every flag combination is validated before any step runs."""
        from src.models.configs import ModelConfig, TrainConfig
        from src.services.training_service import TrainingService

        if args.multi_scale:
            scales = tuple(settings.SUPPORTED_SCALES)
            patch = args.patch or settings.DEFAULT_PATCH_MULTI
        else:
            scales = (args.scale,)
            patch = args.patch or settings.DEFAULT_PATCH_SINGLE

        try:
            model_config = ModelConfig(c=args.c, s=args.s, R=args.recursions, r=args.freq_control, scales=scales)
            train_config = TrainConfig(
                batch=args.batch,
                base_lr=args.lr,
                halve_every=args.lr_halve_every,
                clip_theta=args.clip,
                total_steps=args.steps,
                seed=args.seed,
                patch_size=patch,
                scales=scales,
                log_every=args.log_every,
                checkpoint_every=args.checkpoint_every,
            )
        except ConfigError as e:
            raise UsageError(str(e)) from e

        service = TrainingService(model_config, train_config)
        ckpt = service.run(args.data_dir, args.out, resume=args.resume)
        self.logger.info(f"Training finished at step {ckpt.step}; outputs in {args.out}")
        return True

    def run_upscale(self, args) -> bool:
        """Upscale a single image."""
        from src.services.upscale_service import UpscaleService

        if args.reference and not args.emit_intermediate:
            raise UsageError("--reference only applies together with --emit-intermediate")
        UpscaleService().upscale(
            args.checkpoint,
            args.input,
            args.output,
            args.scale,
            freq_control=args.freq_control,
            emit_dir=args.emit_intermediate,
            reference_path=args.reference,
        )
        self.logger.info(f"Wrote {args.output}")
        return True

    def run_eval(self, args) -> bool:
        """Evaluate a checkpoint on a directory of ground-truth images."""
        from src.services.evaluation_service import MEAN_LABEL, EvaluationService

        report = EvaluationService().evaluate(
            args.data_dir,
            args.scale,
            checkpoint_path=args.checkpoint,
            freq_controls=args.freq_control,
            timing_runs=args.timing_runs,
            out_csv=args.out,
        )
        means = report[report["image"] == MEAN_LABEL]
        for _, row in means.iterrows():
            print(
                f"x{int(row['scale'])} r={int(row['r'])}: PSNR {row['psnr']:.3f} dB  SSIM {row['ssim']:.4f}  "
                f"(bicubic {row['bicubic_psnr']:.3f} / {row['bicubic_ssim']:.4f})  {row['seconds'] * 1000:.1f} ms/image"
            )
        return True

    def run_params(self, args) -> bool:
        """Print exact per-scale path counts and the multi-scale total."""
        from src.models.configs import ModelConfig
        from src.models.params import count_all_params, count_params

        scales = tuple(args.scale) if args.scale else tuple(settings.SUPPORTED_SCALES)
        try:
            config = ModelConfig(c=args.c, s=args.s, R=args.recursions, r=1, scales=scales)
        except ConfigError as e:
            raise UsageError(str(e)) from e
        print(f"BSRN c={config.c} s={config.s}")
        for scale in config.scales:
            print(f"  x{scale}: {count_params(config, scale):,}")
        print(f"  total ({'+'.join(f'x{f}' for f in config.scales)}): {count_all_params(config):,}")
        return True

    def run_gradcheck(self, args) -> bool:
        """Run the finite-difference gradient checks."""
        from src.core import bsrn_model
        from src.services.gradcheck_service import GradCheckService, corrupt_backward

        backward_fn = corrupt_backward() if args.corrupt_backward else bsrn_model.backward
        report = GradCheckService(seed=args.seed, backward_fn=backward_fn).run()
        for line in report.lines():
            print(line)
        print("PASS" if report.passed else "FAIL")
        return report.passed

    def run_tests(self, args=None) -> bool:
        """Run application tests."""
        try:
            self.logger.info("Running tests...")

            # Import test modules
            import pytest

            # Run tests
            test_args = [
                "-v",  # Verbose output
                "--tb=short",  # Short traceback format
                str(PROJECT_ROOT / "tests"),
            ]
            if args is not None and args.slow:
                test_args += ["-m", "slow or not slow"]

            return pytest.main(test_args) == 0

        except ImportError:
            self.logger.error("pytest not installed. Install it with: pip install pytest")
            return False


def _add_model_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--c", type=int, default=settings.DEFAULT_CHANNELS, help="Convolutional channels")
    parser.add_argument("--s", type=int, default=settings.DEFAULT_STATE_CHANNELS, help="Block-state channels (0 disables the state)")
    parser.add_argument("--recursions", type=int, default=settings.DEFAULT_RECURSIONS, help="Number of recursions R")


def create_parser():
    """Create command-line argument parser."""
    parser = argparse.ArgumentParser(
        description="BSRN super-resolution toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py params                                   # Exact parameter counts for c=64, s=64
  python main.py train --data-dir imgs --out run --scale 2 --steps 100
  python main.py train --data-dir imgs --out run --multi-scale --steps 100
  python main.py upscale --checkpoint run/checkpoint.bsrn --input lr.ppm --output sr.ppm --scale 2 --emit-intermediate dump
  python main.py eval --checkpoint run/checkpoint.bsrn --data-dir val --scale 2 --freq-control 1 2 4
  python main.py gradcheck                                # Verify every backward pass
        """
    )

    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=settings.LOG_LEVEL.upper(),
        help="Set logging level"
    )

    parser.add_argument(
        "--version",
        action="version",
        version="BSRN toolkit v0.1.0"
    )

    sub = parser.add_subparsers(dest="mode", required=True, metavar="mode")

    # train
    train = sub.add_parser("train", help="Train a model")
    scale_group = train.add_mutually_exclusive_group(required=True)
    scale_group.add_argument("--scale", type=int, choices=settings.SUPPORTED_SCALES, help="Train a single scale")
    scale_group.add_argument("--multi-scale", action="store_true", help="Train x2, x3 and x4 jointly")
    _add_model_flags(train)
    train.add_argument("--freq-control", type=int, default=settings.DEFAULT_FREQ_CONTROL, help="Frequency control r")
    train.add_argument("--batch", type=int, default=settings.DEFAULT_BATCH)
    train.add_argument("--patch", type=int, default=None,
                       help=f"LR patch size (default {settings.DEFAULT_PATCH_SINGLE}, or {settings.DEFAULT_PATCH_MULTI} with --multi-scale)")
    train.add_argument("--steps", type=int, required=True, help="Total training steps")
    train.add_argument("--lr", type=float, default=settings.DEFAULT_LR)
    train.add_argument("--lr-halve-every", type=int, default=settings.DEFAULT_LR_HALVE_EVERY)
    train.add_argument("--clip", type=float, default=settings.DEFAULT_CLIP, help="Per-tensor L2 clipping threshold")
    train.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    train.add_argument("--data-dir", required=True)
    train.add_argument("--out", required=True, help="Output directory for the checkpoint and train_log.csv")
    train.add_argument("--log-every", type=int, default=settings.DEFAULT_LOG_EVERY)
    train.add_argument("--checkpoint-every", type=int, default=settings.DEFAULT_CHECKPOINT_EVERY)
    train.add_argument("--resume", default=None, help="Checkpoint to continue from")

    # upscale
    upscale = sub.add_parser("upscale", help="Upscale one image")
    upscale.add_argument("--checkpoint", required=True)
    upscale.add_argument("--input", required=True)
    upscale.add_argument("--output", required=True)
    upscale.add_argument("--scale", type=int, required=True)
    upscale.add_argument("--freq-control", type=int, default=None, help="Override the checkpoint's r")
    upscale.add_argument("--emit-intermediate", metavar="DIR", default=None,
                         help="Write every intermediate output and the H_t/S_t maps to DIR")
    upscale.add_argument("--reference", default=None, help="HR image; logs PSNR of every intermediate output")

    # eval
    evaluate = sub.add_parser("eval", help="Evaluate PSNR/SSIM and timing")
    evaluate.add_argument("--checkpoint", default=None)
    evaluate.add_argument("--data-dir", required=True)
    evaluate.add_argument("--scale", type=int, required=True, help="1 scores ground truth against itself")
    evaluate.add_argument("--freq-control", type=int, nargs="+", default=None, help="One or more r values")
    evaluate.add_argument("--timing-runs", type=int, default=settings.DEFAULT_TIMING_RUNS)
    evaluate.add_argument("--out", default=None, help="CSV report path")

    # params
    params = sub.add_parser("params", help="Print exact parameter counts")
    _add_model_flags(params)
    params.add_argument("--scale", type=int, nargs="+", default=None)

    # gradcheck
    gradcheck = sub.add_parser("gradcheck", help="Finite-difference gradient checks")
    gradcheck.add_argument("--seed", type=int, default=0)
    gradcheck.add_argument("--corrupt-backward", action="store_true", help=argparse.SUPPRESS)

    # test
    test = sub.add_parser("test", help="Run tests")
    test.add_argument("--slow", action="store_true", help="Include the slow acceptance experiments")

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)

    # Set logging level
    set_log_level(args.log_level)

    # Create application instance
    app = BSRNApp()

    handlers = {
        "train": app.run_train,
        "upscale": app.run_upscale,
        "eval": app.run_eval,
        "params": app.run_params,
        "gradcheck": app.run_gradcheck,
        "test": app.run_tests,
    }

    try:
        success = handlers[args.mode](args)
    except (UsageError, ConfigError, SamplingError) as e:
        logger.error(f"{args.mode}: {e}")
        return EXIT_USAGE
    except BSRNError as e:
        logger.error(f"{args.mode}: {e}")
        return EXIT_FAILURE
    except OSError as e:
        logger.error(f"{args.mode}: {e}")
        return EXIT_FAILURE

    # Exit with appropriate code
    return EXIT_OK if success else EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
