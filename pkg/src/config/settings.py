"""
Configuration settings for the BSRN super-resolution toolkit.
This module loads and provides access to environment variables and other settings.
"""
import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Settings:
    """Application settings loaded from environment variables."""
    # Log Settings
    LOGS_DIR = os.getenv("LOGS_DIR", "logs")
    LOG_FILE = os.path.join(LOGS_DIR, os.getenv("LOG_FILE", "bsrn.log"))
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    # Architecture defaults (c, s, R, r)
    DEFAULT_CHANNELS = int(os.getenv("BSRN_CHANNELS", "64"))
    DEFAULT_STATE_CHANNELS = int(os.getenv("BSRN_STATE_CHANNELS", "64"))
    DEFAULT_RECURSIONS = int(os.getenv("BSRN_RECURSIONS", "16"))
    DEFAULT_FREQ_CONTROL = int(os.getenv("BSRN_FREQ_CONTROL", "1"))
    SUPPORTED_SCALES = (2, 3, 4)

    # Training recipe defaults
    DEFAULT_BATCH = int(os.getenv("BSRN_BATCH", "8"))
    DEFAULT_PATCH_SINGLE = int(os.getenv("BSRN_PATCH_SINGLE", "32"))
    DEFAULT_PATCH_MULTI = int(os.getenv("BSRN_PATCH_MULTI", "48"))
    DEFAULT_LR = float(os.getenv("BSRN_LR", "1e-4"))
    DEFAULT_LR_HALVE_EVERY = int(os.getenv("BSRN_LR_HALVE_EVERY", "200000"))
    DEFAULT_CLIP = float(os.getenv("BSRN_CLIP", "5.0"))
    DEFAULT_SEED = int(os.getenv("BSRN_SEED", "0"))
    DEFAULT_LOG_EVERY = int(os.getenv("BSRN_LOG_EVERY", "10"))
    DEFAULT_CHECKPOINT_EVERY = int(os.getenv("BSRN_CHECKPOINT_EVERY", "1000"))

    # Adam constants
    ADAM_BETA1 = 0.9
    ADAM_BETA2 = 0.999
    ADAM_EPSILON = 1e-8

    # Evaluation
    DEFAULT_TIMING_RUNS = int(os.getenv("BSRN_TIMING_RUNS", "5"))
    GRADCHECK_TOLERANCE = 1e-2

    # Image files picked up from data directories
    IMAGE_EXTENSIONS = (".ppm", ".png")


# Create a settings instance for importing elsewhere
settings = Settings()
