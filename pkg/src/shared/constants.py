"""
Application constants
Centralized numerical and format values
"""
import math

# Image intensities live in [0, 1]; "two gray levels" of an 8-bit image
PIXEL_PEAK = 1.0
TWO_GRAY_LEVELS = 2.0 / 255.0

# Evaluation
PSNR_CAP_DB = 99.0

# Learning-rate schedule
DEFAULT_LR = 1e-3
LR_DROP_FACTOR = math.sqrt(10.0)
PLATEAU_MIN_RELATIVE_IMPROVEMENT = 1e-3

# Adam
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Tolerances
ORTHONORMAL_TOL = 1e-6
KERNEL_SUM_TOL = 1e-6
SYMMETRY_TOL = 1e-8
RANK_THRESHOLD = 1e-8

# Loss weights quoted for the two experiment families
CS_SELF_WEIGHT = 0.05
DEBLUR_WEIGHT = 1.0

# UIM1 tensor container
CHECKPOINT_MAGIC = b"UIM1"
CHECKPOINT_VERSION = 1

# Dataset directory layout
MANIFEST_NAME = "manifest.json"
RECORDS_DIR = "records"
GROUND_TRUTH_DIR = "ground_truth"
SEALED_DIR = "sealed"
PHI_FILE = "phi.uim"
RESOLVED_CONFIG_NAME = "resolved_config.ini"

# Regimes and families
REGIME_SUPERVISED = "supervised"
REGIME_NONBLIND = "unsup-nonblind"
REGIME_BLIND = "unsup-blind"
REGIMES = (REGIME_SUPERVISED, REGIME_NONBLIND, REGIME_BLIND)

FAMILY_CS = "cs-shifted-partitions"
FAMILY_BLUR = "motion-kernels"
FAMILIES = (FAMILY_CS, FAMILY_BLUR)
