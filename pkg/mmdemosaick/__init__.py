"""Joint demosaicking and denoising with a learned, unrolled MM cascade."""
from .cfa_ops import PATTERN_KINDS, MosaicObservation, bilinear_demosaick, make_pattern, mosaic
from .errors import MMDemosaickError
from .mm_cascade import CascadeParams, demosaick_forward, init_cascade
from .model_io import load_denoiser, load_model, save_model
from .noise_sim import NoiseSpec, add_noise
from .resdnet import ResDNetParams, init_resdnet, resdnet_forward

__version__ = "0.1.0"
