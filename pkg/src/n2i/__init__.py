"""Self-supervised CT denoising toolkit.

Simulates parallel-beam foam-phantom CT data, corrupts it with a
physical noise model, reconstructs angular sub-sinograms, and trains a
small dilated convolutional network on cross-split prediction so that no
clean images are ever needed for supervision.
"""

from .datasplit import (DatasetPair, MaskPartition, SplitScheme, build_pairs,
                        mask_partition_pairs, split_sinogram)
from .errors import CalibrationError, CapacityError, NormalizationMismatchError
from .geometry import Geometry, make_geometry, subset_geometry
from .infer import noise2inverse_infer, noise2self_infer
from .metrics import MetricReport, evaluate, object_mask, psnr, ssim
from .model import (Network, NetworkConfig, TrainConfig, apply_denoiser,
                    init_network, load_checkpoint, save_checkpoint, train)
from .noise import NoiseModel, absorption, calibrate_absorption
from .phantom import (FoamPhantom, analytic_sinogram, generate_foam,
                      load_phantom, rasterize, save_phantom)
from .pipeline import RunConfig, load_config, parse_config, run_experiment, sweep
from .projector import back_project, forward_project, operator_norm
from .recon import fbp, ramlak_kernel, ramp_filter, sirt, sub_reconstruct, tv_min_fista
from .theory import make_fixed_map, make_tiny_problem, prop1_check, zero_mean_check

__version__ = "1.0.0"

__all__ = [
    "CalibrationError", "CapacityError", "NormalizationMismatchError",
    "Geometry", "make_geometry", "subset_geometry",
    "FoamPhantom", "generate_foam", "analytic_sinogram", "rasterize",
    "save_phantom", "load_phantom",
    "forward_project", "back_project", "operator_norm",
    "fbp", "sub_reconstruct", "sirt", "tv_min_fista", "ramlak_kernel",
    "ramp_filter",
    "NoiseModel", "absorption", "calibrate_absorption",
    "SplitScheme", "DatasetPair", "MaskPartition", "split_sinogram",
    "build_pairs", "mask_partition_pairs",
    "Network", "NetworkConfig", "TrainConfig", "init_network", "train",
    "apply_denoiser", "save_checkpoint", "load_checkpoint",
    "noise2inverse_infer", "noise2self_infer",
    "MetricReport", "evaluate", "psnr", "ssim", "object_mask",
    "make_tiny_problem", "make_fixed_map", "prop1_check", "zero_mean_check",
    "RunConfig", "parse_config", "load_config", "run_experiment", "sweep",
]
