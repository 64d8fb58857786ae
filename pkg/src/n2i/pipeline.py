"""End-to-end experiment pipelines: simulate -> corrupt -> split -> train
-> infer -> evaluate, plus the hyper-parameter sweep and the
masking-vs-coupling experiment.

All stages derive their randomness from the run seed, so a config maps to
byte-identical artifacts.
"""

import configparser
import io as _io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace, fields

import numpy as np

from . import io as artio
from .datasplit import (DatasetPair, MaskPartition, SplitScheme, build_pairs,
                        mask_partition_pairs, split_sinogram)
from .geometry import make_geometry
from .infer import noise2inverse_infer, noise2self_infer
from .metrics import data_range, object_mask, psnr, ssim, write_metric_rows
from .model import (NetworkConfig, TrainConfig, init_network, load_checkpoint,
                    save_checkpoint, train)
from .noise import NoiseModel, calibrate_absorption
from .phantom import analytic_sinogram, generate_foam
from .recon import fbp, sub_reconstruct

METRICS_HEADER = ("run_id", "method", "alpha", "I0", "n_angles", "K",
                  "strategy", "psnr", "ssim")
THEORY_HEADER = ("term", "estimate", "std_error")
LOSS_HEADER = ("epoch", "mean_loss")


def n_threads():
    """Parallelism cap from N2I_THREADS (0 or unset = auto)."""
    raw = os.environ.get("N2I_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"N2I_THREADS must be an integer, got {raw!r}")
    if value < 0:
        raise ValueError("N2I_THREADS must be >= 0")
    if value == 0:
        return min(8, os.cpu_count() or 1)
    return value


def map_slices(fn, items):
    """Deterministic per-slice map, threaded when N2I_THREADS allows."""
    workers = n_threads()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class RunConfig:
    """Flat experiment description; mirrors the config-file sections."""

    run_id: str = "run"
    seed: int = 0
    output_dir: str = "out"
    # phantom
    n_bubbles: int = 30
    radius_lo: float = 0.02
    radius_hi: float = 0.12
    cylinder_radius: float = 0.85
    # geometry
    n_angles: int = 128
    detector_count: int = 192
    image_size: int = 128
    arc: float = math.pi
    # noise
    noise_kind: str = "poisson"
    alpha: float = 0.2
    photon_count: float = 100.0
    sigma: float = 0.1
    noise_domain: str = "sinogram"
    # split
    k: int = 4
    strategy: str = "X1"
    # network
    depth: int = 20
    dilation_cycle: int = 5
    dtype: str = "float32"
    # training
    epochs: int = 30
    batch_size: int = 12
    learning_rate: float = 1e-3
    n_slices: int = 64
    # masking scheme (Noise2Self-style runs)
    mask_stride: int = 4

    def geometry(self):
        return make_geometry(self.n_angles, self.detector_count,
                             self.image_size, self.arc)

    def scheme(self):
        return SplitScheme(K=self.k, strategy=self.strategy)

    def network_config(self):
        return NetworkConfig(depth=self.depth,
                             dilation_cycle=self.dilation_cycle,
                             seed=self.seed, dtype=self.dtype)

    def train_config(self):
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size,
                           learning_rate=self.learning_rate,
                           shuffle_seed=self.seed)

    def noise_model(self):
        return NoiseModel(kind=self.noise_kind,
                          photon_count=self.photon_count,
                          sigma=self.sigma, domain=self.noise_domain,
                          seed=self.seed)

    def to_text(self):
        """Canonical config serialization (also the hash input)."""
        sections = {
            "run": ("run_id", "seed", "output_dir"),
            "phantom": ("n_bubbles", "radius_lo", "radius_hi",
                        "cylinder_radius"),
            "geometry": ("n_angles", "detector_count", "image_size", "arc"),
            "noise": ("noise_kind", "alpha", "photon_count", "sigma",
                      "noise_domain"),
            "split": ("k", "strategy"),
            "network": ("depth", "dilation_cycle", "dtype"),
            "train": ("epochs", "batch_size", "learning_rate", "n_slices",
                      "mask_stride"),
        }
        out = []
        for section, keys in sections.items():
            out.append(f"[{section}]")
            for key in keys:
                out.append(f"{key} = {getattr(self, key)}")
            out.append("")
        return "\n".join(out)

    def hash(self):
        return artio.config_hash(self.to_text())


_INT_FIELDS = {"seed", "n_bubbles", "n_angles", "detector_count",
               "image_size", "k", "depth", "dilation_cycle", "epochs",
               "batch_size", "n_slices", "mask_stride"}
_FLOAT_FIELDS = {"radius_lo", "radius_hi", "cylinder_radius", "arc", "alpha",
                 "photon_count", "sigma", "learning_rate"}


def parse_config(text):
    parser = configparser.ConfigParser()
    parser.read_string(text)
    kwargs = {}
    known = {f.name for f in fields(RunConfig)}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key not in known:
                raise ValueError(f"unknown config key {key!r} in [{section}]")
            if key in _INT_FIELDS:
                kwargs[key] = int(value)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(math.pi) if value.strip() == "pi" else float(value)
            else:
                kwargs[key] = value
    return RunConfig(**kwargs)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


def _phantom_seed(cfg, slice_id):
    return cfg.seed * 1_000_003 + slice_id


def _noise_seed(cfg, slice_id):
    return cfg.seed * 1_000_003 + 500_000 + slice_id


@dataclass
class SimulatedDataset:
    clean_sinograms: np.ndarray   # (S, A, D), absorption-calibrated
    noisy_sinograms: np.ndarray   # (S, A, D)
    intensity_scale: float


def simulate_dataset(cfg):
    """Per-slice foam phantoms, calibrated clean sinograms, and noise."""
    geom = cfg.geometry()

    def one_clean(slice_id):
        ph = generate_foam(cfg.n_bubbles, (cfg.radius_lo, cfg.radius_hi),
                           cfg.cylinder_radius, seed=_phantom_seed(cfg, slice_id))
        return analytic_sinogram(ph, geom, supersampling=4)

    clean = np.stack(map_slices(one_clean, list(range(cfg.n_slices))))

    scale = 1.0
    if cfg.noise_kind == "poisson" and cfg.alpha > 0:
        scale = calibrate_absorption(clean[0], cfg.alpha)
        clean = clean * scale

    model = cfg.noise_model()
    noisy = np.stack([
        model.apply(clean[i], seed=_noise_seed(cfg, i))
        for i in range(cfg.n_slices)
    ])
    return SimulatedDataset(clean_sinograms=clean, noisy_sinograms=noisy,
                            intensity_scale=scale)


@dataclass
class ReconstructedDataset:
    clean_fbp: np.ndarray   # (S, N, N)
    noisy_fbp: np.ndarray   # (S, N, N)
    sub_recons: np.ndarray  # (S, K, N, N)


def reconstruct_dataset(cfg, sim):
    geom = cfg.geometry()
    K = cfg.k

    def one(i):
        clean = fbp(sim.clean_sinograms[i], geom)
        noisy = fbp(sim.noisy_sinograms[i], geom)
        subs = np.stack([
            sub_reconstruct(sim.noisy_sinograms[i], geom, K, j)
            for j in range(1, K + 1)
        ])
        return clean, noisy, subs

    results = map_slices(one, list(range(cfg.n_slices)))
    return ReconstructedDataset(
        clean_fbp=np.stack([r[0] for r in results]),
        noisy_fbp=np.stack([r[1] for r in results]),
        sub_recons=np.stack([r[2] for r in results]),
    )


def build_training_pairs(cfg, recon):
    scheme = cfg.scheme()
    pairs = []
    for i in range(cfg.n_slices):
        pairs.extend(build_pairs(list(recon.sub_recons[i]), scheme,
                                 slice_id=i))
    return pairs


def train_denoiser(cfg, pairs, loss_log=None):
    net = init_network(cfg.network_config())
    train(pairs, net, cfg.train_config(), loss_log=loss_log)
    net.scheme_k = cfg.k
    net.scheme_strategy = cfg.strategy
    return net


def infer_dataset(cfg, net, recon):
    scheme = cfg.scheme()

    def one(i):
        return noise2inverse_infer(net, list(recon.sub_recons[i]), scheme)

    return np.stack(map_slices(one, list(range(cfg.n_slices))))


def pooled_metrics(outputs, references):
    """Masked PSNR/SSIM pooled over all slices' hull voxels.

    The mask and data range come from each slice's clean reference; squared
    errors are pooled across slices before the log (PSNR), SSIM values are
    pooled per masked window.
    """
    sq_err_noisy = []
    ranges = []
    ssims = []
    sq = []
    n_pix = 0
    for out, ref in zip(outputs, references):
        mask = object_mask(ref)
        dr = data_range(ref)
        ranges.append(dr[1] - dr[0])
        diff = (out - ref)[mask]
        sq.append(float((diff**2).sum()))
        n_pix += diff.size
        ssims.append(ssim(out, ref, dr, mask))
    mse = sum(sq) / n_pix
    width = float(np.mean(ranges))
    p = float("inf") if mse == 0 else 10.0 * math.log10(width**2 / mse)
    return p, float(np.mean(ssims))


def run_experiment(cfg, outdir=None, loss_log=None):
    """Full pipeline; returns (metrics rows, outputs, recon, net)."""
    sim = simulate_dataset(cfg)
    recon = reconstruct_dataset(cfg, sim)
    pairs = build_training_pairs(cfg, recon)
    log = loss_log if loss_log is not None else []
    net = train_denoiser(cfg, pairs, loss_log=log)
    outputs = infer_dataset(cfg, net, recon)

    psnr_noisy, ssim_noisy = pooled_metrics(recon.noisy_fbp, recon.clean_fbp)
    psnr_out, ssim_out = pooled_metrics(outputs, recon.clean_fbp)
    i0 = cfg.photon_count if cfg.noise_kind == "poisson" else 0.0
    rows = [
        (cfg.run_id, "noisy-fbp", cfg.alpha, i0, cfg.n_angles, cfg.k,
         cfg.strategy, psnr_noisy, ssim_noisy),
        (cfg.run_id, "noise2inverse", cfg.alpha, i0, cfg.n_angles, cfg.k,
         cfg.strategy, psnr_out, ssim_out),
    ]
    if outdir is not None:
        artio.ensure_dir(outdir)
        cfg_hash = cfg.hash()
        with open(os.path.join(outdir, "config.ini"), "w") as fh:
            fh.write(cfg.to_text())
        save_checkpoint(net, os.path.join(outdir, "network.ckpt"))
        write_metric_rows(os.path.join(outdir, "loss.csv"), log, LOSS_HEADER)
        write_metric_rows(os.path.join(outdir, "metrics.csv"), rows,
                          METRICS_HEADER)
        for i in range(min(cfg.n_slices, 4)):
            artio.save_raw(outputs[i],
                           os.path.join(outdir, f"output_{i:04d}.raw"),
                           stage="infer", cfg_hash=cfg_hash)
    return rows, outputs, recon, net


def sweep(cfg, ks=(2, 4, 8), strategies=("X1", "1X"), outdir=None):
    """Grid over (K, strategy); one metrics row per pair."""
    rows = []
    for K in ks:
        for strategy in strategies:
            sub = replace(cfg, k=K, strategy=strategy,
                          run_id=f"{cfg.run_id}-K{K}-{strategy}")
            sub_rows, _, _, _ = run_experiment(sub)
            rows.append(sub_rows[1])  # the denoised row
    if outdir is not None:
        artio.ensure_dir(outdir)
        write_metric_rows(os.path.join(outdir, "sweep.csv"), rows,
                          METRICS_HEADER)
    return rows


def _mask_training_pairs(images, partition):
    pairs = []
    for i, img in enumerate(images):
        for phase in range(partition.n_phases):
            masked, mask = mask_partition_pairs(img, partition, phase)
            pairs.append(DatasetPair(input=masked, target=np.asarray(img),
                                     slice_id=i, section=frozenset({phase}),
                                     loss_mask=mask))
    return pairs


def noise2self_case(cfg, noisy_images, clean_references):
    """Train and apply the masking-based denoiser on one noise case."""
    partition = MaskPartition(stride=cfg.mask_stride)
    pairs = _mask_training_pairs(noisy_images, partition)
    net = init_network(cfg.network_config())
    train(pairs, net, cfg.train_config())

    def one(i):
        return noise2self_infer(net, noisy_images[i], partition)

    denoised = np.stack(map_slices(one, list(range(len(noisy_images)))))
    psnr_in, _ = pooled_metrics(noisy_images, clean_references)
    psnr_out, ssim_out = pooled_metrics(denoised, clean_references)
    return {
        "psnr_noisy": psnr_in,
        "psnr_denoised": psnr_out,
        "ssim_denoised": ssim_out,
        "improvement": psnr_out - psnr_in,
        "denoised": denoised,
    }


def noise2self_experiment(cfg, outdir=None):
    """Element-wise independent vs reconstruction-coupled Gaussian noise.

    Adds Gaussian noise once in the sinogram domain (coupled after FBP)
    and once directly in the reconstruction domain, with the image-domain
    sigma chosen to match the coupled case's noisy PSNR.  Reports the
    denoising improvement of the masking scheme for both cases.
    """
    geom = cfg.geometry()

    def one_clean(i):
        ph = generate_foam(cfg.n_bubbles, (cfg.radius_lo, cfg.radius_hi),
                           cfg.cylinder_radius, seed=_phantom_seed(cfg, i))
        return analytic_sinogram(ph, geom, supersampling=4)

    clean_sinos = np.stack(map_slices(one_clean, list(range(cfg.n_slices))))
    clean_fbps = np.stack(map_slices(
        lambda i: fbp(clean_sinos[i], geom), list(range(cfg.n_slices))))

    sino_model = NoiseModel(kind="gaussian", sigma=cfg.sigma,
                            domain="sinogram")
    noisy_coupled = np.stack([
        fbp(sino_model.apply(clean_sinos[i], seed=_noise_seed(cfg, i)), geom)
        for i in range(cfg.n_slices)
    ])

    # Match the noisy-input PSNR: masked RMSE of the coupled case becomes
    # the i.i.d. image-domain sigma.
    masked_sq = []
    n_pix = 0
    for i in range(cfg.n_slices):
        mask = object_mask(clean_fbps[i])
        diff = (noisy_coupled[i] - clean_fbps[i])[mask]
        masked_sq.append(float((diff**2).sum()))
        n_pix += diff.size
    sigma_img = math.sqrt(sum(masked_sq) / n_pix)
    img_model = NoiseModel(kind="gaussian", sigma=sigma_img, domain="image")
    noisy_iid = np.stack([
        img_model.apply(clean_fbps[i], seed=_noise_seed(cfg, i) + 777)
        for i in range(cfg.n_slices)
    ])

    iid_result = noise2self_case(cfg, noisy_iid, clean_fbps)
    coupled_result = noise2self_case(cfg, noisy_coupled, clean_fbps)

    rows = [
        (cfg.run_id, "noise2self-image-domain", 0.0, 0.0, cfg.n_angles, 0,
         "mask", iid_result["psnr_denoised"], iid_result["ssim_denoised"]),
        (cfg.run_id, "noise2self-sinogram-coupled", 0.0, 0.0, cfg.n_angles,
         0, "mask", coupled_result["psnr_denoised"],
         coupled_result["ssim_denoised"]),
    ]
    if outdir is not None:
        artio.ensure_dir(outdir)
        write_metric_rows(os.path.join(outdir, "noise2self.csv"), rows,
                          METRICS_HEADER)
    return {"iid": iid_result, "coupled": coupled_result,
            "sigma_image": sigma_img, "rows": rows}
