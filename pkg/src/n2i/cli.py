"""Command-line interface.

Each subcommand is a thin client over the library: it reads/writes the
raw+sidecar artifact files and the flat key = value config format, and
exits nonzero with a diagnostic on stderr for any failure.
"""

import argparse
import os
import sys

import numpy as np

from . import io as artio
from .datasplit import split_sinogram
from .infer import noise2inverse_infer
from .metrics import evaluate as metric_evaluate
from .metrics import write_metric_rows
from .model import load_checkpoint
from .noise import calibrate_absorption
from .phantom import analytic_sinogram, generate_foam, save_phantom, load_phantom
from .pipeline import (METRICS_HEADER, THEORY_HEADER, load_config,
                       noise2self_experiment, run_experiment, sweep)
from .recon import fbp, sirt, sub_reconstruct, tv_min_fista
from .theory import (analytic_noise_variance, make_fixed_map,
                     make_tiny_problem, prop1_check, zero_mean_check)
from .noise import NoiseModel


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="n2i",
        description="Self-supervised CT denoising toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        return p

    p = add("phantom", "generate a foam phantom and save it as text")
    p.add_argument("--config", required=True)
    p.add_argument("--slice", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("project", "analytic sinogram of a phantom")
    p.add_argument("--config", required=True)
    p.add_argument("--phantom", required=True)
    p.add_argument("--out", required=True)

    p = add("corrupt", "calibrate absorption and apply measurement noise")
    p.add_argument("--config", required=True)
    p.add_argument("--sinogram", required=True)
    p.add_argument("--out", required=True)

    p = add("split", "angular K-split of a sinogram")
    p.add_argument("--config", required=True)
    p.add_argument("--sinogram", required=True)
    p.add_argument("--out-dir", required=True)

    p = add("reconstruct", "reconstruct a sinogram (fbp | sirt | tvmin)")
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=("fbp", "sirt", "tvmin"),
                   default="fbp")
    p.add_argument("--sinogram", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--png", default=None,
                   help="also export an 8-bit PNG for inspection")

    p = add("train", "run the full simulate/split/train pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)

    p = add("infer", "denoise one noisy sinogram with a trained checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sinogram", required=True)
    p.add_argument("--out", required=True)

    p = add("evaluate", "masked PSNR/SSIM of an image vs a clean reference")
    p.add_argument("--config", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--out", required=True)

    p = add("sweep", "grid over number of splits K and strategy")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--ks", default="2,4,8")

    p = add("theory", "Monte-Carlo checks of the error decomposition")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = add("noise2self", "coupled vs element-wise independent noise study")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    return parser


def cmd_phantom(args):
    cfg = load_config(args.config)
    from .pipeline import _phantom_seed
    ph = generate_foam(cfg.n_bubbles, (cfg.radius_lo, cfg.radius_hi),
                       cfg.cylinder_radius,
                       seed=_phantom_seed(cfg, args.slice))
    save_phantom(ph, args.out)
    print(f"wrote {args.out} ({ph.n_bubbles} bubbles)")
    return 0


def cmd_project(args):
    cfg = load_config(args.config)
    ph = load_phantom(args.phantom)
    sino = analytic_sinogram(ph, cfg.geometry(), supersampling=4)
    artio.save_raw(sino, args.out, stage="project", cfg_hash=cfg.hash())
    print(f"wrote {args.out} shape={sino.shape}")
    return 0


def cmd_corrupt(args):
    cfg = load_config(args.config)
    sino, _ = artio.load_raw(args.sinogram)
    scale = 1.0
    if cfg.noise_kind == "poisson" and cfg.alpha > 0:
        scale = calibrate_absorption(sino, cfg.alpha)
        sino = sino * scale
    noisy = cfg.noise_model().apply(sino, seed=cfg.seed)
    artio.save_raw(noisy, args.out, stage="corrupt", cfg_hash=cfg.hash(),
                   extra={"intensity_scale": repr(scale)})
    print(f"wrote {args.out} (intensity scale {scale:.6g})")
    return 0


def cmd_split(args):
    cfg = load_config(args.config)
    sino, meta = artio.load_raw(args.sinogram)
    subs = split_sinogram(sino, cfg.k)
    artio.ensure_dir(args.out_dir)
    for j, sub in enumerate(subs, start=1):
        path = os.path.join(args.out_dir, f"sub_{j:02d}.raw")
        artio.save_raw(sub, path, stage="split", cfg_hash=cfg.hash(),
                       extra={"section": str(j), "k": str(cfg.k)})
    print(f"wrote {cfg.k} sub-sinograms to {args.out_dir}")
    return 0


def cmd_reconstruct(args):
    cfg = load_config(args.config)
    geom = cfg.geometry()
    sino, _ = artio.load_raw(args.sinogram)
    if args.method == "fbp":
        image = fbp(sino, geom)
    elif args.method == "sirt":
        image = sirt(sino, geom, max_iters=args.iters)
    else:
        image = tv_min_fista(sino, geom, lam=args.lam, max_iters=args.iters)
    artio.save_raw(image, args.out, stage=f"reconstruct-{args.method}",
                   cfg_hash=cfg.hash())
    if args.png:
        window = artio.export_png(image, args.png)
        print(f"wrote {args.png} window=({window[0]:.4g}, {window[1]:.4g})")
    print(f"wrote {args.out}")
    return 0


def cmd_train(args):
    cfg = load_config(args.config)
    rows, _, _, _ = run_experiment(cfg, outdir=args.out_dir)
    for row in rows:
        print(",".join(str(v) for v in row))
    return 0


def cmd_infer(args):
    cfg = load_config(args.config)
    geom = cfg.geometry()
    net = load_checkpoint(args.checkpoint)
    sino, _ = artio.load_raw(args.sinogram)
    subs = [sub_reconstruct(sino, geom, cfg.k, j)
            for j in range(1, cfg.k + 1)]
    out = noise2inverse_infer(net, subs, cfg.scheme())
    artio.save_raw(out, args.out, stage="infer", cfg_hash=cfg.hash())
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args):
    cfg = load_config(args.config)
    image, meta_img = artio.load_raw(args.image)
    reference, meta_ref = artio.load_raw(args.reference)
    artio.check_same_config(meta_img, meta_ref)
    report = metric_evaluate(image, reference)
    rows = [(cfg.run_id, meta_img.get("stage", "image"), cfg.alpha,
             cfg.photon_count if cfg.noise_kind == "poisson" else 0.0,
             cfg.n_angles, cfg.k, cfg.strategy, report.psnr, report.ssim)]
    write_metric_rows(args.out, rows, METRICS_HEADER)
    print(f"psnr={report.psnr:.4f} ssim={report.ssim:.4f}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    ks = tuple(int(k) for k in args.ks.split(","))
    rows = sweep(cfg, ks=ks, outdir=args.out_dir)
    for row in rows:
        print(",".join(str(v) for v in row))
    return 0


def cmd_theory(args):
    artio.ensure_dir(args.out_dir)
    problem = make_tiny_problem(seed=args.seed)
    n_pix = problem.geometry.image_size**2
    rows = []
    for kind in ("zero", "identity", "random-linear"):
        h = make_fixed_map(kind, n_pix, seed=args.seed)
        rep = prop1_check(problem, h, args.samples, seed=args.seed + 1)
        for term, est, se in rep.rows():
            rows.append((f"{kind}:{term}", est, se))
        status = "ok" if rep.holds() else "VIOLATED"
        print(f"h={kind}: residual {rep.residual:.4g} "
              f"(+/- {rep.residual_se:.4g}) {status}")
    rows.append(("analytic_noise_variance",
                 analytic_noise_variance(problem), 0.0))

    sino = np.abs(problem.clean_sinograms[0])
    gauss = NoiseModel(kind="gaussian", sigma=problem.sigma)
    summary = zero_mean_check(gauss, sino, max(1000, args.samples // 10),
                              seed=args.seed)
    rows.append(("gaussian_mean_bias", summary.mean_bias,
                 summary.mean_bias_se))
    rows.append(("gaussian_exceedance_fraction",
                 summary.exceedance_fraction, 0.0))
    write_metric_rows(os.path.join(args.out_dir, "theory.csv"), rows,
                      THEORY_HEADER)
    print(f"wrote {os.path.join(args.out_dir, 'theory.csv')}")
    return 0


def cmd_noise2self(args):
    cfg = load_config(args.config)
    result = noise2self_experiment(cfg, outdir=args.out_dir)
    print(f"image-domain improvement: {result['iid']['improvement']:.3f} dB")
    print(f"sinogram-coupled improvement: "
          f"{result['coupled']['improvement']:.3f} dB")
    return 0


_COMMANDS = {
    "phantom": cmd_phantom,
    "project": cmd_project,
    "corrupt": cmd_corrupt,
    "split": cmd_split,
    "reconstruct": cmd_reconstruct,
    "train": cmd_train,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "theory": cmd_theory,
    "noise2self": cmd_noise2self,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # CLI boundary: report, don't traceback
        print(f"n2i {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
