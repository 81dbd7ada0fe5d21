"""Command-line front end: `python -m mmdemosaick <command> ...`."""
import argparse
import dataclasses
import logging
import sys

import numpy as np

from .cfa_ops import PATTERN_KINDS, bilinear_demosaick, make_pattern, mosaic
from .config import load_config
from .dataset import ImageDataset, synthetic_dataset, write_dataset
from .errors import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, ArgumentError, MMDemosaickError, UsageError
from .evaluation import METHODS, evaluate_directory, parameter_breakdown
from .gradcheck import SUITES, run_gradchecks
from .image_io import read_image, read_observation, write_image, write_observation
from .mm_cascade import CascadeParams, demosaick_forward, init_cascade
from .model_io import load_denoiser, load_model, save_model
from .noise_sim import NOISE_KINDS, NoiseSpec, add_noise
from .resdnet import init_resdnet, resdnet_forward
from .tensor_core import check_finite
from .training import TrainConfig, run_phase

logger = logging.getLogger(__name__)

PRECISIONS = {"f32": np.float32, "f64": np.float64}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- commands --------------------------------------------------------------

def _noise_spec(args):
    return NoiseSpec(kind=args.noise_kind, sigma=args.sigma, a_shot=args.a_shot,
                     b_read=args.b_read, seed=args.seed)


def cmd_mosaic(args):
    image = read_image(args.input)
    if image.shape[2] == 1:
        image = np.repeat(image, 3, axis=2)
    spec = _noise_spec(args)
    noisy = add_noise(image[:, :, :3], spec)
    y = mosaic(noisy, make_pattern(args.pattern), sigma=spec.sigma)
    write_observation(args.out, y)
    logger.info("wrote %s observation to %s", args.pattern, args.out)


def _load_cascade(path, dtype):
    params = load_model(path, dtype)
    if not isinstance(params, CascadeParams):
        raise ArgumentError(f"{path} holds a denoiser only; demosaicking needs a cascade model")
    return params


def cmd_demosaick(args):
    dtype = PRECISIONS[args.precision]
    params = _load_cascade(args.model, dtype)
    y = read_observation(args.input)
    y.data = y.data.astype(dtype)
    out, _ = demosaick_forward(y, params)
    write_image(args.out, check_finite(out, "demosaicked image"), bits=args.bits)


def cmd_bilinear(args):
    y = read_observation(args.input)
    write_image(args.out, bilinear_demosaick(y), bits=args.bits)


def cmd_denoise(args):
    dtype = PRECISIONS[args.precision]
    params = load_denoiser(args.model, dtype)
    image = read_image(args.input).astype(dtype)
    out, _ = resdnet_forward(image, args.sigma, params)
    write_image(args.out, check_finite(out, "denoised image"), bits=args.bits)


def _train_config(args, phase):
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {"phase": phase}
    for name in ("seed", "threads", "pattern", "epochs"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    if args.checkpoint_every is not None:
        overrides.update(checkpoint_every=args.checkpoint_every, checkpoint_path=args.out)
    noise = {}
    if getattr(args, "sigma", None) is not None:
        noise["sigma"] = args.sigma
    if getattr(args, "noise_kind", None) is not None:
        noise["kind"] = args.noise_kind
    if noise:
        overrides["noise"] = dataclasses.replace(cfg.noise, **noise)
    return dataclasses.replace(cfg, **overrides)


def _finish_training(args, result):
    save_model(result.params, args.out)
    logger.info("saved model to %s (best validation PSNR %.3f dB)", args.out, result.best_val_psnr)
    if args.log:
        result.write_log(args.log)


def cmd_pretrain(args):
    cfg = _train_config(args, "pretrain")
    dataset = ImageDataset.from_directory(args.data)
    init = load_denoiser(args.init) if args.init else None
    _finish_training(args, run_phase(dataset, cfg, init=init))


def cmd_train(args):
    cfg = _train_config(args, "joint")
    dataset = ImageDataset.from_directory(args.data)
    if args.init:
        denoiser = load_denoiser(args.init)
    else:
        logger.warning("no --init given, starting the joint phase from a random denoiser")
        denoiser = init_resdnet(cfg.depth, cfg.seed, cfg.filters)
    _finish_training(args, run_phase(dataset, cfg, init=denoiser))


def cmd_eval(args):
    dtype = PRECISIONS[args.precision]
    model = None
    if args.method == "cascade":
        if not args.model:
            raise UsageError("eval with the cascade method needs --model")
        model = _load_cascade(args.model, dtype)
    report = evaluate_directory(args.directory, method=args.method, model=model,
                                threads=args.threads, dtype=dtype)
    print(report.table().to_string(index=False))
    if report.breakdown is not None:
        print()
        print(report.breakdown.to_string(index=False))
    if args.out:
        report.to_csv(args.out)


def cmd_gradcheck(args):
    report = run_gradchecks(args.suite or SUITES, seed=args.seed)
    print(report.to_string(index=False))
    worst = report["rel_error"].max()
    if not report["passed"].all():
        logger.error("gradient check failed, worst relative error %.3g", worst)
        return EXIT_NUMERIC
    logger.info("all %d gradient checks passed, worst relative error %.3g", len(report), worst)
    return EXIT_OK


def cmd_params(args):
    if args.model:
        params = load_model(args.model)
    else:
        params = init_cascade(init_resdnet(args.depth, 0, args.filters), args.K, 15.0, 1.0)
    print(parameter_breakdown(params).to_string(index=False))


def cmd_synth(args):
    dataset = synthetic_dataset(args.count, size=(args.size, args.size), seed=args.seed)
    write_dataset(dataset, args.out)
    if args.observations:
        pattern = make_pattern(args.pattern)
        spec = _noise_spec(args)
        for i, (name, img) in enumerate(zip(dataset.names, dataset.images)):
            noisy = add_noise(img, spec, stream=i)
            stem = name.rsplit(".", 1)[0]
            write_observation(f"{args.out}/{stem}.npz", mosaic(noisy, pattern, sigma=spec.sigma))


# --- parser ----------------------------------------------------------------

def _add_noise_flags(p, sigma_default=0.0):
    p.add_argument("--pattern", choices=PATTERN_KINDS, default="bayer_rggb")
    p.add_argument("--sigma", type=float, default=sigma_default, help="noise level on the 0-255 scale")
    p.add_argument("--noise-kind", choices=NOISE_KINDS, default="iid_gaussian")
    p.add_argument("--a-shot", type=float, default=0.0, help="shot-noise gain (heteroscedastic)")
    p.add_argument("--b-read", type=float, default=0.0, help="read-noise variance (heteroscedastic)")
    p.add_argument("--seed", type=int, default=0)


def _add_training_flags(p, joint):
    p.add_argument("data", help="directory of clean training images")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--init", help="model file holding the starting denoiser")
    p.add_argument("--config", help="key = value training configuration")
    p.add_argument("--log", help="CSV file for the training log")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--checkpoint-every", type=int, help="overwrite --out every N steps")
    if joint:
        p.add_argument("--pattern", choices=PATTERN_KINDS)
        p.add_argument("--sigma", type=float, help="noise level added to training mosaics")
        p.add_argument("--noise-kind", choices=NOISE_KINDS)


def build_parser():
    parser = _Parser(prog="mmdemosaick", description="Joint demosaicking and denoising with an unrolled MM cascade")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mosaic", help="clean image -> mosaicked observation (.npz)")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    _add_noise_flags(p)
    p.set_defaults(handler=cmd_mosaic)

    for name, handler, text in (("demosaick", cmd_demosaick, "observation + cascade model -> image"),
                                ("bilinear", cmd_bilinear, "observation -> bilinear baseline image")):
        p = sub.add_parser(name, help=text)
        p.add_argument("input")
        p.add_argument("--out", required=True)
        p.add_argument("--bits", type=int, choices=(8, 16), default=8)
        if handler is cmd_demosaick:
            p.add_argument("--model", required=True)
            p.add_argument("--precision", choices=PRECISIONS, default="f64")
        p.set_defaults(handler=handler)

    p = sub.add_parser("denoise", help="noisy image + sigma + model -> denoised image")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--bits", type=int, choices=(8, 16), default=8)
    p.add_argument("--precision", choices=PRECISIONS, default="f64")
    p.set_defaults(handler=cmd_denoise)

    p = sub.add_parser("pretrain", help="train the denoiser on noisy patches")
    _add_training_flags(p, joint=False)
    p.set_defaults(handler=cmd_pretrain)

    p = sub.add_parser("train", help="joint training of the whole cascade")
    _add_training_flags(p, joint=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="score a directory of (truth, observation) pairs")
    p.add_argument("directory")
    p.add_argument("--model")
    p.add_argument("--method", choices=METHODS, default="cascade")
    p.add_argument("--out", help="CSV report")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--precision", choices=PRECISIONS, default="f64")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference checks of every backward pass")
    p.add_argument("--suite", action="append", choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("params", help="parameter-count breakdown")
    p.add_argument("--model")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--filters", type=int, default=64)
    p.add_argument("-K", type=int, default=10)
    p.set_defaults(handler=cmd_params)

    p = sub.add_parser("synth", help="write synthetic training scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=60)
    p.add_argument("--size", type=int, default=48)
    p.add_argument("--observations", action="store_true", help="also write mosaicked .npz observations")
    _add_noise_flags(p)
    p.set_defaults(handler=cmd_synth)
    return parser


def run_command(argv=None):
    """Parse `argv`, run the command and map failures to exit codes."""
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return err.exit_code
    except SystemExit as exit_:
        return exit_.code or EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        code = args.handler(args)
    except MMDemosaickError as err:
        logger.error("%s", err)
        return err.exit_code
    except FloatingPointError as err:
        logger.error("numeric failure: %s", err)
        return EXIT_NUMERIC
    except OSError as err:
        logger.error("%s", err)
        return EXIT_DATA
    return EXIT_OK if code is None else code


def main():
    sys.exit(run_command())
