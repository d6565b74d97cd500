"""``latentscope`` command line: generate, train, analyze, plot.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import hashlib
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from . import __version__, plot, reports
from .ablation import attribution_map, permutation_baseline, run_ablation, same_label_fraction
from .corr import cca, frames_matrix, pca_evr
from .embed import adjacent_pair_ratio, spread_sweep
from .fieldgen import (FieldConfig, generate_field, read_field, read_observations,
                       sample_observations, write_attribution, write_field,
                       write_observations)
from .mmgn import (MMGN, read_latents, read_model, relative_error, write_latents,
                   write_model)
from .tucker import compare_factors, entropy_sweep, tucker_hooi

MODE_NAMES = ("time", "lat", "lon")


class UsageError(Exception):
    pass


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _threads():
    try:
        return max(1, int(os.environ.get("LATENTSCOPE_THREADS", "1")))
    except ValueError:
        raise UsageError("LATENTSCOPE_THREADS must be an integer") from None


@contextmanager
def _executor():
    n = _threads()
    if n == 1:
        yield None
    else:
        with ThreadPoolExecutor(max_workers=n) as ex:
            yield ex


class Run:
    """Tracks inputs and outputs of one command; removes outputs if the command fails."""

    def __init__(self, argv, args):
        self.argv = list(argv)
        self.args = args
        self.inputs = []
        self.outputs = []
        self.timings = {}
        self.meta = {}
        self.start = time.perf_counter()

    def input(self, path):
        if not os.path.exists(path):
            raise UsageError(f"input file not found: {path}")
        self.inputs.append(path)
        return path

    def output(self, path):
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        self.outputs.append(path)
        return path

    def cleanup(self):
        for path in self.outputs:
            if os.path.exists(path):
                os.remove(path)

    def write_manifest(self, path):
        config = {k: v for k, v in vars(self.args).items() if k != "func"}
        manifest = {
            "tool": "latentscope",
            "version": __version__,
            "command": self.argv,
            "config": config,
            "inputs": {p: _sha256(p) for p in self.inputs},
            "outputs": {p: _sha256(p) for p in self.outputs if os.path.exists(p)},
            "duration_s": time.perf_counter() - self.start,
        }
        if self.timings:
            manifest["timings_s"] = self.timings
        if self.meta:
            manifest["meta"] = self.meta
        self.outputs.append(path)
        reports.write_json(manifest, path)


def _grid(text):
    try:
        nlat, nlon = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 32x64, got {text!r}") from None
    return nlat, nlon


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("latent sizes must be positive")
    return vals


def _load_spaces(run, paths):
    spaces = {}
    for p in paths:
        lat = read_latents(run.input(p))
        k = lat.shape[1]
        if k in spaces:
            raise UsageError(f"two latent files with k={k}")
        spaces[k] = lat
    return spaces


# ---------------------------------------------------------------- commands

def cmd_gen(run, a):
    nlat, nlon = a.grid
    cfg = FieldConfig(nlat=nlat, nlon=nlon, nt=a.steps, noise_std=a.noise, seed=a.seed)
    write_field(generate_field(cfg), run.output(a.out))
    run.write_manifest(a.out + ".manifest.json")


def cmd_sample(run, a):
    field = read_field(run.input(a.field))
    write_observations(sample_observations(field, a.rate, a.seed), run.output(a.out))
    run.write_manifest(a.out + ".manifest.json")


def _model_from_args(a, k):
    return MMGN(latent_dim=k, hidden_dim=a.hidden, n_layers=a.layers, epochs=a.epochs,
                learning_rate=a.lr, latent_reg=a.latent_reg, random_state=a.seed)


def cmd_train(run, a):
    obs = read_observations(run.input(a.obs))
    model = _model_from_args(a, a.latent_dim).fit(obs)
    write_model(model, run.output(a.out_model))
    write_latents(model.latents_, run.output(a.out_latents))
    run.write_manifest(a.out_model + ".manifest.json")


def cmd_reconstruct(run, a):
    model = read_model(run.input(a.model))
    latents = read_latents(run.input(a.latents))
    nlat, nlon = a.grid if a.grid else model.grid_shape_
    write_field(model.reconstruct((latents.shape[0], nlat, nlon), latents), run.output(a.out))
    run.write_manifest(a.out + ".manifest.json")


def _embed(run, spaces, original, out_dir, a):
    records, embeddings = spread_sweep(spaces, original, a.clusters, a.perplexity, a.seed,
                                       a.tsne_iters, embed=not a.raw)
    for (name, pts, labels), rec in zip(embeddings, records):
        if pts.shape[1] == 2:
            reports.write_embedding(run.output(os.path.join(out_dir, f"embed_{name}.csv")),
                                    pts, labels)
        rec["adjacent_ratio"] = adjacent_pair_ratio(pts)
    reports.write_json(records, run.output(os.path.join(out_dir, "embed_summary.json")))
    return records


def cmd_analyze_embed(run, a):
    spaces = _load_spaces(run, a.latents)
    original = frames_matrix(read_field(run.input(a.field)))
    _embed(run, spaces, original, a.out_dir, a)
    run.write_manifest(os.path.join(a.out_dir, "analyze-embed.manifest.json"))


def _pca(run, spaces, original, out):
    recs = [reports.pca_record(k, pca_evr(spaces[k]).ratios) for k in sorted(spaces)]
    if original is not None:
        recs.append(reports.pca_record("original", pca_evr(original).ratios))
    reports.write_json(recs, run.output(out))
    return recs


def cmd_analyze_pca(run, a):
    spaces = _load_spaces(run, a.latents)
    original = frames_matrix(read_field(run.input(a.field))) if a.field else None
    _pca(run, spaces, original, a.out)
    run.write_manifest(a.out + ".manifest.json")


def _cca(run, spaces, original, out, ridge):
    ks = sorted(spaces)
    recs = []
    for lo, hi in zip(ks, ks[1:]):
        recs.append(reports.cca_record(lo, hi, cca(spaces[lo], spaces[hi], ridge)))
    if original is not None:
        for k in ks:
            recs.append(reports.cca_record(k, "original", cca(spaces[k], original, ridge)))
    reports.write_json(recs, run.output(out))
    return recs


def cmd_analyze_cca(run, a):
    spaces = _load_spaces(run, a.latents)
    original = frames_matrix(read_field(run.input(a.field))) if a.field else None
    if len(spaces) < 2 and original is None:
        raise UsageError("need two latent files, or one plus --field")
    _cca(run, spaces, original, a.out, a.ridge)
    run.write_manifest(a.out + ".manifest.json")


def _tucker(run, truth, model_out, out_dir, a):
    with _executor() as ex:
        sweep = entropy_sweep(truth, model_out, a.r_max, a.normalization, executor=ex)
    reports.write_entropy_sweep(run.output(os.path.join(out_dir, "tucker_sweep.csv")), sweep)
    run.meta["entropy"] = {"log_base": "e", "normalization": a.normalization}
    ranks = (a.r_max,) * 3
    ft = tucker_hooi(truth, ranks).factors
    fm = tucker_hooi(model_out, ranks).factors
    for m, name in enumerate(MODE_NAMES):
        reports.write_factor_comparison(
            run.output(os.path.join(out_dir, f"factors_{name}.csv")), compare_factors(ft[m], fm[m]))
    return sweep


def cmd_analyze_tucker(run, a):
    truth = read_field(run.input(a.truth))
    model_out = read_field(run.input(a.model_output))
    _tucker(run, truth, model_out, a.out_dir, a)
    run.write_manifest(os.path.join(a.out_dir, "analyze-tucker.manifest.json"))


def _ablate(run, model, latents, truth, out_dir, a):
    with _executor() as ex:
        result = run_ablation(model, latents, truth, a.fill, executor=ex)
    amap = attribution_map(result)
    rec = reports.ablation_record(result)
    rec["spatial_coherence"] = {
        "same_label_fraction": same_label_fraction(amap),
        "permutation_mean": permutation_baseline(amap, 100, a.seed),
    }
    reports.write_json(rec, run.output(os.path.join(out_dir, "ablation_report.json")))
    write_attribution(amap, run.output(os.path.join(out_dir, "attribution.fld")))
    return rec


def cmd_ablate(run, a):
    model = read_model(run.input(a.model))
    latents = read_latents(run.input(a.latents))
    truth = read_field(run.input(a.truth))
    _ablate(run, model, latents, truth, a.out_dir, a)
    run.write_manifest(os.path.join(a.out_dir, "ablate.manifest.json"))


def _plot_dir(run, out_dir, pairs):
    for src, name in pairs:
        plot.plot_report(src, run.output(os.path.join(out_dir, name)))


def cmd_sweep(run, a):
    d = a.out_dir
    for flag, k in (("--tucker-dim", a.tucker_dim), ("--ablation-dim", a.ablation_dim)):
        if k is not None and k not in a.latent_dims:
            raise UsageError(f"{flag} {k} is not one of --latent-dims")
    os.makedirs(d, exist_ok=True)
    if a.field:
        truth = read_field(run.input(a.field))
    else:
        nlat, nlon = a.grid
        truth = generate_field(FieldConfig(nlat=nlat, nlon=nlon, nt=a.steps, seed=a.seed))
        write_field(truth, run.output(os.path.join(d, "field.fld")))
    obs = sample_observations(truth, a.rate, a.seed + 1)
    write_observations(obs, run.output(os.path.join(d, "obs.fld")))

    def train_one(k):
        t0 = time.perf_counter()
        model = _model_from_args(a, k).fit(obs)
        run.timings[f"train_k{k}"] = time.perf_counter() - t0
        return k, model, model.reconstruct(truth.shape)

    with _executor() as ex:
        trained = list(ex.map(train_one, a.latent_dims)) if ex else [train_one(k) for k in a.latent_dims]
    models, recons, summary = {}, {}, []
    for k, model, recon in trained:
        sub = os.path.join(d, f"k{k}")
        write_model(model, run.output(os.path.join(sub, "model.mmgn")))
        write_latents(model.latents_, run.output(os.path.join(sub, "latents.csv")))
        write_field(recon, run.output(os.path.join(sub, "recon.fld")))
        models[k], recons[k] = model, recon
        summary.append({"latent_dim": k, "rel_error": relative_error(recon, truth),
                        "final_loss": model.loss_history_[-1] if model.loss_history_ else None,
                        "final_data_loss": model.final_data_loss_})
    reports.write_json(summary, run.output(os.path.join(d, "sweep_summary.json")))

    spaces = {k: models[k].latents_ for k in models}
    original = frames_matrix(truth)
    if len(spaces) >= 2:
        _embed(run, spaces, original, os.path.join(d, "embed"), a)
    _pca(run, spaces, original, os.path.join(d, "pca_report.json"))
    _cca(run, spaces, original, os.path.join(d, "cca_report.json"), a.ridge)
    k_t = a.tucker_dim or max(spaces)
    _tucker(run, truth, recons[k_t], os.path.join(d, "tucker"), a)
    k_a = a.ablation_dim or (16 if 16 in spaces else max(spaces))
    _ablate(run, models[k_a], models[k_a].latents_, truth, os.path.join(d, "ablation"), a)

    if not a.no_plots:
        pd = os.path.join(d, "plots")
        pairs = [(os.path.join(d, "sweep_summary.json"), "errors.svg"),
                 (os.path.join(d, "pca_report.json"), "pca.svg"),
                 (os.path.join(d, "tucker", "tucker_sweep.csv"), "entropy.svg"),
                 (os.path.join(d, "ablation", "ablation_report.json"), "ablation.svg"),
                 (os.path.join(d, "ablation", "attribution.fld"), "attribution.svg")]
        if len(spaces) >= 2:
            pairs.append((os.path.join(d, "embed", "embed_summary.json"), "spread.svg"))
            pairs += [(os.path.join(d, "embed", f"embed_{k}.csv"), f"embed_{k}.svg")
                      for k in sorted(spaces) + ["original"]]
        _plot_dir(run, pd, pairs)
        plot.plot_factors([os.path.join(d, "tucker", f"factors_{m}.csv") for m in MODE_NAMES],
                          run.output(os.path.join(pd, "factors.svg")))
    run.write_manifest(os.path.join(d, "manifest.json"))


def cmd_plot(run, a):
    for path in a.reports:
        run.input(path)
    if a.out and len(a.reports) != 1:
        raise UsageError("--out takes exactly one report; use --out-dir for several")
    for path in a.reports:
        if a.out:
            out = a.out
        else:
            base = os.path.splitext(os.path.basename(path))[0]
            out = os.path.join(a.out_dir, base + ".svg")
        plot.plot_report(path, run.output(out))


# ---------------------------------------------------------------- parser

def _add_train_args(p):
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--epochs", type=int, default=1500)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--latent-reg", type=float, default=1e-4)


def _add_embed_args(p):
    p.add_argument("--clusters", type=int, default=6)
    p.add_argument("--perplexity", type=float, default=10.0)
    p.add_argument("--tsne-iters", type=int, default=1000)
    p.add_argument("--raw", action="store_true", help="cluster raw latents instead of t-SNE points")


def _add_tucker_args(p):
    p.add_argument("--r-max", type=int, default=16)
    p.add_argument("--normalization", choices=("l1", "energy"), default="l1")


def build_parser():
    parser = argparse.ArgumentParser(prog="latentscope", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen", parents=[common], help="generate a synthetic field")
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=_grid, default=(32, 64))
    p.add_argument("--steps", type=int, default=48)
    p.add_argument("--noise", type=float, default=0.02)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sample", parents=[common], help="draw sparse observations")
    p.add_argument("--field", required=True)
    p.add_argument("--rate", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", parents=[common], help="fit an MMGN model")
    p.add_argument("--obs", required=True)
    p.add_argument("--latent-dim", type=int, default=16)
    _add_train_args(p)
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-latents", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", parents=[common], help="evaluate a model on a full grid")
    p.add_argument("--model", required=True)
    p.add_argument("--latents", required=True)
    p.add_argument("--grid", type=_grid)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("analyze-embed", parents=[common], help="t-SNE + k-means spread sweep")
    p.add_argument("--latents", nargs="+", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--out-dir", required=True)
    _add_embed_args(p)
    p.set_defaults(func=cmd_analyze_embed)

    p = sub.add_parser("analyze-pca", parents=[common], help="explained variance ratios")
    p.add_argument("--latents", nargs="+", required=True)
    p.add_argument("--field")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze_pca)

    p = sub.add_parser("analyze-cca", parents=[common], help="canonical correlations")
    p.add_argument("--latents", nargs="+", required=True)
    p.add_argument("--field")
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze_cca)

    p = sub.add_parser("analyze-tucker", parents=[common], help="Tucker factor and core comparison")
    p.add_argument("--truth", required=True)
    p.add_argument("--model-output", required=True)
    p.add_argument("--out-dir", required=True)
    _add_tucker_args(p)
    p.set_defaults(func=cmd_analyze_tucker)

    p = sub.add_parser("ablate", parents=[common], help="per-dimension latent ablation")
    p.add_argument("--model", required=True)
    p.add_argument("--latents", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--fill", choices=("zero", "mean"), default="zero")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", parents=[common], help="train over latent sizes and run every analysis")
    p.add_argument("--latent-dims", type=_int_list, default=[1, 2, 4, 8, 16, 32])
    p.add_argument("--field", help="existing field file; generated when omitted")
    p.add_argument("--grid", type=_grid, default=(32, 64))
    p.add_argument("--steps", type=int, default=48)
    p.add_argument("--rate", type=float, default=0.05)
    p.add_argument("--out-dir", required=True)
    _add_train_args(p)
    _add_embed_args(p)
    _add_tucker_args(p)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--fill", choices=("zero", "mean"), default="zero")
    p.add_argument("--tucker-dim", type=int)
    p.add_argument("--ablation-dim", type=int)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", parents=[common], help="render report files as SVG")
    p.add_argument("reports", nargs="+")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--out")
    group.add_argument("--out-dir")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    run = Run(argv, args)
    try:
        args.func(run, args)
    except UsageError as exc:
        run.cleanup()
        parser.print_usage(sys.stderr)
        print(f"latentscope: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: report and roll back partial outputs
        run.cleanup()
        print(f"latentscope: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
