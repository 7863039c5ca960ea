"""``modekit`` command line: generate data, fit, sweep alpha, report, PCA baseline.

Every command writes CSV tables plus ``run.json`` (config echo, versions,
timings) into ``--out``. Failures exit nonzero and print one JSON object
``{"error": <category>, "message": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

import modekit
from modekit import _backend
from modekit._parallel import pmap
from modekit.dms_kernel import dms_basis, distance_matrix
from modekit.dmd import reconstruct
from modekit.kfd import ConfigurationError
from modekit.numerics import NumericalError, RankDeficiencyError
from modekit.optimizer import FitConfig, ObjectiveError, fit
from modekit.workbench import evaluation, io
from modekit.workbench.synth import SynthConfig, gen_synthetic

log = logging.getLogger("modekit")

EXIT_CODES = {
    "usage": 2,
    "manifest": 3,
    "dimension": 4,
    "numerical": 5,
    "config": 6,
    "io": 7,
}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", f"{self.prog}: {message}")


def _metadata(command: str, args: argparse.Namespace, started: float, extra=None) -> dict:
    payload = {
        "command": command,
        "config": {k: v for k, v in vars(args).items() if k != "func"},
        "versions": {
            "modekit": modekit.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "kernel_backend": _backend.NAME,
        },
        "timings": {"wall_seconds": time.perf_counter() - started},
    }
    if extra:
        payload.update(extra)
    return payload


def _load(args):
    episodes, classes = io.read_dataset(Path(args.data))
    return episodes, classes


def _fit_config(args, alpha: float) -> FitConfig:
    try:
        return FitConfig(
            r=args.r,
            alpha=alpha,
            epsilon=args.epsilon,
            max_iters=args.max_iters,
            grad_tol=args.grad_tol,
            seed=args.seed,
        )
    except ValueError as exc:
        raise CliError("config", str(exc)) from exc


def cmd_gen_synthetic(args) -> dict:
    cfg = SynthConfig(
        n=args.n,
        tau=args.tau,
        image_side=args.side,
        gamma_d=args.gamma_d,
        noise_sd=args.noise_sd,
        seed=args.seed,
    )
    episodes = gen_synthetic(cfg)
    io.write_dataset(Path(args.out), episodes, ["y1", "y2"])
    return {"episodes": len(episodes), "p": cfg.p}


def _nrmse_rows(episodes, thetas):
    return [(ep.id, ep.label, evaluation.nrmse(ep, reconstruct(ep, th))) for ep, th in zip(episodes, thetas)]


def cmd_fit(args) -> dict:
    episodes, _ = _load(args)
    cfg = _fit_config(args, args.alpha)
    result = fit(episodes, cfg)
    out = Path(args.out)
    io.save_fit(out, episodes, result)
    rows = _nrmse_rows(episodes, result.thetas)
    io.write_csv(out / "nrmse.csv", ["id", "label", "value"], rows)
    total, f_dmd_mean, f_kfd = result.final
    return {
        "result": {
            "converged": result.converged,
            "reason": result.reason,
            "iterations": result.iterations,
            "objective": total,
            "f_dmd_mean": f_dmd_mean,
            "f_kfd": f_kfd,
            "nrmse_median": float(np.median([r[2] for r in rows])),
            "diagnostics": result.diagnostics,
        }
    }


def cmd_sweep(args) -> dict:
    episodes, _ = _load(args)
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError as exc:
        raise CliError("usage", f"--alphas must be a comma-separated list of numbers: {exc}") from exc
    configs = [_fit_config(args, a) for a in alphas]
    results = pmap(lambda c: fit(episodes, c), configs)
    rows = []
    for a, res in zip(alphas, results):
        total, f_dmd_mean, f_kfd = res.final
        rows.append((a, f_dmd_mean, f_kfd, total))
    io.write_csv(Path(args.out) / "sweep.csv", ["alpha", "f_dmd_mean", "f_kfd", "objective"], rows)
    return {"points": [{"alpha": a, "converged": r.converged, "reason": r.reason} for a, r in zip(alphas, results)]}


def cmd_report(args) -> dict:
    episodes, _ = _load(args)
    thetas = io.load_eigenvalues(Path(args.fit) / "eigenvalues.csv", episodes)
    out = Path(args.out)
    bases = [dms_basis(ep, th) for ep, th in zip(episodes, thetas)]
    dist = distance_matrix(bases)
    coords = evaluation.mds_embed(dist, dims=2)
    labels = [ep.label for ep in episodes]
    io.write_csv(
        out / "mds.csv",
        ["id", "label", "x", "y"],
        [(ep.id, ep.label, c[0], c[1]) for ep, c in zip(episodes, coords)],
    )
    io.write_csv(
        out / "eigenvalues.csv",
        ["id", "label", "mode", "re", "im"],
        [(ep.id, ep.label, j, z.real, z.imag) for ep, th in zip(episodes, thetas) for j, z in enumerate(th)],
    )
    rows = _nrmse_rows(episodes, thetas)
    io.write_csv(out / "nrmse.csv", ["id", "label", "value"], rows)
    modes = [b.x @ b.vander_pinv for b in bases]
    summary = evaluation.dominant_mode_summary(modes, labels)
    for cls, vec in summary.items():
        io.write_csv(
            out / f"dominant_mode_class{cls}.csv",
            ["feature", "re", "im"],
            [(k, z.real, z.imag) for k, z in enumerate(vec)],
        )
    return {
        "summary": {
            "nrmse_median": float(np.median([r[2] for r in rows])),
            "loo_1nn_accuracy": evaluation.loo_1nn_accuracy(dist, labels),
        }
    }


def cmd_pca_baseline(args) -> dict:
    episodes, _ = _load(args)
    rows = []
    medians = {}
    for k in args.components:
        values = []
        for ep in episodes:
            try:
                _, value = evaluation.pca_baseline(ep, k)
            except ValueError as exc:
                raise CliError("config", str(exc)) from exc
            values.append(value)
            rows.append((ep.id, ep.label, k, value))
        medians[str(k)] = float(np.median(values))
    io.write_csv(Path(args.out) / "pca_nrmse.csv", ["id", "label", "components", "value"], rows)
    return {"nrmse_median": medians}


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("--r", type=int, required=True, help="modes per episode")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--grad-tol", type=float, default=1e-6)
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="modekit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-synthetic", help="write the two-class synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=SynthConfig.seed)
    p.add_argument("--n", type=int, default=SynthConfig.n)
    p.add_argument("--tau", type=int, default=SynthConfig.tau)
    p.add_argument("--side", type=int, default=SynthConfig.image_side)
    p.add_argument("--gamma-d", type=float, default=SynthConfig.gamma_d)
    p.add_argument("--noise-sd", type=float, default=SynthConfig.noise_sd)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("fit", help="discriminant DMD fit at one alpha")
    _add_fit_options(p)
    p.add_argument("--alpha", type=float, default=0.0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="fits over several alphas; f_dmd vs f_kfd table")
    _add_fit_options(p)
    p.add_argument("--alphas", default="0,0.2,0.4,0.6,0.8,1.0,1.2")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="MDS, eigenvalue, NRMSE and dominant-mode tables")
    p.add_argument("--data", required=True)
    p.add_argument("--fit", required=True, help="output directory of a previous fit")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pca-baseline", help="PCA reconstruction NRMSE per episode")
    p.add_argument("--data", required=True)
    p.add_argument("--components", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pca_baseline)
    return parser


def _fail(category: str, message: str) -> int:
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return EXIT_CODES[category]


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        return _fail(exc.category, str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    started = time.perf_counter()
    try:
        extra = args.func(args)
        io.write_json(Path(args.out) / "run.json", _metadata(args.command, args, started, extra))
    except CliError as exc:
        return _fail(exc.category, str(exc))
    except io.DimensionMismatchError as exc:
        return _fail("dimension", str(exc))
    except io.ManifestError as exc:
        return _fail("manifest", str(exc))
    except (NumericalError, RankDeficiencyError, ObjectiveError) as exc:
        return _fail("numerical", str(exc))
    except ConfigurationError as exc:
        return _fail("config", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    except ValueError as exc:
        message = str(exc)
        if "dimension" in message:
            return _fail("dimension", message)
        return _fail("config", message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
