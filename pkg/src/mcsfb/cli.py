"""Command-line pipeline: density profiling, filter design, analysis,
synthesis, roundtrip benchmarking, and compression curves.

Every command writes manifest.json recording the resolved parameters, input
digests, output digests, and per-stage timings. Artifacts embed the source
graph's digest and later stages refuse inputs produced from a different
graph (exit 2). For a fixed seed all artifacts are byte-deterministic; the
manifest is the one exception since it carries wall-clock timings.

Exit codes: 0 success, 2 bad input or broken artifact chain, 3 numerical
failure.
"""

import argparse
import contextlib
import os
import sys
import time

import numpy as np

from . import defaults
from .chebyshev import build_basis_cache
from .coeffs import read_coefficients_csv, write_coefficients_csv
from .density import SpectralDensityEstimate, estimate_cdf
from .design import SPACINGS, FilterBankDesign, build_filter_bank
from .exact import (SpectralPartition, VertexPartition,
                    band_ends_from_eigenvalues, build_dictionary,
                    dense_eigendecomposition, exact_analyze, exact_synthesize,
                    omp_sparse_code, partition_spectrum,
                    partition_uniqueness_sets)
from .graph import build_laplacian, estimate_lambda_max, load_graph, load_signal
from .sampling import SamplingPlan, build_sampling_plan, fast_analyze
from .synthesis import SynthesisConfig, synthesize_fast
from .util import (InputError, NumericalError, dump_json, file_digest,
                   load_json, nmse)

_MODES = ("exact", "fast", "fast-adapted")
_PENALTIES = ("one-minus-h", "rational", "spline")


# ---------------------------------------------------------------------------
# plumbing


@contextlib.contextmanager
def _timed(timings: dict, name: str):
    t0 = time.perf_counter()
    yield
    timings[name] = timings.get(name, 0.0) + (time.perf_counter() - t0)


def _resolve_threads(value) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get("MCSFB_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"MCSFB_THREADS must be an integer, got {env!r}")
    return 1


def _ensure_out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_rows(path: str, digest: str, header: str, lines) -> None:
    with open(path, "w") as fh:
        fh.write(f"# graph={digest}\n{header}\n")
        for line in lines:
            fh.write(line + "\n")


def _csv_graph_digest(path: str) -> str:
    with open(path) as fh:
        first = fh.readline().strip()
    prefix = "# graph="
    return first[len(prefix):] if first.startswith(prefix) else ""


def _check_chain(path: str, found: str, expected: str) -> None:
    if found != expected:
        raise InputError(
            f"{path} was produced from a different graph "
            f"(digest {found or 'missing'}, expected {expected})"
        )


def _write_manifest(out: str, args, input_paths: dict, outputs: dict,
                    timings: dict) -> None:
    parameters = {k: v for k, v in vars(args).items() if k != "command"}
    manifest = {
        "command": args.command,
        "parameters": parameters,
        "inputs": {
            name: {"path": path, "sha256": file_digest(path)}
            for name, path in input_paths.items()
        },
        "outputs": outputs,
        "timings": {k: round(v, 6) for k, v in timings.items()},
    }
    dump_json(manifest, os.path.join(out, "manifest.json"))


def manifest_to_argv(manifest: dict) -> list:
    """Rebuild the argv that reproduces a recorded run."""
    argv = [manifest["command"]]
    for key, value in sorted(manifest["parameters"].items()):
        if value is None:
            continue
        argv.extend(["--" + key.replace("_", "-"), str(value)])
    return argv


def _load_graph_operator(args, timings):
    with _timed(timings, "setup"):
        graph = load_graph(args.graph)
        L = build_laplacian(graph)
        # Fixed-seed power iteration keeps the spectral scale, and with it
        # every artifact, independent of the run seed.
        estimate_lambda_max(L, iters=defaults.LAMBDA_MAX_ITERS, seed=0)
    return graph, L


def _load_signal_checked(graph, path):
    f = load_signal(path)
    if len(f) != graph.n_vertices:
        raise InputError(
            f"signal length {len(f)} does not match the graph's "
            f"{graph.n_vertices} vertices"
        )
    return f


# ---------------------------------------------------------------------------
# shared pipeline stages


def _density_params(args, cache_K):
    return {"K": cache_K, "J": args.J, "T_points": args.T_points,
            "seed": args.seed}


def _load_or_build_density(L, args, digest, out, outputs, cache_K):
    """Reuse out-dir density.json when it matches graph and parameters."""
    path = os.path.join(out, "density.json")
    params = _density_params(args, cache_K)
    if os.path.exists(path):
        obj = load_json(path)
        if obj.get("graph") == digest and all(
                obj.get(k) == v for k, v in params.items()):
            return SpectralDensityEstimate.from_json(obj["estimate"]), None
    cache = build_basis_cache(L, K=cache_K, J=args.J, seed=args.seed)
    density = estimate_cdf(L, cache, args.T_points)
    dump_json({"graph": digest, **params, "estimate": density.to_json()}, path)
    outputs["density.json"] = file_digest(path)
    return density, cache


def _design_params(args):
    return {"M": args.M, "K": args.K, "spacing": args.spacing,
            "delta": args.delta}


def _load_or_build_design(L, args, digest, out, outputs):
    """Design from out-dir design.json when compatible, else recomputed.

    Returns (design, cache_or_None). The cache comes back only when the
    density stage ran in-process, so callers can reuse it for sampling
    weights instead of paying the recurrence again.
    """
    cache_K = max(defaults.DENSITY_DEGREE, args.K)
    path = os.path.join(out, "design.json")
    params = _design_params(args)
    if os.path.exists(path):
        obj = load_json(path)
        if obj.get("graph") == digest and all(
                obj.get(k) == v for k, v in params.items()):
            design = FilterBankDesign.from_json(obj["design"])
            L.lambda_max_estimate = design.lambda_max
            return design, None
    density, cache = _load_or_build_density(L, args, digest, out, outputs,
                                            cache_K)
    design = build_filter_bank(density, args.M, spacing=args.spacing,
                               K=args.K, delta=args.delta)
    dump_json({"graph": digest, **params, "seed": args.seed,
               "design": design.to_json()}, path)
    outputs["design.json"] = file_digest(path)
    return design, cache


def _write_filters_csv(design, digest, out, outputs):
    grid = np.linspace(0.0, design.lambda_max, 1000)
    responses = [f.evaluate(grid) for f in design.filters]
    total = np.sum(responses, axis=0)
    header = "lambda," + ",".join(f"h_{m + 1}" for m in range(design.M)) + ",sum"
    lines = []
    for i, lam in enumerate(grid.tolist()):
        vals = ",".join(repr(float(r[i])) for r in responses)
        lines.append(f"{lam!r},{vals},{float(total[i])!r}")
    path = os.path.join(out, "filters.csv")
    _write_rows(path, digest, header, lines)
    outputs["filters.csv"] = file_digest(path)


def _exact_partitions(L, args, timings):
    with _timed(timings, "setup"):
        eig = dense_eigendecomposition(L)
        ends = band_ends_from_eigenvalues(eig.eigenvalues, args.M,
                                          spacing=args.spacing)
        spectral = partition_spectrum(eig, ends)
        vertex = partition_uniqueness_sets(eig, spectral, seed=args.seed)
    return eig, spectral, vertex


def _write_partition(spectral, vertex, args, digest, out, outputs):
    obj = {
        "graph": digest,
        "M": args.M,
        "spacing": args.spacing,
        "seed": args.seed,
        "band_ends": [float(v) for v in spectral.band_ends],
        "spectral_indices": [[int(i) for i in R] for R in spectral.indices],
        "vertex_sets": [[int(i) for i in V] for V in vertex.sets],
    }
    path = os.path.join(out, "partition.json")
    dump_json(obj, path)
    outputs["partition.json"] = file_digest(path)


def _load_partition(digest, out):
    path = os.path.join(out, "partition.json")
    if not os.path.exists(path):
        raise InputError(f"{path} not found; run analyze --mode exact first")
    obj = load_json(path)
    _check_chain(path, obj.get("graph", ""), digest)
    spectral = SpectralPartition(
        band_ends=np.asarray(obj["band_ends"], dtype=np.float64),
        indices=[np.asarray(R, dtype=int) for R in obj["spectral_indices"]],
    )
    vertex = VertexPartition(
        sets=[np.asarray(V, dtype=int) for V in obj["vertex_sets"]])
    return spectral, vertex


def _write_plan(plan, digest, out, outputs):
    path = os.path.join(out, "plan.json")
    design_sha = file_digest(os.path.join(out, "design.json"))
    dump_json({"graph": digest, "design_sha256": design_sha,
               "plan": plan.to_json()}, path)
    outputs["plan.json"] = file_digest(path)


def _load_plan(digest, out):
    path = os.path.join(out, "plan.json")
    if not os.path.exists(path):
        raise InputError(f"{path} not found; run analyze first")
    obj = load_json(path)
    _check_chain(path, obj.get("graph", ""), digest)
    design_sha = file_digest(os.path.join(out, "design.json"))
    if obj.get("design_sha256") != design_sha:
        raise InputError(
            f"{path} was built against a different design.json; rerun "
            f"analyze with the current design parameters"
        )
    return SamplingPlan.from_json(obj["plan"])


def _write_coefficients(coeffs, digest, out, outputs):
    path = os.path.join(out, "coefficients.csv")
    write_coefficients_csv(coeffs, path, graph_digest=digest)
    outputs["coefficients.csv"] = file_digest(path)


def _load_coefficients(digest, out, n_bands):
    path = os.path.join(out, "coefficients.csv")
    if not os.path.exists(path):
        raise InputError(f"{path} not found; run analyze first")
    _check_chain(path, _csv_graph_digest(path), digest)
    return read_coefficients_csv(path, n_bands)


def _write_reconstruction(signal, digest, out, outputs):
    path = os.path.join(out, "reconstruction.csv")
    _write_rows(path, digest, "vertex,value",
                [f"{i + 1},{float(v)!r}" for i, v in enumerate(signal)])
    outputs["reconstruction.csv"] = file_digest(path)


def _write_report(report, digest, out, outputs):
    path = os.path.join(out, "report.json")
    dump_json({"graph": digest, **report}, path)
    outputs["report.json"] = file_digest(path)


def _synthesis_config(args):
    return SynthesisConfig(kappa=args.kappa, cg_tolerance=args.cg_tol,
                           cg_max_iters=args.cg_max_iters,
                           penalty_kind=args.penalty)


def _fast_plan(L, cache, design, density, args, f):
    n_total = int(round(args.samples_factor * L.n_vertices))
    signal = f if args.mode == "fast-adapted" else None
    if cache is None:
        # Design came from an artifact; rebuild the probe block for weights.
        cache = build_basis_cache(L, K=max(defaults.DENSITY_DEGREE, args.K),
                                  J=args.J, seed=args.seed)
    return build_sampling_plan(cache, design, n_total=n_total, signal=signal,
                               seed=args.seed, density=density)


# ---------------------------------------------------------------------------
# commands


def cmd_density(args) -> int:
    timings, outputs = {}, {}
    out = _ensure_out_dir(args.out_dir)
    graph, L = _load_graph_operator(args, timings)
    digest = graph.digest()
    with _timed(timings, "setup"):
        cache = build_basis_cache(L, K=args.K, J=args.J, seed=args.seed)
        density = estimate_cdf(L, cache, args.T_points)
    path = os.path.join(out, "density.json")
    dump_json({"graph": digest, **_density_params(args, args.K),
               "estimate": density.to_json()}, path)
    outputs["density.json"] = file_digest(path)
    zs = np.linspace(0.0, density.lambda_max, 1000)
    vals = density.cdf(zs)
    path = os.path.join(out, "cdf.csv")
    _write_rows(path, digest, "lambda,cdf",
                [f"{z!r},{float(v)!r}" for z, v in zip(zs.tolist(), vals)])
    outputs["cdf.csv"] = file_digest(path)
    _write_manifest(out, args, {"graph": args.graph}, outputs, timings)
    return 0


def cmd_design(args) -> int:
    timings, outputs = {}, {}
    out = _ensure_out_dir(args.out_dir)
    graph, L = _load_graph_operator(args, timings)
    digest = graph.digest()
    with _timed(timings, "setup"):
        design, _ = _load_or_build_design(L, args, digest, out, outputs)
    _write_filters_csv(design, digest, out, outputs)
    _write_manifest(out, args, {"graph": args.graph}, outputs, timings)
    return 0


def cmd_analyze(args) -> int:
    timings, outputs = {}, {}
    out = _ensure_out_dir(args.out_dir)
    graph, L = _load_graph_operator(args, timings)
    digest = graph.digest()
    f = _load_signal_checked(graph, args.signal)
    if args.mode == "exact":
        eig, spectral, vertex = _exact_partitions(L, args, timings)
        with _timed(timings, "analysis"):
            coeffs = exact_analyze(eig, spectral, vertex, f)
        _write_partition(spectral, vertex, args, digest, out, outputs)
    else:
        with _timed(timings, "setup"):
            design, cache = _load_or_build_design(L, args, digest, out, outputs)
            density = None
            plan = _fast_plan(L, cache, design, density, args, f)
        with _timed(timings, "analysis"):
            coeffs = fast_analyze(L, design, plan, f)
        _write_plan(plan, digest, out, outputs)
    _write_coefficients(coeffs, digest, out, outputs)
    _write_manifest(out, args, {"graph": args.graph, "signal": args.signal},
                    outputs, timings)
    return 0


def cmd_synthesize(args) -> int:
    timings, outputs = {}, {}
    out = _ensure_out_dir(args.out_dir)
    graph, L = _load_graph_operator(args, timings)
    digest = graph.digest()
    reference = None
    inputs = {"graph": args.graph}
    if args.signal:
        reference = _load_signal_checked(graph, args.signal)
        inputs["signal"] = args.signal
    if args.mode == "exact":
        with _timed(timings, "setup"):
            spectral, vertex = _load_partition(digest, out)
            eig = dense_eigendecomposition(L)
            coeffs = _load_coefficients(digest, out, spectral.n_bands)
        with _timed(timings, "synthesis"):
            recon = exact_synthesize(eig, spectral, vertex, coeffs)
        report = {"mode": args.mode, "n_stored": coeffs.n_stored()}
    else:
        with _timed(timings, "setup"):
            design, _ = _load_or_build_design(L, args, digest, out, outputs)
            plan = _load_plan(digest, out)
            if plan.adapted != (args.mode == "fast-adapted"):
                raise InputError(
                    f"plan.json was built "
                    f"{'with' if plan.adapted else 'without'} signal "
                    f"adaptation; pass the matching --mode"
                )
            coeffs = _load_coefficients(digest, out, design.M)
        with _timed(timings, "synthesis"):
            recon, solve_report = synthesize_fast(
                L, design, plan, coeffs, _synthesis_config(args),
                threads=_resolve_threads(args.threads))
        report = {"mode": args.mode, "n_stored": coeffs.n_stored(),
                  **solve_report}
    if reference is not None:
        report["nmse"] = nmse(recon, reference)
    _write_reconstruction(recon, digest, out, outputs)
    _write_report(report, digest, out, outputs)
    _write_manifest(out, args, inputs, outputs, timings)
    return 0


def cmd_roundtrip(args) -> int:
    timings, outputs = {}, {}
    out = _ensure_out_dir(args.out_dir)
    graph, L = _load_graph_operator(args, timings)
    digest = graph.digest()
    f = _load_signal_checked(graph, args.signal)
    if args.mode == "exact":
        eig, spectral, vertex = _exact_partitions(L, args, timings)
        with _timed(timings, "analysis"):
            coeffs = exact_analyze(eig, spectral, vertex, f)
        with _timed(timings, "synthesis"):
            recon = exact_synthesize(eig, spectral, vertex, coeffs)
        _write_partition(spectral, vertex, args, digest, out, outputs)
        report = {"mode": args.mode, "n_stored": coeffs.n_stored()}
    else:
        with _timed(timings, "setup"):
            design, cache = _load_or_build_design(L, args, digest, out, outputs)
            plan = _fast_plan(L, cache, design, None, args, f)
        with _timed(timings, "analysis"):
            coeffs = fast_analyze(L, design, plan, f)
        with _timed(timings, "synthesis"):
            recon, solve_report = synthesize_fast(
                L, design, plan, coeffs, _synthesis_config(args),
                threads=_resolve_threads(args.threads))
        _write_plan(plan, digest, out, outputs)
        report = {"mode": args.mode, "n_stored": coeffs.n_stored(),
                  **solve_report}
    report["nmse"] = nmse(recon, f)
    _write_coefficients(coeffs, digest, out, outputs)
    _write_reconstruction(recon, digest, out, outputs)
    _write_report(report, digest, out, outputs)
    _write_manifest(out, args, {"graph": args.graph, "signal": args.signal},
                    outputs, timings)
    return 0


def _parse_sparsity(text, n_atoms):
    if text:
        try:
            levels = sorted({int(tok) for tok in text.split(",") if tok.strip()})
        except ValueError:
            raise InputError(f"--sparsity must be comma-separated integers, got {text!r}")
    else:
        n = n_atoms
        levels = sorted({max(1, n // 50), max(1, n // 20), max(1, n // 10),
                         max(1, n // 5), max(1, n // 2), n})
    for t in levels:
        if not 1 <= t <= n_atoms:
            raise InputError(f"sparsity {t} outside 1..{n_atoms}")
    return levels


def cmd_compress(args) -> int:
    timings, outputs = {}, {}
    out = _ensure_out_dir(args.out_dir)
    graph, L = _load_graph_operator(args, timings)
    digest = graph.digest()
    f = _load_signal_checked(graph, args.signal)
    eig, spectral, vertex = _exact_partitions(L, args, timings)
    with _timed(timings, "analysis"):
        coeffs = exact_analyze(eig, spectral, vertex, f)
        rows = [(m + 1, int(v) + 1, float(y))
                for m, (verts, values) in enumerate(coeffs.bands)
                for v, y in zip(verts, values)]
        rows.sort(key=lambda r: (-abs(r[2]), r[0], r[1]))
        path = os.path.join(out, "sorted_coefficients.csv")
        _write_rows(path, digest, "rank,band,vertex,value",
                    [f"{k + 1},{m},{v},{y!r}" for k, (m, v, y) in enumerate(rows)])
        outputs["sorted_coefficients.csv"] = file_digest(path)
    with _timed(timings, "compression"):
        dictionary, _ = build_dictionary(eig, spectral, vertex)
        levels = _parse_sparsity(args.sparsity, dictionary.shape[1])
        t_max = max(levels)
        _, bank_resid = omp_sparse_code(dictionary, f, t_max)
        _, delta_resid = omp_sparse_code(np.eye(graph.n_vertices), f,
                                         min(t_max, graph.n_vertices))
        denom = float(f @ f)
        if denom == 0:
            raise InputError("cannot compress the zero signal")

        def curve(resid, t):
            r = float(resid[min(t, len(resid) - 1)])
            return r * r / denom

        lines = [f"{t},{curve(bank_resid, t)!r},{curve(delta_resid, t)!r}"
                 for t in levels]
        path = os.path.join(out, "compression.csv")
        _write_rows(path, digest, "sparsity,nmse_bank,nmse_delta", lines)
        outputs["compression.csv"] = file_digest(path)
    _write_manifest(out, args, {"graph": args.graph, "signal": args.signal},
                    outputs, timings)
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    p.add_argument("--graph", required=True,
                   help="edge list (i j w, 1-based) or Matrix Market file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: MCSFB_THREADS or 1)")


def _add_density_params(p, k_default):
    p.add_argument("--K", type=int, default=k_default,
                   help="polynomial degree")
    p.add_argument("--J", type=int, default=defaults.PROBE_VECTORS,
                   help="random probe vectors")
    p.add_argument("--T-points", type=int, default=defaults.CDF_POINTS,
                   help="distribution interpolation nodes")


def _add_design_params(p):
    p.add_argument("--M", type=int, default=5, help="number of bands")
    p.add_argument("--spacing", choices=SPACINGS, default="adapted-log")
    p.add_argument("--delta", type=float, default=defaults.BAND_ADJUST_DELTA,
                   help="difference-quotient half width for band-end tuning")


def _add_transform_params(p):
    p.add_argument("--signal", required=True, help="one value per line")
    p.add_argument("--mode", choices=_MODES, default="fast")
    p.add_argument("--samples-factor", type=float, default=1.0,
                   help="samples as a multiple of N (1.0 = critical)")


def _add_synthesis_params(p):
    p.add_argument("--kappa", type=float, default=defaults.KAPPA,
                   help="sampling-fidelity weight")
    p.add_argument("--cg-tol", type=float, default=1e-10)
    p.add_argument("--cg-max-iters", type=int, default=250)
    p.add_argument("--penalty", choices=_PENALTIES, default="spline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcsfb",
        description="Critically sampled spectral filter bank for graph signals",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("density", help="estimate the cumulative spectral density")
    _add_common(p)
    _add_density_params(p, defaults.DENSITY_DEGREE)

    p = sub.add_parser("design", help="design the polynomial filter bank")
    _add_common(p)
    _add_density_params(p, defaults.TRANSFORM_DEGREE)
    _add_design_params(p)

    p = sub.add_parser("analyze", help="compute downsampled band coefficients")
    _add_common(p)
    _add_density_params(p, defaults.TRANSFORM_DEGREE)
    _add_design_params(p)
    _add_transform_params(p)

    p = sub.add_parser("synthesize", help="reconstruct from stored coefficients")
    _add_common(p)
    _add_density_params(p, defaults.TRANSFORM_DEGREE)
    _add_design_params(p)
    p.add_argument("--signal", default=None,
                   help="optional reference for error reporting")
    p.add_argument("--mode", choices=_MODES, default="fast")
    p.add_argument("--samples-factor", type=float, default=1.0)
    _add_synthesis_params(p)

    p = sub.add_parser("roundtrip", help="analyze + synthesize + error report")
    _add_common(p)
    _add_density_params(p, defaults.TRANSFORM_DEGREE)
    _add_design_params(p)
    _add_transform_params(p)
    _add_synthesis_params(p)

    p = sub.add_parser("compress", help="sparse-coding error curves (small graphs)")
    _add_common(p)
    _add_design_params(p)
    p.add_argument("--signal", required=True)
    p.add_argument("--sparsity", default=None,
                   help="comma-separated sparsity levels (default: N-derived)")

    return parser


_DISPATCH = {
    "density": cmd_density,
    "design": cmd_design,
    "analyze": cmd_analyze,
    "synthesize": cmd_synthesize,
    "roundtrip": cmd_roundtrip,
    "compress": cmd_compress,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
