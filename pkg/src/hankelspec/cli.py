"""Command line front end.

One executable with a subcommand per workflow: synthesize a signal,
sample observations, recover from partial data, measure incoherence,
run the certificate machinery, and drive the three canned experiments
(phase transition sweep, noisy recovery demo, super-resolution demo).
Every command reads a JSON spec, writes its artifacts into an output
directory, and is deterministic for a fixed spec and seed.

Exit codes: 0 on success, 2 on validation problems (bad spec, bad
flags, unreadable files), 3 on numerical failure (the solver did not
converge or produced non-finite output).  On numerical failure the
artifacts are still written so the partial run can be inspected.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .certificate import TangentSpace, certificate_gate, golfing_certificate, make_golfing_plan
from .experiments import (
    PHASE_HEADER,
    RECONSTRUCTION_HEADER,
    SuperresSpec,
    draw_trial_signal,
    noisy_demo,
    phase_table_rows,
    phase_transition,
    superres_demo,
)
from .formats import read_json, write_complex_array_csv, write_json, write_table_csv
from .hankel import EnhancementMap, PencilShape, default_pencils
from .incoherence import incoherence_report
from .model import (
    ObservationSet,
    SpectralSignal,
    derive_rng,
    make_observations,
    sample_iid,
    sample_uniform,
    synthesize,
)
from .solver import SolverConfig, svt_recover


class NumericalFailure(RuntimeError):
    """The computation ran but its outcome is numerically unusable."""


EXPERIMENT_KINDS = ("phase_transition", "noisy_recovery", "superres", "single_recovery")


@dataclass(frozen=True)
class ExperimentSpec:
    """Parsed experiment description shared by the canned commands.

    Attributes
    ----------
    kind : str
        One of ``phase_transition``, ``noisy_recovery``, ``superres``,
        ``single_recovery``.
    dims : tuple of int, optional
        Signal grid (all kinds except superres).
    grid_r, grid_m : tuple of int
        Sparsity and sample-count grids (phase_transition).
    trials : int
        Trials per grid cell (phase_transition), at least 1.
    r, m : int
        Sparsity and sample count (noisy_recovery, single_recovery).
    snr : float
        Amplitude signal-to-noise ratio (noisy_recovery).
    include_noiseless : bool
        Also run the paired noiseless instance (noisy_recovery).
    superres : SuperresSpec, optional
        Source layout and cutoffs (superres).
    solver : SolverConfig, optional
        Solver controls forwarded to every recovery.
    seed : int
        Default seed; the ``--seed`` flag overrides it.
    output_path : str, optional
        Default output directory; the ``--out`` flag overrides it.
    """

    kind: str
    dims: Optional[Tuple[int, ...]] = None
    grid_r: Tuple[int, ...] = ()
    grid_m: Tuple[int, ...] = ()
    trials: int = 1
    r: int = 0
    m: int = 0
    snr: float = 10.0
    include_noiseless: bool = False
    superres: Optional[SuperresSpec] = None
    solver: Optional[SolverConfig] = None
    seed: int = 0
    output_path: Optional[str] = None

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentSpec":
        kind = obj.get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {kind!r}")
        solver = (
            SolverConfig.from_json_dict(obj["solver"]) if "solver" in obj else None
        )
        common = {
            "kind": kind,
            "solver": solver,
            "seed": int(obj.get("seed", 0)),
            "output_path": obj.get("output_path"),
        }
        if kind == "phase_transition":
            grid = obj["grid"]
            grid_r = tuple(int(v) for v in grid["r"])
            grid_m = tuple(int(v) for v in grid["m"])
            trials = int(obj["trials"])
            if not grid_r or not grid_m:
                raise ValueError("grid must list at least one r and one m")
            if trials < 1:
                raise ValueError("trials must be at least 1")
            return cls(
                dims=tuple(int(n) for n in obj["dims"]),
                grid_r=grid_r,
                grid_m=grid_m,
                trials=trials,
                **common,
            )
        if kind == "superres":
            return cls(superres=SuperresSpec.from_json_dict(obj), **common)
        dims = tuple(int(n) for n in obj["dims"])
        r = int(obj["r"])
        m = int(obj["m"])
        if r < 1:
            raise ValueError("r must be at least 1")
        if m < 0:
            raise ValueError("m must be nonnegative")
        if kind == "noisy_recovery":
            return cls(
                dims=dims,
                r=r,
                m=m,
                snr=float(obj.get("snr", 10.0)),
                include_noiseless=bool(obj.get("include_noiseless", False)),
                **common,
            )
        return cls(dims=dims, r=r, m=m, **common)


def _parse_pencil(text: Optional[str]) -> Optional[tuple]:
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ValueError(f"--pencil expects comma-separated integers, got {text!r}") from exc


def _parse_snr(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        return float(value)
    return float(value)


def _resolve_seed(args, obj: dict) -> int:
    if args.seed is not None:
        return int(args.seed)
    return int(obj.get("seed", 0))


def _resolve_out(args, obj: dict) -> Path:
    target = args.out if args.out is not None else obj.get("output_path")
    if target is None:
        raise ValueError("no output directory: pass --out or set output_path in the spec")
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_solver(obj: dict) -> Optional[SolverConfig]:
    if "solver" in obj:
        return SolverConfig.from_json_dict(obj["solver"])
    return None


def _cmd_synth(args) -> int:
    obj = read_json(args.spec)
    signal = SpectralSignal.from_json_dict(obj)
    data = synthesize(signal)
    out = _resolve_out(args, obj)
    write_complex_array_csv(out / "signal.csv", data)
    write_json(out / "signal.json", signal.to_json_dict())
    return 0


def _cmd_sample(args) -> int:
    obj = read_json(args.spec)
    signal = SpectralSignal.from_json_dict(obj["signal"])
    m = int(obj["m"])
    scheme = obj.get("scheme", "uniform")
    snr = _parse_snr(obj.get("snr", "inf"))
    seed = _resolve_seed(args, obj)
    data = synthesize(signal)
    if scheme == "uniform":
        indices = sample_uniform(signal.dims, m, derive_rng(seed, 0))
    elif scheme == "iid":
        indices = sample_iid(signal.dims, m, derive_rng(seed, 0))
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    obs = make_observations(data, indices, snr_amplitude=snr, seed=derive_rng(seed, 1))
    out = _resolve_out(args, obj)
    write_json(out / "observations.json", obs.to_json_dict())
    return 0


def _cmd_recover(args) -> int:
    obj = read_json(args.spec)
    seed = _resolve_seed(args, obj)
    if obj.get("kind") == "single_recovery":
        spec = ExperimentSpec.from_json_dict(obj)
        signal = draw_trial_signal(derive_rng(seed, 0), spec.dims, spec.r)
        truth = synthesize(signal)
        indices = sample_uniform(spec.dims, spec.m, derive_rng(seed, 1))
        obs = make_observations(truth, indices)
        config = spec.solver
    else:
        obs = ObservationSet.from_json_dict(obj["observations"])
        config = _load_solver(obj)
        truth = None
        if "truth" in obj:
            truth = synthesize(SpectralSignal.from_json_dict(obj["truth"]))
    pencils = _parse_pencil(args.pencil)
    result = svt_recover(obs, pencil=pencils, config=config, truth=truth, seed=seed)
    used = tuple(pencils) if pencils is not None else default_pencils(obs.dims)
    report = {
        "dims": list(obs.dims),
        "pencils": list(used),
        "m": obs.m,
        "noise_level": obs.noise_level,
        "iters": result.iters,
        "converged": result.converged,
        "nmse": result.nmse,
        "config": (config if config is not None else SolverConfig()).to_json_dict(),
    }
    out = _resolve_out(args, obj)
    write_complex_array_csv(out / "recovered.csv", result.data_hat)
    write_json(out / "recovery.json", report)
    if not np.all(np.isfinite(result.data_hat)):
        raise NumericalFailure("recovered array contains non-finite entries")
    if not result.converged:
        raise NumericalFailure(f"solver did not converge within {result.iters} iterations")
    return 0


def _cmd_incoherence(args) -> int:
    obj = read_json(args.spec)
    signal = SpectralSignal.from_json_dict(obj["signal"])
    m = obj.get("m")
    report = incoherence_report(
        signal,
        pencils=_parse_pencil(args.pencil),
        m=None if m is None else int(m),
    )
    out = _resolve_out(args, obj)
    write_json(out / "incoherence.json", report.to_json_dict())
    return 0


def _cmd_certify(args) -> int:
    obj = read_json(args.spec)
    signal = SpectralSignal.from_json_dict(obj["signal"])
    m = int(obj["m"])
    seed = _resolve_seed(args, obj)
    pencils = _parse_pencil(args.pencil)
    if pencils is None:
        pencils = default_pencils(signal.dims)
    pencil = PencilShape(signal.dims, pencils)
    plan = make_golfing_plan(
        pencil.size,
        m,
        epsilon=float(obj.get("epsilon", 0.25)),
        scheme=obj.get("scheme", "bernoulli"),
        seed=seed,
        j0=obj.get("j0"),
    )
    _, report = golfing_certificate(signal, plan=plan, pencils=pencils)
    total = np.zeros(pencil.size, dtype=np.int64)
    for counts in plan.batch_counts:
        total += counts
    gate = certificate_gate(
        TangentSpace.from_signal(signal, pencils),
        EnhancementMap(pencil),
        np.minimum(total, 1),
    )
    out = _resolve_out(args, obj)
    write_json(
        out / "certify.json",
        {"gate": gate._asdict(), "golfing": report.to_json_dict()},
    )
    return 0


def _cmd_phase_transition(args) -> int:
    obj = read_json(args.spec)
    spec = ExperimentSpec.from_json_dict(obj)
    if spec.kind != "phase_transition":
        raise ValueError(f"expected a phase_transition spec, got {spec.kind!r}")
    cells = phase_transition(
        spec.dims,
        spec.grid_r,
        spec.grid_m,
        spec.trials,
        seed=_resolve_seed(args, obj),
        config=spec.solver,
        threads=args.threads,
    )
    out = _resolve_out(args, obj)
    write_table_csv(out / "phase_transition.csv", PHASE_HEADER, phase_table_rows(cells))
    return 0


def _cmd_noisy_demo(args) -> int:
    obj = read_json(args.spec)
    spec = ExperimentSpec.from_json_dict(obj)
    if spec.kind != "noisy_recovery":
        raise ValueError(f"expected a noisy_recovery spec, got {spec.kind!r}")
    report, table = noisy_demo(
        spec.dims,
        spec.r,
        spec.m,
        spec.snr,
        seed=_resolve_seed(args, obj),
        config=spec.solver,
        pencils=_parse_pencil(args.pencil),
        include_noiseless=spec.include_noiseless,
    )
    out = _resolve_out(args, obj)
    write_json(out / "noisy_demo.json", report.to_json_dict())
    write_table_csv(out / "reconstruction.csv", RECONSTRUCTION_HEADER, table)
    return 0


def _cmd_superres(args) -> int:
    obj = read_json(args.spec)
    spec = ExperimentSpec.from_json_dict(obj)
    if spec.kind != "superres":
        raise ValueError(f"expected a superres spec, got {spec.kind!r}")
    result = superres_demo(
        spec.superres,
        config=spec.solver,
        pencils=_parse_pencil(args.pencil),
        seed=_resolve_seed(args, obj),
    )
    out = _resolve_out(args, obj)
    write_json(out / "superres.json", result.to_json_dict())
    write_complex_array_csv(out / "truth_image.csv", result.truth_image)
    write_complex_array_csv(out / "lowres_image.csv", result.lowres_image)
    write_complex_array_csv(out / "recovered_image.csv", result.recovered_image)
    return 0


def _add_common(sub, pencil: bool = False, threads: bool = False) -> None:
    sub.add_argument("--spec", required=True, help="path to the JSON spec")
    sub.add_argument("--out", default=None, help="output directory (created if missing)")
    sub.add_argument("--seed", type=int, default=None, help="override the spec seed")
    if pencil:
        sub.add_argument(
            "--pencil", default=None, help="comma-separated per-axis pencil parameters"
        )
    if threads:
        sub.add_argument("--threads", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    """Construct the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(
        prog="hankelspec",
        description="Spectrally sparse signal recovery via structured low-rank completion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="evaluate a sparse sinusoid signal on its grid")
    _add_common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sample", help="draw observed entries from a signal")
    _add_common(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("recover", help="complete a signal from partial observations")
    _add_common(p, pencil=True)
    p.set_defaults(func=_cmd_recover)

    p = sub.add_parser("incoherence", help="measure incoherence and sample bounds")
    _add_common(p, pencil=True)
    p.set_defaults(func=_cmd_incoherence)

    p = sub.add_parser("certify", help="run the concentration gate and golfing construction")
    _add_common(p, pencil=True)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("phase-transition", help="Monte Carlo success-rate sweep")
    _add_common(p, threads=True)
    p.set_defaults(func=_cmd_phase_transition)

    p = sub.add_parser("noisy-demo", help="noisy recovery with the stability bound")
    _add_common(p, pencil=True)
    p.set_defaults(func=_cmd_noisy_demo)

    p = sub.add_parser("superres", help="super-resolve point sources from low frequencies")
    _add_common(p, pencil=True)
    p.set_defaults(func=_cmd_superres)

    return parser


def main(argv=None) -> int:
    """Run one subcommand and translate failures into exit codes.

    Parameters
    ----------
    argv : list of str, optional
        Arguments without the program name; defaults to ``sys.argv[1:]``.

    Returns
    -------
    int
        0 on success, 2 on validation errors, 3 on numerical failure.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
