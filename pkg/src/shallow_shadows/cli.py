"""Command-line driver: calibrate, acquire, estimate and theory.

Every command reads one TOML config (optional), applies flag overrides and
writes deterministic JSON, JSONL or CSV files into the output directory. The
output directory is resolved as ``--out`` flag, then the ``SHALLOW_SHADOWS_OUTPUT``
environment variable, then ``output_dir`` in the config.

Exit codes: 0 on success, 1 when a computation fails, 2 for configuration
errors (bad keys, missing files, mismatched inputs).
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

import numpy as np

from .calibration import CalibrationResult, PosteriorSpec, empirical_weights, fit_map, sample_posterior
from .circuits import EnsembleSpec
from .estimator import (
    estimate_linear,
    estimate_purity,
    fidelity_observable,
    pauli_observable,
    reports_to_csv,
)
from .mps import PauliBasisMps
from .noise import NoiseModel, TwirledNoiseParams, random_noise_model
from .simulate import STATE_NAMES, ShadowDataset, acquire_dataset, prepare_named_state
from .walk import (
    GRID_FIELDS,
    OPTIMAL_FIELDS,
    collect_traces,
    fit_phenomenology,
    optimal_depth_grid,
    rows_to_csv,
    theory_grid,
)
from .weights import build_occupation_weights, invert_weights

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_OUTPUT_DIR = "SHALLOW_SHADOWS_OUTPUT"
EXIT_OK, EXIT_COMPUTE, EXIT_CONFIG = 0, 1, 2

# stream tags for seeds derived from the master seed
_CALIBRATION_DATA, _ACQUISITION_DATA, _SAMPLING, _BOOTSTRAP, _THEORY = range(5)

DEFAULTS = {
    "seed": 0,
    "output_dir": "shallow_shadows_out",
    "ensemble": {"n": 8, "depth": 1, "two_qubit": "cnot"},
    "noise": {"file": None, "seed": None},
    "state": {"name": "zero"},
    "dataset": {"circuits": 10000, "shots": 100},
    "calibration": {
        "circuits": 10000,
        "shots": 100,
        "max_weight": 6,
        "n_bootstrap": 200,
        "prior_file": None,
        "prior_center": 0.01,
        "log_sigma": 2.0,
        "samples": 0,
        "chi_max": 64,
    },
    "estimate": {"paulis": [], "fidelity": [], "purity": [], "n_boot": 200, "dataset": None, "calibration": None},
    "theory": {
        "ks": [2, 4, 8, 16],
        "ds": [0, 1, 2, 4, 8],
        "lams": [0.0, 0.01, 0.02],
        "n_walkers": 20000,
        "fit_ks": list(range(2, 13)),
        "fit_t_max": 12,
        "fit_walkers": 40000,
        "optimal_ks": [8, 16, 32, 64],
        "optimal_lams": [0.0, 0.005, 0.01, 0.02],
    },
}


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


# --------------------------------------------------------------------------
# configuration


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        name = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {name!r} must be a table")
            out[key] = _merge(base[key], value, name + ".")
        else:
            out[key] = value
    return out


def load_config(path: str | os.PathLike | None = None, overrides: dict | None = None) -> dict:
    """Defaults, updated by the TOML file at ``path`` and then by ``overrides``.

    Relative file references inside the config resolve against the config's directory.

    Raises:
        ConfigError: on a missing or unparsable file or an unknown key.
    """
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {str(path)!r} not found")
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {str(path)!r}: {exc}") from exc
        cfg = _merge(cfg, data)
        for section, key in (("noise", "file"), ("calibration", "prior_file")):
            ref = cfg[section][key]
            if ref is not None and not Path(ref).is_absolute():
                cfg[section][key] = str(path.parent / ref)
    if overrides:
        cfg = _merge(cfg, overrides)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    try:
        EnsembleSpec(int(cfg["ensemble"]["n"]), int(cfg["ensemble"]["depth"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid ensemble: {exc}") from exc
    if cfg["ensemble"]["two_qubit"] not in ("cnot", "haar"):
        raise ConfigError("ensemble.two_qubit must be 'cnot' or 'haar'")
    if cfg["state"]["name"] not in STATE_NAMES:
        raise ConfigError(f"unknown state {cfg['state']['name']!r}; choose from {STATE_NAMES}")
    for name in cfg["estimate"]["fidelity"]:
        if name not in STATE_NAMES:
            raise ConfigError(f"unknown fidelity target {name!r}")
    for section in ("dataset", "calibration"):
        if int(cfg[section]["circuits"]) < 1 or int(cfg[section]["shots"]) < 1:
            raise ConfigError(f"{section} needs at least one circuit and one shot")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    for section, key in (("noise", "file"), ("calibration", "prior_file")):
        ref = cfg[section][key]
        if ref is not None and not Path(ref).is_file():
            raise ConfigError(f"{section}.{key} {ref!r} not found")
    if cfg["noise"]["file"] is not None and cfg["noise"]["seed"] is not None:
        raise ConfigError("set either noise.file or noise.seed, not both")


def output_dir(cfg: dict, flag: str | None = None) -> Path:
    """Flag, then environment variable, then config."""
    return Path(flag or os.environ.get(ENV_OUTPUT_DIR) or cfg["output_dir"])


def subseed(master: int, tag: int) -> int:
    """Independent integer seed for stream ``tag`` of the master seed."""
    return int(np.random.SeedSequence(master, spawn_key=(tag,)).generate_state(1, np.uint64)[0] >> 1)


def _logged_config(cfg: dict) -> dict:
    # the output location does not affect results, so it stays out of the files
    out = copy.deepcopy(cfg)
    out.pop("output_dir")
    return out


def _spec(cfg: dict) -> EnsembleSpec:
    return EnsembleSpec(int(cfg["ensemble"]["n"]), int(cfg["ensemble"]["depth"]))


def truth_model(cfg: dict) -> NoiseModel | None:
    """Ground-truth noise from ``noise.file`` or ``noise.seed``; ``None`` means noiseless."""
    n = int(cfg["ensemble"]["n"])
    noise = cfg["noise"]
    if noise["file"] is not None:
        try:
            model = NoiseModel.from_json(json.loads(Path(noise["file"]).read_text(encoding="utf-8")))
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read noise file {noise['file']!r}: {exc}") from exc
        if model.n != n:
            raise ConfigError(f"noise file acts on {model.n} qubits, ensemble has {n}")
        return model
    if noise["seed"] is not None:
        return random_noise_model(n, np.random.default_rng(int(noise["seed"])))
    return None


def _prior_center(cfg: dict) -> TwirledNoiseParams:
    cal = cfg["calibration"]
    n = int(cfg["ensemble"]["n"])
    if cal["prior_file"] is None:
        c = float(cal["prior_center"])
        if c <= 0:
            raise ConfigError("calibration.prior_center must be positive")
        return TwirledNoiseParams.uniform(n, c, c, c)
    try:
        center = TwirledNoiseParams.from_json(json.loads(Path(cal["prior_file"]).read_text(encoding="utf-8")))
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read prior file {cal['prior_file']!r}: {exc}") from exc
    if center.n != n:
        raise ConfigError(f"prior file has {center.n} qubits, ensemble has {n}")
    return center


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_truth(out: Path, truth: NoiseModel | None) -> None:
    if truth is not None:
        _write_json(out / "truth.json", truth.to_json())


# --------------------------------------------------------------------------
# commands


def cmd_calibrate(cfg: dict, out: Path) -> list[Path]:
    """Simulate zero-state calibration data, fit the noise and write the inverse weights."""
    spec = _spec(cfg)
    cal = cfg["calibration"]
    truth = truth_model(cfg)
    center = _prior_center(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_truth(out, truth)
    ds = acquire_dataset(
        prepare_named_state("zero", spec.n),
        spec,
        truth,
        int(cal["circuits"]),
        int(cal["shots"]),
        seed=subseed(cfg["seed"], _CALIBRATION_DATA),
    )
    ew = empirical_weights(ds, int(cal["max_weight"]), int(cal["n_bootstrap"]), seed=subseed(cfg["seed"], _BOOTSTRAP))
    post = PosteriorSpec(ew, center, log_sigma=float(cal["log_sigma"]))
    result = fit_map(post, spec)
    if int(cal["samples"]) > 0:
        rng = np.random.default_rng(subseed(cfg["seed"], _SAMPLING))
        samples, diag = sample_posterior(post, spec, int(cal["samples"]), rng, init=result.map_estimate)
        result.posterior_samples = samples
        result.diagnostics["sampling"] = diag
    weights = build_occupation_weights(spec, result.map_estimate, cfg["ensemble"]["two_qubit"])
    inverse = invert_weights(weights, chi_max=int(cal["chi_max"]))
    payload = {
        "config": _logged_config(cfg),
        "spec": spec.to_dict(),
        "noise": "noiseless" if truth is None else truth.fingerprint(),
        "calibration": result.to_json(),
        "empirical_weights": ew.to_json(),
    }
    files = [out / "calibration.json", out / "inverse_weights.json"]
    _write_json(files[0], payload)
    _write_json(files[1], inverse.to_json())
    return files


def cmd_acquire(cfg: dict, out: Path) -> list[Path]:
    """Simulate the application-state dataset."""
    spec = _spec(cfg)
    truth = truth_model(cfg)
    out.mkdir(parents=True, exist_ok=True)
    _write_truth(out, truth)
    ds = acquire_dataset(
        prepare_named_state(cfg["state"]["name"], spec.n),
        spec,
        truth,
        int(cfg["dataset"]["circuits"]),
        int(cfg["dataset"]["shots"]),
        seed=subseed(cfg["seed"], _ACQUISITION_DATA),
    )
    path = out / "dataset.jsonl"
    ds.to_jsonl(path)
    return [path]


def _load_inputs(cfg: dict, out: Path) -> tuple[ShadowDataset, PauliBasisMps]:
    est = cfg["estimate"]
    ds_path = Path(est["dataset"] or out / "dataset.jsonl")
    cal_dir = Path(est["calibration"] or out)
    cal_path, inv_path = cal_dir / "calibration.json", cal_dir / "inverse_weights.json"
    for p in (ds_path, cal_path, inv_path):
        if not p.is_file():
            raise ConfigError(f"input file {str(p)!r} not found")
    ds = ShadowDataset.from_jsonl(ds_path)
    cal_spec = EnsembleSpec.from_dict(json.loads(cal_path.read_text(encoding="utf-8"))["spec"])
    if cal_spec != ds.spec:
        raise ConfigError(f"dataset ensemble {ds.spec.to_dict()} differs from calibration {cal_spec.to_dict()}")
    inverse = PauliBasisMps.from_json(json.loads(inv_path.read_text(encoding="utf-8")))
    return ds, inverse


def cmd_estimate(cfg: dict, out: Path) -> list[Path]:
    """Mitigated and unmitigated estimates of every requested observable.

    Unmitigated values reuse the same data and estimator with the noiseless
    inverse weights swapped in.
    """
    est = cfg["estimate"]
    ds, mitigated = _load_inputs(cfg, out)
    spec = ds.spec
    n = spec.n
    requests = [pauli_observable(p) for p in est["paulis"]]
    for name in est["fidelity"]:
        requests.append(fidelity_observable(prepare_named_state(name, n)))
    for obs in requests:
        if obs.n != n:
            raise ConfigError(f"observable {obs.label!r} acts on {obs.n} qubits, data has {n}")
    regions = [list(r) for r in est["purity"]]
    for r in regions:
        if not r or min(r) < 0 or max(r) >= n:
            raise ConfigError(f"purity subset {r} is outside 0..{n - 1}")
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    if requests or regions:
        unmitigated = invert_weights(build_occupation_weights(spec, None, cfg["ensemble"]["two_qubit"]))
        seed = subseed(cfg["seed"], _BOOTSTRAP)
        n_boot = int(est["n_boot"])
        for inv, flag in ((mitigated, True), (unmitigated, False)):
            for obs in requests:
                reports.append(estimate_linear(ds, inv, obs, n_boot=n_boot, seed=seed, mitigated=flag))
            for r in regions:
                reports.append(estimate_purity(ds, inv, r, n_boot=n_boot, seed=seed, mitigated=flag))
    payload = {
        "config": _logged_config(cfg),
        "dataset": {k: v for k, v in ds.header().items() if k != "type"},
        "results": [r.to_json() for r in reports],
    }
    files = [out / "estimates.json", out / "estimates.csv"]
    _write_json(files[0], payload)
    reports_to_csv(reports, files[1])
    return files


def cmd_theory(cfg: dict, out: Path) -> list[Path]:
    """Phenomenology fit, walk and bound grid, and optimal-depth table."""
    th = cfg["theory"]
    seed = subseed(cfg["seed"], _THEORY)
    traces = collect_traces(th["fit_ks"], int(th["fit_t_max"]), int(th["fit_walkers"]), seed=seed)
    params = fit_phenomenology(traces)
    rows = theory_grid(th["ks"], th["ds"], th["lams"], params, int(th["n_walkers"]), seed=seed + 1)
    opt = optimal_depth_grid(th["optimal_ks"], th["optimal_lams"])
    out.mkdir(parents=True, exist_ok=True)
    files = [out / "phenomenology.json", out / "theory_grid.csv", out / "optimal_depth.csv"]
    _write_json(files[0], {"config": _logged_config(cfg), "params": params.to_json()})
    files[1].write_text(rows_to_csv(rows, GRID_FIELDS), encoding="utf-8")
    files[2].write_text(rows_to_csv(opt, OPTIMAL_FIELDS), encoding="utf-8")
    return files


COMMANDS = {"calibrate": cmd_calibrate, "acquire": cmd_acquire, "estimate": cmd_estimate, "theory": cmd_theory}


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shallow-shadows", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.splitlines()[0])
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--out", help=f"output directory (overrides ${ENV_OUTPUT_DIR} and the config)")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--n", type=int, help="number of qubits")
        p.add_argument("--depth", type=int, help="brickwork depth")
        if name in ("calibrate", "acquire"):
            p.add_argument("--circuits", type=int, help="number of random circuits")
            p.add_argument("--shots", type=int, help="shots per circuit")
            p.add_argument("--noise-file", help="ground-truth noise model JSON")
            p.add_argument("--noise-seed", type=int, help="seed of a random ground-truth noise model")
        if name == "calibrate":
            p.add_argument("--prior-file", help="prior centre as twirled-parameter JSON")
            p.add_argument("--samples", type=int, help="posterior samples to draw after the MAP fit")
        if name == "acquire":
            p.add_argument("--state", choices=STATE_NAMES, help="state to prepare")
        if name == "estimate":
            p.add_argument("--dataset", help="dataset JSONL (default: <out>/dataset.jsonl)")
            p.add_argument("--calibration", help="directory holding the calibration outputs (default: <out>)")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    ov: dict = {}

    def put(section, key, value):
        if value is not None:
            (ov.setdefault(section, {}) if section else ov)[key] = value

    put(None, "seed", args.seed)
    put("ensemble", "n", args.n)
    put("ensemble", "depth", args.depth)
    section = "calibration" if args.command == "calibrate" else "dataset"
    put(section, "circuits", getattr(args, "circuits", None))
    put(section, "shots", getattr(args, "shots", None))
    put("noise", "file", getattr(args, "noise_file", None))
    put("noise", "seed", getattr(args, "noise_seed", None))
    put("calibration", "prior_file", getattr(args, "prior_file", None))
    put("calibration", "samples", getattr(args, "samples", None))
    put("state", "name", getattr(args, "state", None))
    put("estimate", "dataset", getattr(args, "dataset", None))
    put("estimate", "calibration", getattr(args, "calibration", None))
    return ov


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        files = COMMANDS[args.command](cfg, output_dir(cfg, args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
