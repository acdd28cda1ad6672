"""Command-line entry point: config ingestion, fits, simulation, PPC, export.

Subcommands
-----------
fit-1q / fit-2q      run a tomography fit from an experiment config
simulate-1q / simulate-2q
                     generate a synthetic dataset from a simulation spec
ppc                  posterior-predictive quantile table from a saved trace
summarize            recompute the summary from a saved trace

All inputs are JSON documents carrying ``"schema": 1``. An experiment
config holds ``kind``, ``settings`` (a named table or explicit rows),
``instrument``, ``uncertainty``, ``counts``, and an optional
``likelihood_sigma_mode``; angles are radians and every sigma is explicit.
A simulation spec replaces ``counts`` with ``state``, ``flux``, and
``seed``. Outputs are a columnar trace CSV (one row per retained sample,
chain id first), a summary JSON, a PPC CSV, and a run manifest whose config
digest is stable under key reordering of the input file. File writes are
atomic (write-temp-then-rename).

Exit codes: 0 success, 2 schema/input error, 3 sampler failure,
4 converged with warnings (max split R-hat at or above 1.05).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .crosstalk import InstrumentParams1Q, InstrumentParams2Q
from .model import (
    ExperimentConfig,
    UncertaintySpec1Q,
    UncertaintySpec2Q,
    posterior_for,
)
from .optics import Settings1Q, Settings2Q, settings_table
from .posterior import ppc as run_ppc
from .posterior import summarize_state
from .sampler import SamplerConfig, SamplerError, Trace, ess, rhat, sample
from .simulate import SimSpec, bell_singlet, simulate_counts

__all__ = ["main", "ConfigError", "load_experiment_config", "load_sim_spec",
           "config_digest", "write_trace_csv", "read_trace_csv"]

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_SAMPLER = 3
EXIT_WARN = 4

RHAT_WARN = 1.05

_SETTINGS_FIELDS_1Q = ("eta_h", "eta_q", "theta_h", "theta_q", "h", "v")
_SETTINGS_FIELDS_2Q = ("theta_qa", "theta_ha", "theta_qb", "theta_hb",
                       "h_a", "v_a", "h_b", "v_b")
_TABLE_ALIASES = {"standard": "standard_waveplate"}


class ConfigError(ValueError):
    """Input-document validation failure, carrying the offending field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# ---------------------------------------------------------------------------
# JSON helpers
# ---------------------------------------------------------------------------

def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read file ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(str(path), "top level must be an object")
    return doc


_SENTINEL = object()


def _expect(doc: dict, key: str, kinds, path: str, default=_SENTINEL):
    if key not in doc:
        if default is not _SENTINEL:
            return default
        raise ConfigError(f"{path}.{key}", "missing required field")
    value = doc[key]
    if kinds is not None and not isinstance(value, kinds):
        kind_names = kinds.__name__ if isinstance(kinds, type) \
            else "/".join(k.__name__ for k in kinds)
        raise ConfigError(f"{path}.{key}",
                          f"expected {kind_names}, got {type(value).__name__}")
    return value


def _number(doc: dict, key: str, path: str) -> float:
    value = _expect(doc, key, (int, float), path)
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}", "expected a number, got a bool")
    return float(value)


def _check_schema(doc: dict, path: str) -> None:
    version = _expect(doc, "schema", int, path)
    if version != 1:
        raise ConfigError(f"{path}.schema", f"unsupported schema version {version}")


def config_digest(doc: dict) -> str:
    """SHA-256 of the canonical JSON form (key order independent)."""
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _dataclass_from(doc: dict, cls, path: str):
    import dataclasses
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = set(doc) - set(names)
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    kwargs = {name: _number(doc, name, path) for name in names}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def _parse_settings(doc, kind: str, path: str):
    if not isinstance(doc, dict):
        raise ConfigError(path, "settings must be an object")
    if ("table" in doc) == ("rows" in doc):
        raise ConfigError(path, "settings needs exactly one of 'table' or 'rows'")
    if "table" in doc:
        name = _expect(doc, "table", str, path)
        name = _TABLE_ALIASES.get(name, name)
        valid = {"1q": ("liquid_crystal", "standard_waveplate"),
                 "2q": ("two_qubit",)}[kind]
        if name not in valid:
            raise ConfigError(f"{path}.table",
                              f"expected one of {valid} for kind {kind}")
        return settings_table(name)
    rows = _expect(doc, "rows", list, path)
    names = _SETTINGS_FIELDS_1Q if kind == "1q" else _SETTINGS_FIELDS_2Q
    columns = {name: [] for name in names}
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ConfigError(f"{path}.rows[{i}]", "each row must be an object")
        for name in names:
            columns[name].append(_number(row, name, f"{path}.rows[{i}]"))
    cls = Settings1Q if kind == "1q" else Settings2Q
    try:
        return cls(**{name: np.array(vals) for name, vals in columns.items()})
    except ValueError as exc:
        raise ConfigError(f"{path}.rows", str(exc)) from exc


def _kind_classes(kind: str):
    if kind == "1q":
        return InstrumentParams1Q, UncertaintySpec1Q
    return InstrumentParams2Q, UncertaintySpec2Q


def load_experiment_config(path) -> tuple[ExperimentConfig, dict]:
    """Parse and validate an experiment config file.

    Returns the validated config plus the raw document (for digesting).
    """
    doc = _load_json(path)
    top = "config"
    _check_schema(doc, top)
    kind = _expect(doc, "kind", str, top)
    if kind not in ("1q", "2q"):
        raise ConfigError(f"{top}.kind", f"expected '1q' or '2q', got {kind!r}")
    inst_cls, unc_cls = _kind_classes(kind)
    settings = _parse_settings(_expect(doc, "settings", dict, top), kind,
                               f"{top}.settings")
    instrument = _dataclass_from(_expect(doc, "instrument", dict, top),
                                 inst_cls, f"{top}.instrument")
    uncertainty = _dataclass_from(_expect(doc, "uncertainty", dict, top),
                                  unc_cls, f"{top}.uncertainty")
    counts = _expect(doc, "counts", list, top)
    mode = _expect(doc, "likelihood_sigma_mode", str, top, "max_counts")
    try:
        config = ExperimentConfig(kind=kind, settings=settings,
                                  instrument=instrument, uncertainty=uncertainty,
                                  counts=np.asarray(counts, dtype=float),
                                  likelihood_sigma_mode=mode)
    except ValueError as exc:
        raise ConfigError(top, str(exc)) from exc
    return config, doc


def load_sim_spec(path) -> tuple[SimSpec, object, dict]:
    """Parse a simulation spec; returns (spec, settings, raw document)."""
    doc = _load_json(path)
    top = "spec"
    _check_schema(doc, top)
    kind = _expect(doc, "kind", str, top)
    if kind not in ("1q", "2q"):
        raise ConfigError(f"{top}.kind", f"expected '1q' or '2q', got {kind!r}")
    inst_cls, unc_cls = _kind_classes(kind)
    state_doc = _expect(doc, "state", dict, top)
    if "name" in state_doc:
        name = _expect(state_doc, "name", str, f"{top}.state")
        if name != "bell_singlet" or kind != "2q":
            raise ConfigError(f"{top}.state.name",
                              "only 'bell_singlet' (kind 2q) is a named state")
        state = bell_singlet()
    else:
        re_part = np.asarray(_expect(state_doc, "re", list, f"{top}.state"), dtype=float)
        im_part = np.asarray(_expect(state_doc, "im", list, f"{top}.state", []),
                             dtype=float)
        if im_part.size == 0:
            im_part = np.zeros_like(re_part)
        state = re_part + 1j * im_part
    instrument = _dataclass_from(_expect(doc, "instrument", dict, top),
                                 inst_cls, f"{top}.instrument")
    uncertainty = _dataclass_from(_expect(doc, "uncertainty", dict, top),
                                  unc_cls, f"{top}.uncertainty")
    flux = _number(doc, "flux", top)
    seed = _expect(doc, "seed", int, top)
    default_table = "liquid_crystal" if kind == "1q" else "two_qubit"
    settings = _parse_settings(_expect(doc, "settings", dict, top,
                                       {"table": default_table}),
                               kind, f"{top}.settings")
    try:
        spec = SimSpec(state=state, flux=flux, instrument=instrument,
                       uncertainty=uncertainty, seed=seed)
    except ValueError as exc:
        raise ConfigError(top, str(exc)) from exc
    if spec.kind != kind:
        raise ConfigError(f"{top}.state", f"state dimension does not match kind {kind}")
    return spec, settings, doc


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, doc: dict) -> None:
    _atomic_write(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def write_trace_csv(path: Path, trace: Trace) -> None:
    """Columnar trace: chain and draw ids, then one column per quantity."""
    names = list(trace.names) + list(trace.derived)
    lines = ["chain,draw," + ",".join(names)]
    for c in range(trace.chains):
        for d in range(trace.draws):
            vals = [repr(float(trace.array(n)[c, d])) for n in names]
            lines.append(f"{c},{d}," + ",".join(vals))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_trace_csv(path, latent_names) -> Trace:
    """Rebuild a Trace from a CSV written by :func:`write_trace_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if header[:2] != ["chain", "draw"]:
        raise ConfigError(str(path), "not a trace CSV (missing chain/draw columns)")
    names = header[2:]
    missing = [n for n in latent_names if n not in names]
    if missing:
        raise ConfigError(str(path), f"trace lacks latent columns {missing}")
    chains = max(int(r[0]) for r in rows) + 1
    draws = max(int(r[1]) for r in rows) + 1
    data = {name: np.empty((chains, draws)) for name in names}
    for r in rows:
        c, d = int(r[0]), int(r[1])
        for name, val in zip(names, r[2:]):
            data[name][c, d] = float(val)
    samples = {n: data[n] for n in latent_names}
    derived = {n: data[n] for n in names if n not in latent_names}
    return Trace(names=tuple(latent_names), samples=samples,
                 accept_stat=np.full(chains, np.nan),
                 step_size=np.full(chains, np.nan),
                 divergences=np.zeros(chains, dtype=int),
                 seed=-1, algorithm="unknown", derived=derived)


def _summary_doc(summary, config_kind: str) -> dict:
    quantities = {
        name: {
            "bme": q.bme,
            "hdi_lo": q.hdi.lo,
            "hdi_hi": q.hdi.hi,
            "rhat": q.rhat,
            "ess": q.ess,
        }
        for name, q in summary.quantities.items()
    }
    return {
        "schema": 1,
        "kind": config_kind,
        "hdi_prob": summary.hdi_prob,
        "quantities": quantities,
        "bme_density_matrix": {
            "re": summary.bme_rho.real.tolist(),
            "im": summary.bme_rho.imag.tolist(),
        },
    }


def _diagnostics(trace: Trace) -> dict:
    names = trace.quantity_names()
    rhats = [rhat(trace, n) for n in names] if trace.chains >= 2 else [float("nan")]
    esses = [ess(trace, n) for n in names] if trace.chains >= 2 else [float("nan")]
    return {
        "max_rhat": max(rhats),
        "min_ess": min(esses),
        "divergences": int(trace.divergences.sum()),
    }


def _manifest_doc(digest: str, sampler_cfg: SamplerConfig | None, seed: int,
                  duration: float, diagnostics: dict, extra: dict | None = None) -> dict:
    doc = {
        "schema": 1,
        "config_digest": digest,
        "tool_version": __version__,
        "seed": seed,
        "duration_seconds": duration,
        "diagnostics": diagnostics,
    }
    if sampler_cfg is not None:
        doc["sampler"] = {
            "algorithm": sampler_cfg.algorithm,
            "chains": sampler_cfg.chains,
            "draws": sampler_cfg.draws,
            "tune": sampler_cfg.tune,
            "target_accept": sampler_cfg.target_accept,
        }
    if extra:
        doc.update(extra)
    return doc


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_fit(args, kind: str) -> int:
    config, doc = load_experiment_config(args.config)
    if config.kind != kind:
        raise ConfigError("config.kind",
                          f"config is kind {config.kind}, command expects {kind}")
    sampler_cfg = SamplerConfig(
        chains=args.chains, draws=args.draws, tune=args.tune,
        target_accept=args.target_accept, seed=args.seed,
        algorithm=args.sampler)
    post = posterior_for(config)
    started = time.monotonic()
    trace = sample(post, post.layout, sampler_cfg)
    attach_derived(trace, config)
    duration = time.monotonic() - started
    summary = summarize_state(trace, config, hdi_prob=args.hdi_prob)
    diagnostics = _diagnostics(trace)

    out_dir = Path(args.out_dir)
    write_trace_csv(out_dir / "trace.csv", trace)
    _write_json(out_dir / "summary.json", _summary_doc(summary, config.kind))
    _write_json(out_dir / "manifest.json",
                _manifest_doc(config_digest(doc), sampler_cfg, args.seed,
                              duration, diagnostics))
    print(f"wrote {out_dir}/trace.csv, summary.json, manifest.json")
    print(f"max R-hat {diagnostics['max_rhat']:.4f}, "
          f"min ESS {diagnostics['min_ess']:.0f}, "
          f"divergences {diagnostics['divergences']}")
    if diagnostics["max_rhat"] >= RHAT_WARN:
        print(f"warning: max R-hat at or above {RHAT_WARN}", file=sys.stderr)
        return EXIT_WARN
    return EXIT_OK


def attach_derived(trace: Trace, config: ExperimentConfig) -> None:
    """Compute and attach the derived-quantity traces in place."""
    post = posterior_for(config)
    chains, draws = trace.chains, trace.draws
    latents = trace.latent_matrix()
    derived = {name: np.empty((chains, draws)) for name in post.derived_names}
    for c in range(chains):
        for d in range(draws):
            values = post.derived(latents[c, d])
            for name in derived:
                derived[name][c, d] = values[name]
    trace.derived.update(derived)


def _cmd_simulate(args, kind: str) -> int:
    spec, settings, doc = load_sim_spec(args.spec)
    if spec.kind != kind:
        raise ConfigError("spec.kind",
                          f"spec is kind {spec.kind}, command expects {kind}")
    started = time.monotonic()
    result = simulate_counts(spec, settings)
    duration = time.monotonic() - started

    dataset = {
        "schema": 1,
        "kind": kind,
        "settings": doc.get("settings", {"table": "liquid_crystal" if kind == "1q"
                                         else "two_qubit"}),
        "instrument": doc["instrument"],
        "uncertainty": doc["uncertainty"],
        "counts": [int(c) for c in result.counts],
        "likelihood_sigma_mode": "max_counts",
    }
    out_dir = Path(args.out_dir)
    _write_json(out_dir / "dataset.json", dataset)
    realized = {
        key: (value.tolist() if isinstance(value, np.ndarray) else value)
        for key, value in result.realized.items()
    }
    _write_json(out_dir / "manifest.json",
                _manifest_doc(config_digest(doc), None, spec.seed, duration,
                              {"max_rhat": None, "min_ess": None, "divergences": 0},
                              extra={"realized": realized}))
    print(f"wrote {out_dir}/dataset.json, manifest.json")
    return EXIT_OK


def _load_trace_with_manifest(args, config: ExperimentConfig, doc: dict) -> Trace:
    trace_path = Path(args.trace)
    manifest_path = trace_path.parent / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(str(manifest_path), "manifest.json not found next to trace")
    manifest = _load_json(manifest_path)
    digest = config_digest(doc)
    if manifest.get("config_digest") != digest:
        raise ConfigError(str(manifest_path),
                          "manifest digest does not match the supplied config")
    post = posterior_for(config)
    trace = read_trace_csv(trace_path, [site.name for site in post.layout])
    return trace


def _cmd_ppc(args) -> int:
    config, doc = load_experiment_config(args.config)
    trace = _load_trace_with_manifest(args, config, doc)
    result = run_ppc(trace, config, seed=args.seed, budget=args.budget)
    qs = (1, 5, 25, 50, 75, 95, 99)
    quantiles = result.quantiles(qs)
    lines = ["measurement,observed," + ",".join(f"q{q:02d}" for q in qs)
             + ",tail_prob"]
    for j in range(result.observed.size):
        vals = ",".join(repr(float(quantiles[k, j])) for k in range(len(qs)))
        lines.append(f"{j},{repr(float(result.observed[j]))},{vals},"
                     f"{repr(float(result.tail_prob[j]))}")
    out = Path(args.out)
    _atomic_write(out, "\n".join(lines) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    config, doc = load_experiment_config(args.config)
    trace = _load_trace_with_manifest(args, config, doc)
    if not trace.derived:
        attach_derived(trace, config)
    summary = summarize_state(trace, config, hdi_prob=args.hdi_prob)
    out = Path(args.out)
    _write_json(out, _summary_doc(summary, config.kind))
    print(f"wrote {out}")
    return EXIT_OK


def _add_sampler_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--draws", type=int, default=1000,
                        help="posterior draws per chain")
    parser.add_argument("--tune", type=int, default=800,
                        help="warm-up iterations per chain (discarded)")
    parser.add_argument("--chains", type=int, default=4)
    parser.add_argument("--target-accept", type=float, default=0.98)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sampler", choices=("nuts", "rwm"), default="nuts")
    parser.add_argument("--hdi-prob", type=float, default=0.95)
    parser.add_argument("--out-dir", default="qtomo-out")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtomo",
        description="Bayesian polarization qubit tomography with "
                    "instrument-uncertainty propagation")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for kind in ("1q", "2q"):
        fit = sub.add_parser(f"fit-{kind}", help=f"fit a {kind} dataset")
        fit.add_argument("config", help="experiment config JSON")
        _add_sampler_flags(fit)
        fit.set_defaults(func=lambda a, k=kind: _cmd_fit(a, k))

        sim = sub.add_parser(f"simulate-{kind}",
                             help=f"simulate a {kind} dataset")
        sim.add_argument("spec", help="simulation spec JSON")
        sim.add_argument("--out-dir", default="qtomo-out")
        sim.set_defaults(func=lambda a, k=kind: _cmd_simulate(a, k))

    ppc_cmd = sub.add_parser("ppc", help="posterior-predictive check table")
    ppc_cmd.add_argument("trace", help="trace CSV from a fit")
    ppc_cmd.add_argument("config", help="experiment config JSON")
    ppc_cmd.add_argument("--seed", type=int, default=0)
    ppc_cmd.add_argument("--budget", type=int, default=500)
    ppc_cmd.add_argument("--out", default="ppc.csv")
    ppc_cmd.set_defaults(func=_cmd_ppc)

    summ = sub.add_parser("summarize", help="recompute a summary from a trace")
    summ.add_argument("trace", help="trace CSV from a fit")
    summ.add_argument("config", help="experiment config JSON")
    summ.add_argument("--hdi-prob", type=float, default=0.95)
    summ.add_argument("--out", default="summary.json")
    summ.set_defaults(func=_cmd_summarize)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SamplerError as exc:
        print(f"sampler error: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


if __name__ == "__main__":
    sys.exit(main())
