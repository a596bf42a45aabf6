"""Command-line front end: config parsing, experiment orchestration, artifacts.

Usage:  eblab --config experiment.toml [--seed N] [--out DIR] [--threads N]

The config is a TOML file (key = value with nested tables); alternatively a
JSON document of the same shape is read from stdin when --config is "-" or
omitted.  Environment overrides use the EBLAB_ prefix (EBLAB_CONFIG,
EBLAB_SEED, EBLAB_OUT, EBLAB_THREADS); explicit flags win over environment,
which wins over the config file.  A seed must be provided somewhere: there
is no wall-clock default, and identical configs produce byte-identical
artifacts.

Commands (the `command` key):

  simulate-regret      [model], [prior], [estimator], [run] {n, replicates,
                       functional = "total"|"individual"|"compound", mode}
  verify-orthogonality [orthogonality] {s = [...], k_max, poisson = [[a,b],..],
                       poisson_k_max, tolerance}
  lowerbound-audit     [audit] {family = "gaussian"|"poisson"|
                       "gaussian-hellinger", s | alpha+beta, m, n, pairs}
  robbins-certificate  [prior], [certificate] {n or n_grid}
  scaling              [model], [prior], [estimator], [scaling] {n_grid,
                       replicates, rate}

Artifacts: <out>/<command>.csv and <out>/<command>.json; the JSON embeds the
fully resolved config and seed.  CSV schemas are versioned in a leading
comment line ("# eblab-csv v1 ...").

Exit codes: 0 success; 2 config-parse error; 3 unknown estimator or
unresolvable spec; 4 numeric failure; 5 audit/verification failure.  Any
failure prints a machine-readable JSON error line naming the offending key.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import estimators, lowerbound, regret
from .models import MixtureModel, Prior, prior_from_dict, sample_prior

__all__ = ["ExperimentConfig", "main", "run"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNKNOWN_ESTIMATOR = 3
EXIT_NUMERIC = 4
EXIT_AUDIT = 5

CSV_SCHEMA_VERSION = "v1"

_COMMANDS = ("simulate-regret", "verify-orthogonality", "lowerbound-audit",
             "robbins-certificate", "scaling")


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


class UnknownEstimatorError(ConfigError):
    pass


@dataclass
class ExperimentConfig:
    """Resolved experiment description: command, seed, output, and raw tables."""

    command: str
    seed: int
    out: Path
    threads: int
    raw: dict

    def resolved(self) -> dict:
        flat = dict(self.raw)
        flat["command"] = self.command
        flat["seed"] = self.seed
        flat["out"] = str(self.out)
        flat["threads"] = self.threads
        return flat


def _table(raw: dict, name: str) -> dict:
    tab = raw.get(name)
    if not isinstance(tab, dict):
        raise ConfigError(name, f"missing or malformed table [{name}]")
    return tab


def _need(tab: dict, table: str, key: str, kind=None):
    if key not in tab:
        raise ConfigError(f"{table}.{key}", f"missing required key {table}.{key}")
    val = tab[key]
    if kind is not None and not isinstance(val, kind):
        raise ConfigError(f"{table}.{key}",
                          f"{table}.{key} has wrong type {type(val).__name__}")
    return val


def _model_from(raw: dict) -> MixtureModel:
    channel = _need(_table(raw, "model"), "model", "channel", str)
    for m in MixtureModel:
        if m.value == channel:
            return m
    raise ConfigError("model.channel", f"unknown channel {channel!r}")


def _prior_from(raw: dict) -> Prior:
    tab = _table(raw, "prior")
    try:
        return prior_from_dict(tab)
    except KeyError as exc:
        raise ConfigError("prior.variant", str(exc)) from exc
    except (ValueError, TypeError) as exc:
        raise ConfigError("prior", f"bad prior spec: {exc}") from exc


def _estimator_from(raw: dict, model: MixtureModel, prior: Prior | None):
    tab = _table(raw, "estimator")
    kind = _need(tab, "estimator", "kind", str)
    params = {k: v for k, v in tab.items() if k != "kind"}
    try:
        return estimators.make_estimator(kind, model, prior, **params)
    except KeyError as exc:
        raise UnknownEstimatorError("estimator.kind", str(exc)) from exc
    except TypeError as exc:
        raise ConfigError("estimator", f"bad estimator parameters: {exc}") from exc


def load_config(path: str | None, *, stdin=None) -> ExperimentConfig:
    """Parse TOML from `path`, or JSON from stdin when path is None or '-'."""
    if path is None or path == "-":
        text = (stdin or sys.stdin).read()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<stdin>", f"stdin is not valid JSON: {exc}") from exc
    else:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError("<config>", f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<syntax>", f"TOML parse error: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config root must be a table/object")
    command = raw.get("command")
    if command not in _COMMANDS:
        raise ConfigError("command",
                          f"command must be one of {_COMMANDS}, got {command!r}")
    seed = raw.get("seed")
    out = raw.get("out", "eblab-out")
    threads = raw.get("threads", 1)
    return ExperimentConfig(command, seed, Path(out), threads, raw)


def _apply_overrides(cfg: ExperimentConfig, args, env) -> ExperimentConfig:
    seed = cfg.seed
    if env.get("EBLAB_SEED") is not None:
        seed = int(env["EBLAB_SEED"])
    if args.seed is not None:
        seed = args.seed
    if seed is None:
        raise ConfigError("seed", "a seed is mandatory (config key, EBLAB_SEED, "
                                  "or --seed); there is no wall-clock default")
    out = cfg.out
    if env.get("EBLAB_OUT"):
        out = Path(env["EBLAB_OUT"])
    if args.out is not None:
        out = Path(args.out)
    threads = cfg.threads
    if env.get("EBLAB_THREADS") is not None:
        threads = int(env["EBLAB_THREADS"])
    if args.threads is not None:
        threads = args.threads
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed", "seed must be a nonnegative integer")
    if not isinstance(threads, int) or threads < 0:
        raise ConfigError("threads", "threads must be a nonnegative integer "
                                     "(0 means auto)")
    return ExperimentConfig(cfg.command, seed, out, threads, cfg.raw)


# Artifact helpers ---------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, command: str, header: list[str], rows: list[list]):
    lines = [f"# eblab-csv {CSV_SCHEMA_VERSION} command={command} "
             f"columns={','.join(header)}"]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


# Command handlers ---------------------------------------------------------------


def _cmd_simulate_regret(cfg: ExperimentConfig) -> tuple[int, dict]:
    raw = cfg.raw
    model = _model_from(raw)
    prior = _prior_from(raw)
    est = _estimator_from(raw, model, prior)
    run_tab = _table(raw, "run")
    n = int(_need(run_tab, "run", "n", int))
    replicates = int(run_tab.get("replicates", 200))
    functional = run_tab.get("functional", "total")
    mode = run_tab.get("mode", "oracle-gap")
    if functional == "total":
        rep = regret.total_regret_mc(model, prior, est, n, replicates, cfg.seed,
                                     mode=mode, threads=cfg.threads)
    elif functional == "individual":
        rep = regret.individual_regret_mc(model, prior, est, n, replicates,
                                          cfg.seed, mode=mode, threads=cfg.threads)
    elif functional == "compound":
        rep = regret.compound_regret_mc(
            model, lambda rng, k: sample_prior(prior, rng, k), est, n,
            replicates, cfg.seed, threads=cfg.threads)
    else:
        raise ConfigError("run.functional",
                          f"functional must be total|individual|compound, "
                          f"got {functional!r}")
    header = ["n", "functional", "estimate", "std_error", "replicates", "seed"]
    row = rep.to_row()
    _write_csv(cfg.out / "simulate-regret.csv", cfg.command, header,
               [[row[h] for h in header]])
    payload = {"config": cfg.resolved(), "report": row, "mode": rep.mode,
               "note": rep.note}
    _write_json(cfg.out / "simulate-regret.json", payload)
    return EXIT_OK, payload


def _cmd_verify_orthogonality(cfg: ExperimentConfig) -> tuple[int, dict]:
    tab = cfg.raw.get("orthogonality", {})
    s_values = tab.get("s", [0.25, 1.0])
    k_max = int(tab.get("k_max", 12))
    pairs = tab.get("poisson", [[1.0, 1.0], [8.0, 4.0]])
    k_max_poisson = int(tab.get("poisson_k_max", 8))
    tolerance = float(tab.get("tolerance", 1e-7))
    results = {}
    worst = 0.0
    for s in s_values:
        dev = lowerbound.gaussian_eigen_deviation(float(s), k_max)
        results[f"gaussian_s={s}"] = dev
        worst = max(worst, max(dev.values()))
    for a, b in pairs:
        dev = lowerbound.poisson_eigen_deviation(float(a), float(b), k_max_poisson)
        results[f"poisson_alpha={a}_beta={b}"] = dev
        worst = max(worst, max(dev.values()))
    ok = worst <= tolerance
    rows = [[name, key, val, tolerance, val <= tolerance]
            for name, devs in sorted(results.items())
            for key, val in sorted(devs.items())]
    _write_csv(cfg.out / "verify-orthogonality.csv", cfg.command,
               ["system", "deviation", "measured", "tolerance", "pass"], rows)
    payload = {"config": cfg.resolved(), "deviations": results,
               "max_deviation": worst, "tolerance": tolerance, "pass": ok}
    _write_json(cfg.out / "verify-orthogonality.json", payload)
    return (EXIT_OK if ok else EXIT_AUDIT), payload


def _cmd_lowerbound_audit(cfg: ExperimentConfig) -> tuple[int, dict]:
    tab = _table(cfg.raw, "audit")
    family_kind = _need(tab, "audit", "family", str)
    m = int(_need(tab, "audit", "m", int))
    n = int(_need(tab, "audit", "n", int))
    pairs = int(tab.get("pairs", 64))
    if family_kind == "gaussian":
        fam = lowerbound.gaussian_family(float(_need(tab, "audit", "s")), m)
    elif family_kind == "poisson":
        fam = lowerbound.poisson_family(float(_need(tab, "audit", "alpha")),
                                        float(_need(tab, "audit", "beta")), m)
    elif family_kind == "gaussian-hellinger":
        fam = lowerbound.hellinger_gaussian_family(float(_need(tab, "audit", "s")), m)
    else:
        raise ConfigError("audit.family", f"unknown family {family_kind!r}")
    af = lowerbound.assouad_build(fam, n)
    if family_kind == "gaussian-hellinger":
        report = lowerbound.hellinger_audit(af, pairs=pairs, seed=cfg.seed)
    else:
        report = lowerbound.audit(af, pairs=pairs, seed=cfg.seed,
                                  truncation_h=tab.get("truncation_h"))
    rows = [[name, e.measured, e.required, e.passed]
            for name, e in sorted(report.entries.items())]
    _write_csv(cfg.out / "lowerbound-audit.csv", cfg.command,
               ["hypothesis", "measured", "required", "pass"], rows)
    payload = {"config": cfg.resolved(), "audit": report.to_dict(),
               "pass": report.passed}
    _write_json(cfg.out / "lowerbound-audit.json", payload)
    return (EXIT_OK if report.passed else EXIT_AUDIT), payload


def _cmd_robbins_certificate(cfg: ExperimentConfig) -> tuple[int, dict]:
    prior = _prior_from(cfg.raw)
    tab = _table(cfg.raw, "certificate")
    if "n_grid" in tab:
        grid = [int(v) for v in tab["n_grid"]]
    else:
        grid = [int(_need(tab, "certificate", "n", int))]
    rows = []
    certs = []
    for n in grid:
        c = regret.robbins_certificate(prior, n)
        certs.append({"n": n, "i0": c.i0, "sum_i1": c.sum_i1, "sum_i2": c.sum_i2,
                      "y0": c.y0, "y_stop": c.y_stop,
                      "bookkeeping_constant": c.bookkeeping_constant,
                      "total": c.total})
        rows.append([n, c.i0, c.sum_i1, c.sum_i2, c.y0, c.y_stop, c.total])
    _write_csv(cfg.out / "robbins-certificate.csv", cfg.command,
               ["n", "i0", "sum_i1", "sum_i2", "y0", "y_stop", "total"], rows)
    payload = {"config": cfg.resolved(), "certificates": certs}
    _write_json(cfg.out / "robbins-certificate.json", payload)
    return EXIT_OK, payload


def _cmd_scaling(cfg: ExperimentConfig) -> tuple[int, dict]:
    raw = cfg.raw
    model = _model_from(raw)
    prior = _prior_from(raw)
    est = _estimator_from(raw, model, prior)
    tab = _table(raw, "scaling")
    n_grid = [int(v) for v in _need(tab, "scaling", "n_grid", list)]
    replicates = int(tab.get("replicates", 200))
    rate = tab.get("rate", "poisson-compact")
    try:
        rows = regret.scaling_experiment(model, prior, est, n_grid, replicates,
                                         cfg.seed, rate=rate, threads=cfg.threads)
    except KeyError as exc:
        raise ConfigError("scaling.rate", str(exc)) from exc
    header = ["n", "functional", "estimate", "std_error", "replicates", "seed",
              "rate", "ratio"]
    csv_rows = [[r.n, "TotalEB", r.estimate, r.std_error, replicates, cfg.seed,
                 r.rate, r.ratio] for r in rows]
    _write_csv(cfg.out / "scaling.csv", cfg.command, header, csv_rows)
    payload = {"config": cfg.resolved(),
               "rows": [{"n": r.n, "estimate": r.estimate,
                         "std_error": r.std_error, "rate": r.rate,
                         "ratio": r.ratio} for r in rows]}
    _write_json(cfg.out / "scaling.json", payload)
    return EXIT_OK, payload


_HANDLERS = {
    "simulate-regret": _cmd_simulate_regret,
    "verify-orthogonality": _cmd_verify_orthogonality,
    "lowerbound-audit": _cmd_lowerbound_audit,
    "robbins-certificate": _cmd_robbins_certificate,
    "scaling": _cmd_scaling,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute a resolved config; writes artifacts and returns the exit code."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    code, _ = _HANDLERS[cfg.command](cfg)
    return code


def _error_json(kind: str, key: str, message: str) -> str:
    return json.dumps({"error": kind, "key": key, "message": message},
                      sort_keys=True)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="eblab",
        description="Empirical-Bayes regret experiments: Monte Carlo engines, "
                    "Robbins certificates, and lower-bound audits.")
    parser.add_argument("--config", default=os.environ.get("EBLAB_CONFIG"),
                        help="TOML config path; '-' or omitted reads JSON "
                             "from stdin")
    parser.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    parser.add_argument("--out", default=None, help="artifact directory")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (0 = auto)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args, os.environ)
    except UnknownEstimatorError as exc:
        print(_error_json("unknown-estimator", exc.key, str(exc)))
        return EXIT_UNKNOWN_ESTIMATOR
    except ConfigError as exc:
        print(_error_json("config-parse", exc.key, str(exc)))
        return EXIT_CONFIG
    try:
        return run(cfg)
    except UnknownEstimatorError as exc:
        print(_error_json("unknown-estimator", exc.key, str(exc)))
        return EXIT_UNKNOWN_ESTIMATOR
    except ConfigError as exc:
        print(_error_json("config-parse", exc.key, str(exc)))
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(_error_json("numeric-failure", "<runtime>", str(exc)))
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
