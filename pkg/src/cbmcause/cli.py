"""Command-line entry point and the configurable end-to-end pipeline.

A pipeline run is described by one JSON document::

    {
      "format_version": 1,
      "seed": 0,
      "data": {"preset": "FIG7", "n": 2000},
      "stages": ["synth", "standardize", "discover", "roles", "fit", "explain", "compare"],
      "standardize": {"target": false},
      "discover": {"alpha": 0.05, "orientation": "standard"},
      "regressors": ["Linear", "Svr", "Mlp", "RandomForest"],
      "explain": {"method": "auto", "max_rows": 200},
      "compare": {"test_fraction": 0.3, "two_stage": true}
    }

``data`` is either a preset (``{"preset", "n"}``) or a file pair
(``{"csv", "meta"}``); relative paths resolve against the config file's
directory. The ``standardize`` stage z-scores the inputs and leaves the
output column raw unless ``standardize.target`` is true. Every output file is
a pure function of the config, so two runs with the same config write
identical bytes.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import warnings
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from ._accel import backend
from .causal2stage import RoleBinding, causal_variables, dump_roles, fit_causal, load_roles, select_roles
from .dataset import DegenerateColumnWarning, dump_meta, load_csv, split_indices, standardize, write_csv
from .evaluate import DEFAULT_SPECS, compare_protocol
from .graph import edge_notation
from .iicd import IicdConfig, iicd_discover
from .physics import preset, synth_scm
from .regress import Kind, RegressorSpec
from .shapx import dumps as shap_dumps
from .shapx import explain_dataset, trend_table, trends_csv

FORMAT_VERSION = 1
#: widest stage-two input for which ``"auto"`` still uses exact Shapley values
AUTO_EXACT_MAX_FEATURES = 12
STAGES = ("synth", "load", "standardize", "discover", "roles", "fit", "explain", "compare")
DEFAULT_STAGES = ("synth", "standardize", "discover", "roles", "fit", "explain", "compare")


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------


def _regressor_specs(raw, seed: int) -> list[RegressorSpec]:
    if raw is None:
        return [RegressorSpec(s.kind, s.hyperparams, seed) for s in DEFAULT_SPECS]
    specs = []
    for item in raw:
        try:
            if isinstance(item, str):
                specs.append(RegressorSpec(Kind(item), {}, seed))
            else:
                specs.append(RegressorSpec(Kind(item["kind"]), item.get("hyperparams", {}), int(item.get("seed", seed))))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad regressor entry {item!r}: {exc}") from None
    if not specs:
        raise ConfigError("regressors list is empty")
    return specs


def normalize_config(cfg: Mapping[str, Any], base_dir: Path | None = None) -> dict:
    """Validate a pipeline config and fill in defaults.

    Raises :class:`ConfigError` for unknown or misordered stages, a missing
    data section and data files that do not exist.
    """
    if not isinstance(cfg, Mapping):
        raise ConfigError("config must be a JSON object")
    base = base_dir or Path.cwd()
    out: dict[str, Any] = {"format_version": FORMAT_VERSION, "seed": int(cfg.get("seed", 0))}
    stages = list(cfg.get("stages", DEFAULT_STAGES))
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ConfigError(f"unknown stages {unknown}; known stages are {list(STAGES)}")
    if len(set(stages)) != len(stages):
        raise ConfigError("stages listed twice")
    if [s for s in STAGES if s in stages] != stages:
        raise ConfigError(f"stages must follow the order {list(STAGES)}")
    sources = [s for s in stages if s in ("synth", "load")]
    if len(sources) != 1:
        raise ConfigError("exactly one of 'synth' or 'load' must be listed")
    out["stages"] = stages

    data = cfg.get("data")
    if not isinstance(data, Mapping):
        raise ConfigError("missing 'data' section")
    if sources[0] == "synth":
        if "preset" not in data:
            raise ConfigError("'synth' needs data.preset")
        out["data"] = {"preset": str(data["preset"]).upper(), "n": int(data.get("n", 2000))}
        if out["data"]["n"] < 1:
            raise ConfigError("data.n must be positive")
    else:
        for key in ("csv", "meta"):
            if key not in data:
                raise ConfigError(f"'load' needs data.{key}")
        paths = {}
        for key in ("csv", "meta"):
            p = Path(data[key])
            p = p if p.is_absolute() else base / p
            if not p.is_file():
                raise ConfigError(f"data.{key} not found: {p}")
            paths[key] = str(p)
        out["data"] = {**paths, "missing": data.get("missing", "reject")}

    out["output"] = cfg.get("output")
    std = dict(cfg.get("standardize", {}))
    out["standardize"] = {"target": bool(std.get("target", False))}
    disc = dict(cfg.get("discover", {}))
    out["discover"] = {
        "alpha": float(disc.get("alpha", 0.05)),
        "orientation": disc.get("orientation", "standard"),
        "max_r": disc.get("max_r"),
        "ci_method": disc.get("ci_method", "pearson"),
        "on_conflict": disc.get("on_conflict", "skip"),
    }
    try:
        IicdConfig(alpha=out["discover"]["alpha"], max_r=out["discover"]["max_r"],
                   orientation_rule_set=out["discover"]["orientation"], ci_method=out["discover"]["ci_method"],
                   on_conflict=out["discover"]["on_conflict"])
    except ValueError as exc:
        raise ConfigError(f"bad discover section: {exc}") from None

    roles = cfg.get("roles")
    if roles is not None:
        p = Path(roles)
        p = p if p.is_absolute() else base / p
        if not p.is_file():
            raise ConfigError(f"roles file not found: {p}")
        roles = str(p)
    out["roles"] = roles
    specs = _regressor_specs(cfg.get("regressors"), out["seed"])
    out["regressors"] = [s.to_json() for s in specs]

    ex = dict(cfg.get("explain", {}))
    out["explain"] = {
        "method": ex.get("method", "auto"),
        "background": ex.get("background", "mean"),
        "n_perm": int(ex.get("n_perm", 1000)),
        "max_rows": int(ex.get("max_rows", 200)),
    }
    if out["explain"]["method"] not in ("auto", "exact", "sampled"):
        raise ConfigError("explain.method must be 'auto', 'exact' or 'sampled'")
    if out["explain"]["n_perm"] < 1 or out["explain"]["max_rows"] < 1:
        raise ConfigError("explain.n_perm and explain.max_rows must be positive")
    if out["explain"]["background"] not in ("mean", "data"):
        raise ConfigError("explain.background must be 'mean' or 'data'")
    cmp_ = dict(cfg.get("compare", {}))
    out["compare"] = {
        "test_fraction": float(cmp_.get("test_fraction", 0.3)),
        "causal_vars": cmp_.get("causal_vars"),
        "corr_vars": cmp_.get("corr_vars"),
        "two_stage": bool(cmp_.get("two_stage", True)),
    }
    if not 0.0 < out["compare"]["test_fraction"] < 1.0:
        raise ConfigError("compare.test_fraction must lie in (0, 1)")
    return out


def load_config(path) -> tuple[dict, Path]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return raw, path.resolve().parent


# ----------------------------------------------------------------------------
# pipeline
# ----------------------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="\n")


def _explain_method(method: str, p: int) -> str:
    if method == "auto":
        return "exact" if p <= AUTO_EXACT_MAX_FEATURES else "sampled"
    return method


def versions() -> dict:
    import scipy

    from ._accel import numba

    return {
        "cbmcause": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__ if numba is not None else None,
        "backend": backend(),
    }


def run_pipeline(config, out_dir=None) -> dict:
    """Run the configured stages and write their reports.

    Parameters
    ----------
    config : path-like or mapping
        Pipeline config (see the module docstring).
    out_dir : path-like, optional
        Output directory; defaults to ``config["out"]`` or ``./out``.

    Returns
    -------
    dict
        The run record that is also written to ``run.json``.
    """
    if isinstance(config, Mapping):
        raw, base = config, Path.cwd()
    else:
        raw, base = load_config(config)
    cfg = normalize_config(raw, base)
    out = Path(out_dir or raw.get("out", "out"))
    if not out.is_absolute() and out_dir is None and not isinstance(config, Mapping):
        out = base / out
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg["seed"]
    specs = [RegressorSpec.from_json(s) for s in cfg["regressors"]]
    state: dict[str, Any] = {}
    files: list[str] = []

    def synth():
        spec = preset(cfg["data"]["preset"], seed)
        ds, dag = synth_scm(spec, cfg["data"]["n"], seed)
        state["ds"] = ds
        write_csv(ds, out / "data.csv")
        dump_meta(ds.columns, out / "meta.json")
        _write(out / "dag.edges", edge_notation(dag))
        files.extend(["data.csv", "meta.json", "dag.edges"])

    def load():
        state["ds"] = load_csv(cfg["data"]["csv"], cfg["data"]["meta"], cfg["data"]["missing"])

    def standardize_():
        keep = () if cfg["standardize"]["target"] else (output(),)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateColumnWarning)
            state["ds"] = standardize(state["ds"], keep)

    def discover():
        d = cfg["discover"]
        icfg = IicdConfig(alpha=d["alpha"], max_r=d["max_r"], orientation_rule_set=d["orientation"],
                          seed=seed, ci_method=d["ci_method"], on_conflict=d["on_conflict"])
        pag, _, trace = iicd_discover(state["ds"], icfg)
        state["pag"] = pag
        _write(out / "pag.edges", edge_notation(pag))
        _write(out / "trace.jsonl", trace.to_jsonl())
        files.extend(["pag.edges", "trace.jsonl"])

    def roles():
        if cfg["roles"]:
            binding = load_roles(cfg["roles"])
        elif "pag" in state:
            binding = select_roles(state["pag"], state["ds"], output())
        else:
            raise ConfigError("'roles' needs a roles file or the 'discover' stage")
        state["binding"] = binding
        dump_roles(binding, out / "roles.json")
        files.append("roles.json")

    def train_rows():
        return split_indices(state["ds"].n, cfg["compare"]["test_fraction"], seed)[0]

    def fit():
        if "binding" not in state:
            raise ConfigError("'fit' needs the 'roles' stage")
        train = state["ds"].subset_rows(train_rows())
        state["models"] = {s.kind.value: fit_causal(train, state["binding"], s) for s in specs}

    def explain():
        if "models" not in state:
            raise ConfigError("'explain' needs the 'fit' stage")
        ex = cfg["explain"]
        rows = range(min(ex["max_rows"], state["ds"].n))
        results = {
            k: explain_dataset(m, state["ds"], _explain_method(ex["method"], len(m.feature_names)), seed,
                               ex["n_perm"], ex["background"], rows=rows)
            for k, m in state["models"].items()
        }
        _write(out / "shap.json", shap_dumps(results) + "\n")
        _write(out / "trends.csv", trends_csv(results))
        _write(out / "trends.txt", trend_table(results))
        files.extend(["shap.json", "trends.csv", "trends.txt"])

    def compare():
        c = cfg["compare"]
        binding: RoleBinding | None = state.get("binding")
        causal = c["causal_vars"]
        if causal is None:
            if "pag" not in state:
                raise ConfigError("'compare' needs compare.causal_vars or the 'discover' stage")
            causal = causal_variables(state["pag"], output(), binding.treatment if binding else None)
        table = compare_protocol(
            state["ds"], causal, c["corr_vars"], specs, c["test_fraction"], seed, output(),
            binding if c["two_stage"] else None,
        )
        _write(out / "metrics.csv", table.to_csv())
        _write(out / "metrics.txt", table.render())
        files.extend(["metrics.csv", "metrics.txt"])

    def output() -> str:
        ds = state["ds"]
        name = cfg["output"] or ds.output_name()
        if name not in ds.names:
            raise ConfigError(f"output {name!r} is not a dataset column")
        return name

    runners = {
        "synth": synth, "load": load, "standardize": standardize_, "discover": discover,
        "roles": roles, "fit": fit, "explain": explain, "compare": compare,
    }
    for name in cfg["stages"]:
        try:
            runners[name]()
        except ConfigError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc

    record = {
        "format_version": FORMAT_VERSION,
        "config": cfg,
        "versions": versions(),
        "output": output() if any(s in cfg["stages"] for s in ("roles", "compare")) else cfg["output"],
        "files": files,
    }
    _write(out / "run.json", json.dumps(record, indent=2, sort_keys=True) + "\n")
    return record


# ----------------------------------------------------------------------------
# command line
# ----------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out", help="output directory")


def _add_data(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", default="FIG7", help="synthetic preset (FIG7, FIG8A, FIG8B, CBM21)")
    p.add_argument("--n", type=int, default=2000, help="rows to synthesise")
    p.add_argument("--data", help="CSV file to load instead of a preset")
    p.add_argument("--meta", help="role metadata JSON for --data")
    p.add_argument("--output", help="output column (default: the Output-role column)")


def _add_discover(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--orientation", choices=("vstruct", "standard"), default="standard")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbmcause", description="Causal discovery and explainable production models.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="sample a preset structural causal model")
    _add_common(p)
    _add_data(p)

    p = sub.add_parser("discover", help="recover a PAG")
    _add_common(p)
    _add_data(p)
    _add_discover(p)

    parsers = {}
    for name, help_ in (("explain", "Shapley attributions and trend labels"),
                        ("compare", "correlation vs causal input comparison")):
        p = parsers[name] = sub.add_parser(name, help=help_)
        _add_common(p)
        _add_data(p)
        _add_discover(p)
        p.add_argument("--roles", help="role file overriding automatic selection")
        p.add_argument("--regressors", nargs="+", choices=[k.value for k in Kind])
    p = parsers["explain"]
    p.add_argument("--shap", choices=("auto", "exact", "sampled"), default="auto",
                   help="Shapley method; auto is exact up to %d features" % AUTO_EXACT_MAX_FEATURES)
    p.add_argument("--n-perm", type=int, default=1000, help="permutations for sampled Shapley values")
    p.add_argument("--max-rows", type=int, default=200, help="rows to explain")

    p = sub.add_parser("pipeline", help="run a JSON-configured pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides the config)")
    return ap


def _config_from_args(args) -> dict:
    if args.data:
        if not args.meta:
            raise ConfigError("--data needs --meta")
        data = {"csv": args.data, "meta": args.meta}
        source = "load"
    else:
        data = {"preset": args.preset, "n": args.n}
        source = "synth"
    stages = {
        "synth": [source],
        "discover": [source, "standardize", "discover"],
        "explain": [source, "standardize", "discover", "roles", "fit", "explain"],
        "compare": [source, "standardize", "discover", "roles", "compare"],
    }[args.command]
    roles = getattr(args, "roles", None)
    if args.command == "explain" and roles:
        stages.remove("discover")
    cfg = {"seed": args.seed, "data": data, "stages": stages, "output": args.output}
    if hasattr(args, "alpha"):
        cfg["discover"] = {"alpha": args.alpha, "orientation": args.orientation}
    if roles:
        cfg["roles"] = roles
    if getattr(args, "regressors", None):
        cfg["regressors"] = args.regressors
    if args.command == "explain":
        cfg["explain"] = {"method": args.shap, "n_perm": args.n_perm, "max_rows": args.max_rows}
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pipeline":
            record = run_pipeline(args.config, args.out)
            out = args.out
        else:
            record = run_pipeline(_config_from_args(args), args.out)
            out = args.out
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {', '.join(record['files'] + ['run.json'])} to {out or 'the configured directory'}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
