"""Accuracy-versus-epsilon experiments with per-run seeded streams.

Config files hold one ``key = value`` per line; ``#`` starts a comment and
list values are comma separated. See :data:`DEFAULTS` for every key.

Outputs written to ``out_dir``:

``runs.jsonl``   one JSON object per mechanism run
``summary.csv``  mechanism, epsilon, delta, mean_acc, sd_acc, mean_wall_ms, n_runs
``plot.csv``     series, epsilon, mean_acc, sd_acc (plus a non-private reference series)
``meta.json``    resolved config and data shape, plus the optimum and bounds
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import ENUMERATION_CAP, ContinuousSpace, Dataset, DiscreteSpace, PrivacyBudget, ordered_dot
from .data import IngestSpec, ingest_csv, synth_halfspace
from .mechanisms import (
    RunRecord,
    bound_objdisc,
    bound_rspm,
    obj_disc,
    obj_samp,
    rspm,
    separator_candidate,
    verify_separator,
)
from .noise import RngStream
from .oracles import bnb_linear, bnb_weighted, exhaustive_weighted

MECHANISMS = ("objdisc", "objsamp", "rspm")

DEFAULTS: dict[str, str] = {
    "mechanisms": "objdisc",
    "data": "synth",
    "synth_n": "200",
    "synth_d": "4",
    "synth_margin": "0.0",
    "synth_noise": "0.05",
    "synth_seed": "",
    "csv_path": "",
    "label_column": "y",
    "positive_label": "1",
    "categorical": "",
    "numeric": "",
    "features": "",
    "balance": "off",
    "tau": "1",
    "bound": "",
    "radius": "",
    "epsilons": "0.5, 1, 2, 4, 8",
    "delta": "1/n^2",
    "beta": "0.05",
    "reps": "15",
    "seed": "0",
    "oracle": "exhaustive",
    "on_inexact": "error",
    "timing": "off",
    "out_dir": "results",
}


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class ExperimentError(RuntimeError):
    """A mechanism run failed; the message names the run."""


def parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected on/off, got {text!r}")


def _list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    try:
        return parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc


@dataclass
class ExperimentConfig:
    mechanisms: list[str]
    data: str
    synth_n: int
    synth_d: int
    synth_margin: float
    synth_noise: float
    synth_seed: int
    csv_path: str
    label_column: str
    positive_label: str
    categorical: list[str]
    numeric: list[str]
    features: list[str] | None
    balance: bool
    tau: float
    bound: float | None
    radius: float | None
    epsilons: list[float]
    delta: str
    beta: float
    reps: int
    seed: int
    oracle: str
    on_inexact: str
    timing: bool
    out_dir: str
    raw: dict[str, str] = field(default_factory=dict, repr=False)

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> "ExperimentConfig":
        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        v = {**DEFAULTS, **{k: str(val) for k, val in values.items()}}
        try:
            cfg = cls(
                mechanisms=_list(v["mechanisms"]),
                data=v["data"].strip(),
                synth_n=int(v["synth_n"]),
                synth_d=int(v["synth_d"]),
                synth_margin=float(v["synth_margin"]),
                synth_noise=float(v["synth_noise"]),
                synth_seed=int(v["synth_seed"]) if v["synth_seed"].strip() else int(v["seed"]),
                csv_path=v["csv_path"].strip(),
                label_column=v["label_column"].strip(),
                positive_label=v["positive_label"].strip(),
                categorical=_list(v["categorical"]),
                numeric=_list(v["numeric"]),
                features=_list(v["features"]) or None,
                balance=parse_bool(v["balance"]),
                tau=float(v["tau"]),
                bound=float(v["bound"]) if v["bound"].strip() else None,
                radius=float(v["radius"]) if v["radius"].strip() else None,
                epsilons=[float(e) for e in _list(v["epsilons"])],
                delta=v["delta"].strip(),
                beta=float(v["beta"]),
                reps=int(v["reps"]),
                seed=int(v["seed"]),
                oracle=v["oracle"].strip(),
                on_inexact=v["on_inexact"].strip(),
                timing=parse_bool(v["timing"]),
                out_dir=v["out_dir"].strip(),
                raw=v,
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        return cls.from_mapping({**read_config_file(path), **(overrides or {})})

    def validate(self) -> None:
        bad = [m for m in self.mechanisms if m not in MECHANISMS]
        if bad or not self.mechanisms:
            raise ConfigError(f"mechanisms must be drawn from {MECHANISMS}, got {self.mechanisms}")
        if self.data not in ("synth", "csv"):
            raise ConfigError("data must be 'synth' or 'csv'")
        if self.data == "csv" and not self.csv_path:
            raise ConfigError("data = csv requires csv_path")
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilons must be a nonempty list of positive values")
        if any(b <= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilons must be strictly increasing")
        if self.oracle not in ("exhaustive", "bnb"):
            raise ConfigError("oracle must be 'exhaustive' or 'bnb'")
        if self.on_inexact not in ("error", "warn"):
            raise ConfigError("on_inexact must be 'error' or 'warn'")
        if self.delta != "1/n^2":
            try:
                value = float(self.delta)
            except ValueError:
                raise ConfigError("delta must be '1/n^2' or a number in (0, 1)") from None
            if not 0 < value < 1:
                raise ConfigError("delta must lie in (0, 1)")

    def resolve_delta(self, n: int) -> float:
        return 1.0 / (n * n) if self.delta == "1/n^2" else float(self.delta)

    def space_for(self, d: int) -> DiscreteSpace:
        bound = math.floor(math.sqrt(d)) if self.bound is None else self.bound
        radius = math.sqrt(d) if self.radius is None else self.radius
        return DiscreteSpace(d, self.tau, float(bound), float(radius))


@dataclass
class ExperimentResult:
    records: list[dict[str, Any]]
    summary: list[dict[str, Any]]
    meta: dict[str, Any]
    out_dir: Path


def load_data(cfg: ExperimentConfig) -> tuple[Dataset, dict[str, Any]]:
    if cfg.data == "synth":
        s = synth_halfspace(cfg.synth_n, cfg.synth_d, cfg.synth_margin, cfg.synth_noise, cfg.synth_seed)
        return s.dataset, {"w_star": s.w_star.tolist(), "planted_loss": s.planted_loss}
    res = ingest_csv(IngestSpec(cfg.csv_path, cfg.label_column, cfg.positive_label, cfg.categorical,
                                cfg.numeric, cfg.balance, cfg.features, cfg.seed))
    return res.dataset, {"feature_names": res.feature_names}


class _GridLinearOracle:
    """``argmin_w L(D, w) - <eta, w>`` over a fixed grid, with the losses tabulated once."""

    def __init__(self, dataset: Dataset, space: DiscreteSpace, method: str):
        self.dataset = dataset
        self.space = space
        self.method = method
        if method == "exhaustive":
            self.W = space.points()
            self.losses = dataset.total_loss(self.W).astype(float)

    def __call__(self, dataset, eta):
        if dataset is not self.dataset:
            raise ValueError("oracle was built for a different dataset")
        if self.method == "bnb":
            return bnb_linear(dataset, eta, self.space).w
        values = self.losses - ordered_dot(self.W, eta)[:, 0]
        return self.W[int(np.argmin(values))]


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    dataset, data_meta = load_data(cfg)
    n, d = dataset.n, dataset.dim
    delta = cfg.resolve_delta(n)
    space = cfg.space_for(d)
    G = 1.0 / cfg.tau

    if space.box_size <= ENUMERATION_CAP:
        optimum = exhaustive_weighted(dataset, np.ones(n), space)
    else:
        optimum = bnb_weighted(dataset, np.ones(n), space)
    opt_acc = 1.0 - optimum.value / n

    sep = None
    if "rspm" in cfg.mechanisms:
        sep = separator_candidate(d, cfg.tau, space.bound)
        if space.box_size <= ENUMERATION_CAP and verify_separator(sep, space) is not None:
            raise ExperimentError("separator candidate does not separate the parameter space")
    box = ContinuousSpace.cube(d, space.bound) if space.bound > 0 else None
    lin_oracle = _GridLinearOracle(dataset, space, cfg.oracle) if "objsamp" in cfg.mechanisms else None

    records: list[dict[str, Any]] = []
    for mech in cfg.mechanisms:
        for ei, eps in enumerate(cfg.epsilons):
            budget = PrivacyBudget(eps, delta)
            for rep in range(cfg.reps):
                index = ei * cfg.reps + rep
                stream = RngStream(cfg.seed, index)
                try:
                    if mech == "objdisc":
                        rec = obj_disc(dataset, space, budget, stream, G=G, oracle=cfg.oracle,
                                       on_inexact=cfg.on_inexact)
                    elif mech == "rspm":
                        rec = rspm(dataset, sep, space, budget, stream, oracle=cfg.oracle,
                                   on_inexact=cfg.on_inexact)
                    else:
                        if box is None:
                            raise ValueError("objsamp needs a box with positive width (bound > 0)")
                        rec = obj_samp(dataset, box, lin_oracle, budget, stream, G=G, beta=cfg.beta,
                                       loss_fn=lambda ds, w: float(ds.total_loss(w)[0]))
                except Exception as exc:
                    raise ExperimentError(
                        f"run {index} ({mech}, epsilon={eps}, rep={rep}) failed: {exc}"
                    ) from exc
                records.append(_record_row(rec, mech, eps, delta, rep, index, n, cfg.timing))

    summary = _summarize(records, cfg)
    bounds = {
        repr(eps): {
            "objdisc": bound_objdisc(G, space.radius, d, cfg.tau, eps, delta, 0.05, n),
            "rspm_up_to_constants": bound_rspm(len(sep), eps, delta, 0.05, n) if sep is not None else None,
        }
        for eps in cfg.epsilons
    }
    meta = {
        # out_dir is left out so identical runs in different directories match byte for byte
        "config": {k: cfg.raw[k] for k in sorted(cfg.raw) if k != "out_dir"},
        "n": n,
        "d": d,
        "delta": delta,
        "space": {"tau": space.tau, "bound": space.bound, "radius": space.radius},
        "nonprivate_accuracy": opt_acc,
        "nonprivate_w": optimum.w.tolist(),
        "separator_size": len(sep) if sep is not None else None,
        "utility_bounds_beta_0.05": bounds,
        **data_meta,
    }
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    _write_outputs(out, records, summary, meta, cfg, opt_acc)
    return ExperimentResult(records, summary, meta, out)


def _record_row(rec: RunRecord, mech, eps, delta, rep, index, n, timing) -> dict[str, Any]:
    return {
        "run_index": index,
        "mechanism": mech,
        "epsilon": eps,
        "delta": delta,
        "rep": rep,
        "seed": rec.seed,
        "stream_index": rec.stream_index,
        "w": rec.w,
        "loss": rec.loss,
        "accuracy": 1.0 - rec.loss / n,
        "exact": rec.exact,
        "wall_ms": rec.wall_ms if timing else None,
        "warnings": rec.warnings,
        "params": rec.params,
    }


def _summarize(records, cfg: ExperimentConfig) -> list[dict[str, Any]]:
    rows = []
    for mech in cfg.mechanisms:
        for eps in cfg.epsilons:
            group = [r for r in records if r["mechanism"] == mech and r["epsilon"] == eps]
            acc = np.array([r["accuracy"] for r in group])
            walls = [r["wall_ms"] for r in group if r["wall_ms"] is not None]
            rows.append({
                "mechanism": mech,
                "epsilon": eps,
                "delta": group[0]["delta"],
                "mean_acc": float(acc.mean()),
                "sd_acc": float(acc.std(ddof=1)) if len(acc) > 1 else 0.0,
                "mean_wall_ms": float(np.mean(walls)) if walls else None,
                "n_runs": len(group),
            })
    return rows


SUMMARY_COLUMNS = ["mechanism", "epsilon", "delta", "mean_acc", "sd_acc", "mean_wall_ms", "n_runs"]


def _write_outputs(out: Path, records, summary, meta, cfg, opt_acc) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with (out / "runs.jsonl").open("w") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summary:
            w.writerow([s["mechanism"], _fmt(s["epsilon"]), _fmt(s["delta"]), _fmt(s["mean_acc"]),
                        _fmt(s["sd_acc"]), _fmt(s["mean_wall_ms"]), s["n_runs"]])
    with (out / "plot.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "epsilon", "mean_acc", "sd_acc"])
        for s in summary:
            w.writerow([s["mechanism"], _fmt(s["epsilon"]), _fmt(s["mean_acc"]), _fmt(s["sd_acc"])])
        for eps in cfg.epsilons:
            w.writerow(["nonprivate", _fmt(eps), _fmt(opt_acc), _fmt(0.0)])
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
