"""Command-line runner: `hpl run --config FILE` for one experiment, `hpl verify-all` for the suite."""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import acceptance, approx, lower_bounds as lb, measures as ms, nets, process as pr, tselect
from .regression import minimal_model, regression_net, regression_select_many

EXIT_OK, EXIT_CONFIG, EXIT_FAIL, EXIT_CAPACITY = 0, 1, 2, 3

# kind -> parameter defaults; the default's type is the parameter's type
KINDS: dict[str, dict] = {
    "simulate": {"level": 3.0, "resolution": 0},
    "metric-checks": {},
    "test-bounds": {},
    "net-info": {"n_observed": 100.0, "k": 3, "theta": 0.0},
    "t-select": {"level": 62500.0, "theta": 10.0, "n_observed": 120000.0},
    "approx": {"truths": 3, "max_j": 6},
    "aggregate": {},
    "lower-bound": {"D": 4, "L": 6.0, "resolution": 10},
    "regression": {"scenario": "cut"},
}
DEFAULT_REPS = {"simulate": 1000, "test-bounds": 5000, "t-select": 2000, "aggregate": 2000,
                "regression": 500}
EXPERIMENT_KEYS = ("kind", "seed", "reps", "out")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    reps: int
    out: str
    params: dict = field(default_factory=dict)

    def echo(self) -> str:
        """The resolved config as INI text; parses back to the same config."""
        lines = ["[experiment]", f"kind = {self.kind}", f"seed = {self.seed}",
                 f"reps = {self.reps}", f"out = {self.out}", "", "[params]"]
        lines += [f"{k} = {acceptance.fmt(v)}" for k, v in self.params.items()]
        return "\n".join(lines) + "\n"

    def comment(self) -> str:
        return "# " + "; ".join(line for line in self.echo().splitlines() if line)


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), 1):
        if line.split("=")[0].strip() == key:
            return i
    return 0


def _coerce(default, raw: str, where: str):
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        return type(default)(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {type(default).__name__}") from None


def parse_config(text: str, seed: int | None = None, reps: int | None = None,
                 out: str | None = None) -> ExperimentConfig:
    """Parse INI text; flag overrides take precedence over file values."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e).replace("\n", " ")) from None
    extra = set(cp.sections()) - {"experiment", "params"}
    if extra:
        raise ConfigError(f"unknown section [{sorted(extra)[0]}]")
    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    exp = cp["experiment"]
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            raise ConfigError(f"line {_line_of(text, key)}: unknown key {key!r}")
    kind = exp.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"line {_line_of(text, 'kind')}: unknown kind {kind!r}; "
                          f"choose from {', '.join(KINDS)}")
    params = dict(KINDS[kind])
    if cp.has_section("params"):
        for key, raw in cp["params"].items():
            if key not in params:
                raise ConfigError(f"line {_line_of(text, key)}: unknown parameter {key!r} for {kind}")
            params[key] = _coerce(params[key], raw, f"line {_line_of(text, key)}")
    if seed is None:
        seed = int(exp["seed"]) if "seed" in exp else env_seed()
    if reps is None:
        reps = int(exp["reps"]) if "reps" in exp else DEFAULT_REPS.get(kind, 1)
    if reps < 1:
        raise ConfigError(f"line {_line_of(text, 'reps')}: reps must be positive")
    out = out if out is not None else exp.get("out", "results")
    return ExperimentConfig(kind, seed, reps, out, params)


def env_seed() -> int:
    raw = os.environ.get("HPL_SEED")
    if raw is None:
        return acceptance.DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"HPL_SEED={raw!r} is not an integer") from None


def to_csv(cfg: ExperimentConfig, header: list[str], rows: list) -> str:
    lines = [cfg.comment(), ",".join(header)]
    lines += [",".join(acceptance.fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- experiments ---------------------------------------------------------------

def _simulate(cfg, seed):
    p = cfg.params
    s = ms.GridIntensity.constant(p["level"], resolution=p["resolution"])
    n = pr.poisson_cell_counts(s, seed.rng(), cfg.reps).sum(axis=1)
    return ["rep", "N"], [(i, int(v)) for i, v in enumerate(n)]


def _metric_checks(cfg, seed):
    row = acceptance.metric_exactness(seed)
    return ["quantity", "value"], list(row.measured.items())


def _test_bounds(cfg, seed):
    rows = acceptance.robust_test_grid(seed, cfg.reps)
    header = list(rows[0])
    return header, [tuple(r[h] for h in header) for r in rows]


def _net_info(cfg, seed):
    p = cfg.params
    N, k = p["n_observed"], p["k"]
    eta = nets.default_eta(N, k)
    theta = p["theta"] or nets.theta_for_eta(eta, k)
    net = nets.build_grid_net(acceptance.identity_basis(k), theta, N)
    lat = nets.lattice_eta(k, theta)
    return (["n_observed", "k", "theta", "eta", "size", "K", "D"],
            [(N, k, theta, lat, len(net), nets.cardinality_bound(N, lat, k), net.models[0].D)])


def _t_select(cfg, seed):
    p = cfg.params
    net = acceptance.lattice_net_1d(p["theta"], p["n_observed"])
    truth = net.element(int(np.argmin(np.abs(net.roots[:, 0] - math.sqrt(p["level"])))))
    counts = pr.poisson_cell_counts(truth, seed.rng(), cfg.reps)
    sel = tselect.select_many(net, counts)
    return ["rep", "selected", "selected_value", "hellinger"], [
        (i, int(j), float(net.roots[j, 0] ** 2), ms.hellinger(truth, net.element(int(j))))
        for i, j in enumerate(sel)]


def _approx(cfg, seed):
    rows = []
    for t, f in enumerate(acceptance.step_truths(seed, cfg.params["truths"])):
        for alpha in (0.5, 1.0):
            V = approx.alpha_variation(f, alpha)
            c1, c2 = approx.prop3_constants(alpha)
            for j in range(1, cfg.params["max_j"] + 1):
                part = approx.adaptive_alpha_partition(f, alpha, approx.partition_epsilon(alpha, j, V))
                err = math.sqrt(np.mean((f - part.piecewise_mean(f)) ** 2))
                rows.append((t, alpha, j, V, part.leaf_count, c1 * 2 ** j, err,
                             c2 * V * 2 ** (-j * alpha)))
    return ["truth", "alpha", "j", "V", "leaves", "leaf_bound", "l2_error", "error_bound"], rows


def _aggregate(cfg, seed):
    truth, cands = acceptance.selection_candidates()
    net = nets.singleton_net(cands, [math.sqrt(84)] * len(cands), [1.0] * len(cands))
    sel = tselect.select_many(net, pr.poisson_cell_counts(truth, seed.rng(), cfg.reps))
    return ["rep", "candidate"], [(i, tselect.candidate_index(net, int(j))) for i, j in enumerate(sel)]


def _lower_bound(cfg, seed):
    p = cfg.params
    fam = lb.build_corollary1_family(p["D"], p["L"], p["resolution"])
    return (["D", "L", "bound", "assouad_bound", "affinity_average"],
            [(p["D"], p["L"], lb.linf_family_bound(p["D"], p["L"]), lb.assouad_lower_bound(fam),
              lb.neighbor_affinity_average(fam))])


def _regression(cfg, seed):
    p = cfg.params
    scenarios = acceptance.regression_scenarios()
    if p["scenario"] not in scenarios:
        raise ConfigError(f"unknown scenario {p['scenario']!r}; choose from {', '.join(scenarios)}")
    truth = scenarios[p["scenario"]]
    models = acceptance.regression_models()
    net = regression_net(models, truth.flat.size, truth.mass)
    sel = regression_select_many(net, pr.poisson_cell_counts(truth, seed.rng(), cfg.reps))
    rows = []
    for i, j in enumerate(sel):
        m = models[int(net.models[minimal_model(net, int(j))].model_id[1:])]
        rows.append((i, m.size, " ".join(map(str, sorted(m.breakpoints)))))
    return ["rep", "pieces", "breakpoints"], rows


RUNNERS = {"simulate": _simulate, "metric-checks": _metric_checks, "test-bounds": _test_bounds,
           "net-info": _net_info, "t-select": _t_select, "approx": _approx, "aggregate": _aggregate,
           "lower-bound": _lower_bound, "regression": _regression}


def run(cfg: ExperimentConfig) -> str:
    header, rows = RUNNERS[cfg.kind](cfg, pr.Seed(cfg.seed))
    return to_csv(cfg, header, rows)


def _write(out: str, name: str, text: str) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    target.write_text(text)
    return target


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hpl", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "verify-all"):
        p = sub.add_parser(name)
        if name == "run":
            p.add_argument("--config", required=True, help="INI file with [experiment] and [params]")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--reps", type=int)
        p.add_argument("--jobs", type=int, default=1,
                       help="accepted for compatibility; replications are vectorized in-process")
    args = ap.parse_args(argv)
    try:
        if args.command == "verify-all":
            seed = args.seed if args.seed is not None else env_seed()
            rows, text = acceptance.verify_all(seed)
            target = _write(args.out or "results", "verify_all.csv", text)
            for r in rows:
                print(f"{r.criterion:>2} {r.status} {r.name}")
            print(f"wrote {target}")
            return EXIT_OK if all(r.passed for r in rows) else EXIT_FAIL
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        cfg = parse_config(text, args.seed, args.reps, args.out)
        target = _write(cfg.out, f"{cfg.kind}.csv", run(cfg))
        _write(cfg.out, f"{cfg.kind}.ini", cfg.echo())
        print(f"wrote {target}")
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (nets.CapacityError, approx.CapacityError, tselect.NetTooLargeError) as e:
        print(f"capacity error: {e}", file=sys.stderr)
        return EXIT_CAPACITY


if __name__ == "__main__":
    sys.exit(main())
