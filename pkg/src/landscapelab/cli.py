"""Config-driven command line: build an instance, compute fields, run experiments.

Usage::

    landscapelab verify --config yukawa-smoke --out out/ --format json

``--config`` takes a path or the name of a bundled config.  Exit codes: 0 when
every experiment passes (negative controls excepted), 1 on numerical failure
or a failed check, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .agmon import agmon_distance_field, sublevel_set
from .counting import counting_sweep
from .grid import Grid, ScalarField, write_field_csv
from .landscape import landscape_bounded, landscape_exhaustion, landscape_magnetic_surrogate
from .maximal import maximal_function
from .operators import (AntisymmetricField, EdgePhaseField, SelectionOfPairs, assemble_magnetic,
                        discrete_field_from_phases, enumerate_admissible_selections,
                        rotate_vector_potential)
from .potentials import (PotentialError, PotentialSpec, VectorPotentialSpec, check_kato_and_doubling,
                         generate_example1_field, generate_potential, potential_callable,
                         vector_potential)
from .solvers import lowest_eigenpairs
from .verify import (ExperimentReport, TestFunctionSet, check_compare_u_vs_m, check_decay_eigenfunction,
                     check_decay_green, check_decay_lax_milgram, check_fefferman_phong,
                     check_harnack_and_longdistance, check_resolvent_decay, check_uncertainty_magnetic,
                     check_uncertainty_nonmagnetic, window_mask)

log = logging.getLogger("landscapelab")

SUBCOMMANDS = ("landscape", "maximal", "agmon", "spectrum", "counting", "verify", "all")
EXPERIMENTS = ("uncertainty", "fefferman-phong", "compare-u-m", "harnack", "decay-green",
               "decay-lax-milgram", "decay-eigenfunction", "decay-resolvent", "regularity")

POTENTIAL_KEYS = {
    "constant": {"value"},
    "power": {"alpha", "scale", "center"},
    "polynomial": {"expr", "alpha"},
    "exponential": {"amplitude", "length", "offset", "center"},
    "well": {"depth", "width", "background", "center"},
    "double-well": {"separation", "stiffness"},
    "random": {"low", "high"},
    "table": {"path"},
}
MAGNETIC_KEYS = {
    "constant-field": {"b", "gauge"},
    "example-1": {"alpha"},
    "table": {"paths"},
}
SECTION_KEYS = {
    "grid": {"dim", "half_width", "lower", "upper", "h"},
    "potential": {"kind", "seed"},
    "magnetic": {"kind", "selection", "rotation"},
    "run": {"experiments", "mode", "stages", "seed", "functions", "c1", "mu", "eps", "t", "alpha",
            "eigs", "agmon_source", "agmon_mu", "window", "boundary_margin", "tolerance", "refine",
            "negative_control", "shen", "counting_cap"},
    "output": {"dir", "format", "export_matrix"},
}


class ConfigError(ValueError):
    pass


def _value(text):
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if "," in text:
        try:
            return [float(t) for t in text.split(",") if t.strip()]
        except ValueError:
            pass
    return text


def _floats(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    dim: int
    lower: np.ndarray
    upper: np.ndarray
    h: float
    potential: PotentialSpec
    magnetic: VectorPotentialSpec | None = None
    selection: str = "auto"
    rotation: np.ndarray | None = None
    run: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str = ""

    @property
    def experiments(self):
        return self.run["experiments"]


def bundled_configs():
    return sorted(p.name[:-4] for p in resources.files("landscapelab.configs").iterdir()
                  if p.name.endswith(".ini"))


def _read_text(ref):
    path = Path(ref)
    if path.exists():
        return path.read_text(), str(path)
    name = ref[:-4] if ref.endswith(".ini") else ref
    res = resources.files("landscapelab.configs") / f"{name}.ini"
    if res.is_file():
        return res.read_text(), f"bundled:{name}"
    raise ConfigError(f"config {ref!r} not found (bundled: {', '.join(bundled_configs())})")


def load_config(ref, seed=None):
    """Parse and validate a config; unknown sections or keys raise :class:`ConfigError`."""
    text, source = _read_text(ref)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for sec in parser.sections():
        if sec not in SECTION_KEYS:
            raise ConfigError(f"unknown section [{sec}]")
    for sec in ("grid", "potential"):
        if not parser.has_section(sec):
            raise ConfigError(f"missing section [{sec}]")

    g = dict(parser["grid"])
    pot = dict(parser["potential"])
    mag = dict(parser["magnetic"]) if parser.has_section("magnetic") else None
    run = dict(parser["run"]) if parser.has_section("run") else {}
    out = dict(parser["output"]) if parser.has_section("output") else {}

    for sec, keys in (("grid", g), ("run", run), ("output", out)):
        extra = set(keys) - SECTION_KEYS[sec]
        if extra:
            raise ConfigError(f"unknown keys in [{sec}]: {', '.join(sorted(extra))}")

    try:
        dim = int(g["dim"])
        h = float(g["h"])
        if "half_width" in g:
            lower = -np.full(dim, float(g["half_width"]))
            upper = -lower
        else:
            lower = np.broadcast_to(np.asarray(_floats(g["lower"])), (dim,)).astype(float)
            upper = np.broadcast_to(np.asarray(_floats(g["upper"])), (dim,)).astype(float)
    except KeyError as exc:
        raise ConfigError(f"[grid] needs {exc.args[0]}") from exc
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from exc
    if not (dim >= 1 and h > 0 and np.all(upper > lower)):
        raise ConfigError("[grid] needs dim >= 1, h > 0 and upper > lower")

    run_seed = int(seed if seed is not None else float(run.get("seed", 0)))
    kind = pot.pop("kind", None)
    if kind not in POTENTIAL_KEYS:
        raise ConfigError(f"[potential] kind must be one of {', '.join(POTENTIAL_KEYS)}")
    pot_seed = int(float(pot.pop("seed", run_seed)))
    extra = set(pot) - POTENTIAL_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown keys in [potential] for kind {kind}: {', '.join(sorted(extra))}")
    params = {k: _value(v) if k not in ("expr", "path") else v for k, v in pot.items()}
    try:
        pspec = PotentialSpec(kind, params, seed=pot_seed, nonnegative=mag is None)
    except PotentialError as exc:
        raise ConfigError(str(exc)) from exc

    mspec, selection, rotation = None, "auto", None
    if mag is not None:
        mkind = mag.pop("kind", None)
        if mkind not in MAGNETIC_KEYS:
            raise ConfigError(f"[magnetic] kind must be one of {', '.join(MAGNETIC_KEYS)}")
        selection = mag.pop("selection", "auto")
        rot = mag.pop("rotation", None)
        extra = set(mag) - MAGNETIC_KEYS[mkind]
        if extra:
            raise ConfigError(f"unknown keys in [magnetic] for kind {mkind}: {', '.join(sorted(extra))}")
        mparams = {k: (v.split(",") if k == "paths" else _value(v)) for k, v in mag.items()}
        mspec = VectorPotentialSpec(mkind, mparams)
        if rot is not None:
            rotation = np.asarray(_floats(rot), dtype=float)
            if rotation.size != dim * dim:
                raise ConfigError("rotation needs dim*dim entries")
            rotation = rotation.reshape(dim, dim)
            if not np.allclose(rotation @ rotation.T, np.eye(dim), atol=1e-10):
                raise ConfigError("rotation must be orthogonal")

    exps = [e.strip() for e in run.get("experiments", ",".join(EXPERIMENTS)).split(",") if e.strip()]
    bad = [e for e in exps if e not in EXPERIMENTS]
    if bad:
        raise ConfigError(f"unknown experiments: {', '.join(bad)}")
    half = float(np.min(upper - lower)) / 2
    try:
        runcfg = {
            "experiments": exps,
            "mode": run.get("mode", "bounded"),
            "stages": int(float(run.get("stages", 3))),
            "seed": run_seed,
            "functions": int(float(run.get("functions", 50))),
            "c1": float(run.get("c1", 1.0)),
            "mu": _floats(run.get("mu", "2,4,8,16")),
            "eps": _floats(run.get("eps", "0.5,0.24,0.1,0.05")),
            "t": _floats(run.get("t", "0.25,0.5,1,2")),
            "alpha": float(run.get("alpha", 0.1)),
            "eigs": int(float(run.get("eigs", 6))),
            "agmon_source": run.get("agmon_source", "center"),
            "agmon_mu": float(run["agmon_mu"]) if "agmon_mu" in run else None,
            "window": float(run.get("window", half / 2)),
            "boundary_margin": float(run["boundary_margin"]) if "boundary_margin" in run else None,
            "tolerance": float(run.get("tolerance", 1e-12)),
            "refine": _bool(run.get("refine", "false")),
            "negative_control": _bool(run.get("negative_control", "false")),
            "shen": run.get("shen", "auto"),
            "counting_cap": int(float(run.get("counting_cap", 400))),
        }
    except ValueError as exc:
        raise ConfigError(f"[run]: {exc}") from exc
    if runcfg["mode"] not in ("bounded", "exhaustion"):
        raise ConfigError("[run] mode must be bounded or exhaustion")
    if runcfg["agmon_source"] not in ("center", "sublevel"):
        raise ConfigError("[run] agmon_source must be center or sublevel")
    if runcfg["shen"] not in ("auto", "true", "false"):
        raise ConfigError("[run] shen must be auto, true or false")
    outcfg = {"dir": out.get("dir", "out"), "format": out.get("format", "json"),
              "export_matrix": _bool(out.get("export_matrix", "false"))}
    if outcfg["format"] not in ("csv", "json"):
        raise ConfigError("[output] format must be csv or json")
    return ExperimentConfig(dim, lower, upper, h, pspec, mspec, selection, rotation, runcfg, outcfg, source)


# -- instance construction ---------------------------------------------------------

@dataclass
class Instance:
    config: ExperimentConfig
    grid: Grid
    V: ScalarField
    u: ScalarField
    operator: object  # operator of the problem (magnetic when a field is present)
    landscape_operator: object  # real operator whose landscape is u
    landscape: object
    phases: EdgePhaseField | None = None
    B: AntisymmetricField | None = None
    selection: SelectionOfPairs | None = None

    @property
    def magnetic(self):
        return self.phases is not None

    @property
    def effective_potential(self):
        """``V``, or ``sum_S b + V`` for magnetic instances."""
        if not self.magnetic:
            return self.V
        return ScalarField(self.grid, np.maximum(self.B.selection_sum(self.selection).values + self.V.values, 0.0),
                           "Sigma_S B + V")


def _selection(policy, B, V):
    if policy == "upper":
        return SelectionOfPairs.upper(B.grid.dim)
    if policy == "cyclic":
        return SelectionOfPairs.cyclic(B.grid.dim)
    search = enumerate_admissible_selections(B, V)
    if policy == "auto":
        if search.maximal is not None and search.maximal in search.admissible:
            return search.maximal
        if not search.admissible:
            raise ConfigError("no admissible selection for this field and potential")
        return search.admissible[0]
    try:  # explicit pairs "1-2;2-3;3-1" (one-based)
        pairs = [tuple(int(t) - 1 for t in p.split("-")) for p in policy.split(";")]
        return SelectionOfPairs(tuple(pairs))
    except ValueError as exc:
        raise ConfigError(f"bad selection {policy!r}") from exc


def magnetic_field(cfg, grid):
    """Peierls phases and the field ``B`` of the configured vector potential on ``grid``."""
    spec = cfg.magnetic
    if spec.kind == "table":
        comps = [generate_potential(PotentialSpec("table", {"path": p}, nonnegative=False), grid)
                 for p in spec.params["paths"]]
        phases = EdgePhaseField.from_node_components(grid, comps)
        return phases, discrete_field_from_phases(phases)
    a = vector_potential(spec, cfg.dim)
    if cfg.rotation is not None:
        a = rotate_vector_potential(a, cfg.rotation)
    phases = EdgePhaseField.from_vector_potential(grid, a)
    if spec.kind == "example-1" and cfg.rotation is None:
        return phases, generate_example1_field(float(spec.params.get("alpha", 0.9)), grid)[1]
    return phases, discrete_field_from_phases(phases)


def build_instance(cfg, h=None):
    h = cfg.h if h is None else h
    tol = cfg.run["tolerance"]
    landscape = None
    if cfg.magnetic is None and cfg.run["mode"] == "exhaustion":
        R0 = float(np.min(cfg.upper - cfg.lower)) / 2
        center = (cfg.upper + cfg.lower) / 2
        landscape = landscape_exhaustion(lambda g: generate_potential(cfg.potential, g), h, cfg.dim,
                                         R0=R0, center=center, max_stages=cfg.run["stages"], tol=tol)
        grid = landscape.operator.grid
    else:
        grid = Grid.box(cfg.lower, cfg.upper, h)
    V = generate_potential(cfg.potential, grid)
    if cfg.magnetic is None:
        if landscape is None:
            landscape = landscape_bounded(grid, None, V, tol=tol)
        M = landscape.operator
        return Instance(cfg, grid, V, landscape.u, M, M, landscape)

    phases, B = magnetic_field(cfg, grid)
    S = _selection(cfg.selection, B, V)
    landscape = landscape_magnetic_surrogate(grid, B, V, S, tol=tol)
    M = assemble_magnetic(grid, phases, V)
    return Instance(cfg, grid, V, landscape.u, M, landscape.operator, landscape, phases, B, S)


# -- pipeline steps --------------------------------------------------------------------

def _center_node(grid):
    return tuple(s // 2 for s in grid.shape)


def _inverse_weight(u):
    grid = u.grid
    w = np.zeros(grid.shape)
    inner = grid.interior_mask
    w[inner] = 1.0 / u.values[inner]
    w[~inner] = w[inner].max()
    return ScalarField(grid, w, "1/u")


def step_landscape(inst, out, fmt):
    write_field_csv(inst.u, out / "u.csv", {"selection": str(inst.selection)} if inst.magnetic else None)
    res = inst.landscape
    summary = {"field": inst.u.name, "min": float(inst.u.values.min()), "max": float(inst.u.values.max()),
               "converged": bool(res.converged), "diverged": bool(res.diverged), "message": res.message,
               "radius_schedule": list(map(float, res.radius_schedule)),
               "increments": list(map(float, res.increments))}
    _write_table(out / "landscape", [summary], fmt)
    return summary


def step_maximal(inst, out, fmt):
    mf = maximal_function(inst.effective_potential, inst.config.run["c1"])
    write_field_csv(mf.m, out / "m.csv", {"C1": mf.C1})
    summary = {"C1": mf.C1, "clamped": int(mf.clamped.sum()), "computed": int(mf.computed.sum())}
    _write_table(out / "maximal", [summary], fmt)
    return summary


def step_agmon(inst, out, fmt):
    run = inst.config.run
    if run["agmon_source"] == "sublevel":
        mu = run["agmon_mu"] if run["agmon_mu"] is not None else 2.0 / float(inst.u.values.max())
        level = sublevel_set(inst.u, mu)
        if level.empty:
            raise RuntimeError(f"sublevel set {{1/u <= {mu}}} is empty")
        geo = agmon_distance_field(level.w, level.mask)
    else:
        geo = agmon_distance_field(_inverse_weight(inst.u), [inst.grid.ravel_index(_center_node(inst.grid))])
    write_field_csv(geo.rho, out / "rho.csv", {"source": run["agmon_source"]})
    summary = {"source": run["agmon_source"], "max": float(np.max(geo.rho.values)),
               "lipschitz_slack": float(geo.lipschitz_slack)}
    _write_table(out / "agmon", [summary], fmt)
    return summary


def step_spectrum(inst, out, fmt):
    k = min(inst.config.run["eigs"], inst.operator.n)
    spec = lowest_eigenpairs(inst.operator, k)
    rows = [{"index": i, "eigenvalue": float(ev), "residual": float(r)}
            for i, (ev, r) in enumerate(zip(spec.eigenvalues, spec.residuals))]
    _write_table(out / "spectrum", rows, fmt)
    if not spec.converged:
        raise RuntimeError("eigensolver did not converge")
    return rows


def step_counting(inst, out, fmt):
    """Counting sweep.

    Smooth analytic potentials are passed as callables (cube means by Gauss
    quadrature); node-only potentials and magnetic fields are resampled with
    ``h <= side / 2`` at the largest threshold.
    """
    run = inst.config.run
    cfg = inst.config
    grid = inst.grid
    fn = None if inst.magnetic else potential_callable(cfg.potential, cfg.dim)
    if fn is not None:
        rep = counting_sweep(inst.operator, run["mu"], fn, lower=grid.lower, upper=grid.upper,
                             cap=run["counting_cap"])
    else:
        side = 1.0 / np.sqrt(max(run["mu"]))
        h_fine = grid.h
        while h_fine > side / 2 + 1e-12:
            h_fine /= 2
        fine = grid if h_fine == grid.h else Grid.box(grid.lower, grid.upper, h_fine)
        V = inst.V if fine is grid else generate_potential(cfg.potential, fine)
        B_abs = None
        if inst.magnetic:
            B = inst.B if fine is grid else magnetic_field(cfg, fine)[1]
            B_abs = ScalarField(fine, B.norm().values)
        rep = counting_sweep(inst.operator, run["mu"], V, B_abs=B_abs, cap=run["counting_cap"])
    if fmt == "csv":
        rep.write_csv(out / "counting.csv")
    else:
        rep.write_json(out / "counting.json")
    return rep.summary()


def _test_functions(inst, count=None):
    run = inst.config.run
    return TestFunctionSet(inst.grid, count=count or run["functions"], seed=run["seed"], complex_=inst.magnetic)


def run_experiment(inst, name, refined=None):
    cfg = inst.config
    run = cfg.run
    grid = inst.grid
    try:
        if name == "uncertainty":
            if inst.magnetic:
                rep = check_uncertainty_magnetic(inst.landscape, inst.phases, inst.V, _test_functions(inst))
            else:
                rep = check_uncertainty_nonmagnetic(inst.u, None, inst.V, _test_functions(inst),
                                                    M=inst.operator)
        elif name == "fefferman-phong":
            m = maximal_function(inst.effective_potential, run["c1"])
            rep = check_fefferman_phong(m, inst.V, _test_functions(inst),
                                        phases=inst.phases if inst.magnetic else None)
        elif name == "compare-u-m":
            m = maximal_function(inst.effective_potential, run["c1"])
            rep = check_compare_u_vs_m(inst.u, m, window_mask(grid, run["window"]))
        elif name == "harnack":
            ref = None
            if refined is not None:
                ref = (refined.u, window_mask(refined.grid, run["window"]))
            rep = check_harnack_and_longdistance(inst.u, window_mask(grid, run["window"]), seed=run["seed"],
                                                 refined=ref)
        elif name == "decay-green":
            shen = run["shen"] == "true"
            if run["shen"] == "auto" and not inst.magnetic and grid.dim >= 3:
                shen = check_kato_and_doubling(inst.V, samples=200, seed=run["seed"]).is_shen
            rep = check_decay_green(inst.operator, inst.u, _center_node(grid), shen=shen,
                                    boundary_margin=run["boundary_margin"])
        elif name == "decay-lax-milgram":
            f = _test_functions(inst, 1).functions[0]
            rep = check_decay_lax_milgram(inst.operator, inst.u, f, eps_ladder=tuple(run["eps"]))
        elif name == "decay-eigenfunction":
            spec = lowest_eigenpairs(inst.operator, 1)
            psi = np.abs(spec.eigenvectors[:, 0])
            rep = check_decay_eigenfunction(inst.landscape_operator, inst.u, float(spec.eigenvalues[0]),
                                            inst.operator.extend(psi), boundary_margin=run["boundary_margin"])
        elif name == "decay-resolvent":
            if inst.magnetic:
                rep = ExperimentReport("decay-resolvent", flags=["skipped: real operators only"])
            else:
                f = _test_functions(inst, 1).functions[0]
                rep = check_resolvent_decay(inst.operator, inst.V, f, t_ladder=tuple(run["t"]),
                                            alpha=run["alpha"])
        elif name == "regularity":
            rep = ExperimentReport("regularity")
            t0 = time.perf_counter()
            reg = check_kato_and_doubling(inst.effective_potential, seed=run["seed"])
            rep.constants.update({k: v for k, v in reg.as_dict().items() if not isinstance(v, (list, dict))})
            if not reg.is_shen:
                rep.flags.append("not a Shen potential at this resolution")
            rep.runtime = time.perf_counter() - t0
        else:  # pragma: no cover - validated at load time
            raise ConfigError(name)
    except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
        rep = ExperimentReport(name, flags=[f"error: {exc}"])
        rep.add("numerical failure", 1.0, 0.0, tol=0.0)
    rep.instance.update({"config": cfg.source, "potential": cfg.potential.kind,
                         "magnetic": cfg.magnetic.kind if cfg.magnetic else None,
                         "selection": str(inst.selection) if inst.magnetic else None,
                         "negative_control": run["negative_control"]})
    return rep


def step_verify(inst, out, fmt, threads=1):
    run = inst.config.run
    refined = build_instance(inst.config, h=inst.grid.h / 2) if run["refine"] else None
    names = run["experiments"]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(lambda n: run_experiment(inst, n, refined), names))
    else:
        reports = [run_experiment(inst, n, refined) for n in names]
    if fmt == "json":
        with open(out / "reports.json", "w") as fh:
            json.dump([r.as_dict() for r in reports], fh, indent=2)
    else:
        rows = [{"experiment": r.id, **c.as_dict()} for r in reports for c in r.checks]
        _write_table(out / "reports", rows, "csv")
        for r in reports:
            if r.diagnostics:
                r.write_diagnostics_csv(out / f"{r.id}.csv")
    return reports


def _write_table(stem, rows, fmt):
    path = Path(f"{stem}.{fmt}")
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(rows if len(rows) != 1 else rows[0], fh, indent=2)
        return
    keys = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        fh.write(f"# {path.stem} version=1\n")
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in row.items()})


def build_parser():
    p = argparse.ArgumentParser(prog="landscapelab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="config path or bundled name")
    p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--export-matrix", action="store_true", help="write the operator in Matrix Market format")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be positive")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    fmt = args.format or cfg.output["format"]
    out = Path(args.out or cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        inst = build_instance(cfg)
    except (ConfigError, PotentialError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError) as exc:
        print(f"numerical failure while building the instance: {exc}", file=sys.stderr)
        return 1
    if args.export_matrix or cfg.output["export_matrix"]:
        inst.operator.write_matrix_market(out / "operator.mtx", comment=f"landscapelab {cfg.source}")

    steps = {"landscape": step_landscape, "maximal": step_maximal, "agmon": step_agmon,
             "spectrum": step_spectrum, "counting": step_counting}
    todo = list(steps) if args.command == "all" else [args.command] if args.command != "verify" else []
    code = 0
    for name in todo:
        if name == "maximal" and inst.grid.dim < 3:
            log.warning("maximal function skipped: needs n >= 3")
            continue
        try:
            steps[name](inst, out, fmt)
        except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
            print(f"{name} failed: {exc}", file=sys.stderr)
            code = 1
    if args.command in ("verify", "all"):
        reports = step_verify(inst, out, fmt, threads=args.threads)
        for r in reports:
            status = "pass" if r.passed else "FAIL"
            print(f"{r.id:22s} {status}  {r.runtime:7.2f}s  {'; '.join(r.flags)}")
        if not cfg.run["negative_control"] and not all(r.passed for r in reports):
            code = 1
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
