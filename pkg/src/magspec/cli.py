"""Command-line front end: ``magspec {check,scan,butterfly,gaps}``.

Configuration is one JSON file merged over built-in defaults; command-line
flags win over the file.  ``--set a.b=value`` overrides any key (value
parsed as JSON when possible).  Exit codes: 0 pass, 1 check failure,
2 usage error, 3 internal error.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import Symbol, involution, random_symbol, symbol_defect, twisted_product
from .lattice import Box, phase_defect
from .magnetic import (AntisymmetryError, GaugeFunction, MagneticPotential, check_cocycle,
                       check_table_antisymmetry, cochain_direct, cochain_transversal,
                       cocycle_from_potential, gauge_transform_potential, verify_cochain)
from .parameter_field import (CocycleField, ParameterGrid, SymbolFamily, check_triangle_bound,
                              gap_persistence_report, inner_continuity_probe, load_scan,
                              outer_continuity_probe, save_scan, spectrum_scan,
                              write_persistence_csv)
from .representation import assemble, homomorphism_defect
from .spectral import eigenvalues, gaps, write_gaps_csv

OUTPUT_ROOT_ENV = "MAGSPEC_OUTPUT_ROOT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

DEFAULTS = {
    "model": {"builder": "harper", "t": 1.0},
    "potential": {"kind": "symmetric_gauge", "B": 2 * np.pi},
    "field": {"kind": "scaled"},
    "box": {"d": 2, "L": 20, "boundary": "dirichlet"},
    "grid": {"n": 129},
    "cochain_policy": "direct",
    "output": None,
    "seed": 0,
    "workers": None,
    "check": {"samples": 1000, "radius": 6, "window": 3, "L": 6, "epsilon": 1.0,
              "triangle_bound": False, "tol": 1e-12, "matrix_tol": 1e-10},
    "butterfly": {"n": 65, "L": 15},
    "gaps": {"resolution": 0.2, "probes": []},
}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


# configuration ----------------------------------------------------------------

def deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_path(cfg, path, value):
    keys = path.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def load_config(path=None, overrides=()):
    """Defaults < file < overrides (list of (dotted.path, value))."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config: file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be an object")
        cfg = deep_merge(cfg, data)
    for key, value in overrides:
        _set_path(cfg, key, value)
    validate_config(cfg)
    return cfg


def _require(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def validate_config(cfg):
    box = cfg["box"]
    _require(isinstance(box, dict), "box", "must be an object")
    _require(isinstance(box.get("d"), int) and box["d"] >= 1, "box.d", "must be a positive integer")
    _require(box.get("boundary", "dirichlet") in ("dirichlet", "periodic"), "box.boundary",
             "must be 'dirichlet' or 'periodic'")
    if "sides" not in box:
        _require(isinstance(box.get("L"), int) and box["L"] >= 0, "box.L",
                 "must be a non-negative integer")
    pot = cfg["potential"]
    _require(isinstance(pot, dict) and "kind" in pot, "potential.kind", "is required")
    _require(pot["kind"] in ("zero", "symmetric_gauge", "landau_gauge", "random", "table"),
             "potential.kind", f"unknown kind {pot['kind']!r}")
    _require(int(pot.get("d", box["d"])) == box["d"], "potential.d", "does not match box.d")
    model = cfg["model"]
    _require(isinstance(model, dict), "model", "must be an object")
    builder = model.get("builder")
    _require(builder in ("harper", "dimerized_chain", "diagonal_potential") or "terms" in model,
             "model.builder", f"unknown builder {builder!r}")
    if builder == "dimerized_chain":
        _require(box["d"] == 1, "box.d", "dimerized_chain needs d = 1")
    _require(cfg["field"].get("kind") in ("scaled", "constant", "table"), "field.kind",
             "must be 'scaled', 'constant' or 'table'")
    _require(cfg["cochain_policy"] in ("direct", "transversal"), "cochain_policy",
             "must be 'direct' or 'transversal'")
    _require(isinstance(cfg["seed"], int), "seed", "must be an integer")
    w = cfg["workers"]
    _require(w is None or (isinstance(w, int) and w >= 1), "workers", "must be a positive integer")
    g = cfg["grid"]
    _require("points" in g or (isinstance(g.get("n"), int) and g["n"] >= 2), "grid.n",
             "must be an integer >= 2")
    res = cfg["gaps"]["resolution"]
    _require(isinstance(res, (int, float)) and res > 0, "gaps.resolution", "must be positive")


def build_potential(cfg, strict=True):
    spec = dict(cfg["potential"])
    spec.setdefault("d", cfg["box"]["d"])
    try:
        return MagneticPotential.from_dict(spec, strict=strict)
    except AntisymmetryError as exc:
        raise ConfigError(f"potential.table: {exc}") from exc
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"potential: {exc}") from exc


def build_family(cfg):
    model = dict(cfg["model"])
    d = cfg["box"]["d"]
    if model.get("builder") == "dimerized_chain":
        return SymbolFamily.dimerized_chain(model.get("amplitude", 1.0), model.get("t", 1.0))
    model.setdefault("d", d)
    try:
        sym = Symbol.from_dict(model)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    _require(sym.d == d, "model.d", "does not match box.d")
    return SymbolFamily.constant(sym)


def build_field(cfg, pot):
    try:
        return CocycleField.from_dict(cfg["field"], potential=pot)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"field: {exc}") from exc


def build_box(spec):
    try:
        return Box.from_dict(spec)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"box: {exc}") from exc


def build_grid(spec):
    try:
        return ParameterGrid.from_dict(spec)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"grid: {exc}") from exc


def output_dir(cfg, command):
    if cfg.get("output"):
        return Path(cfg["output"])
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "magspec_out")) / command


def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def manifest(cfg, command, **extra):
    return {"command": command, "code_version": __version__, "seed": cfg["seed"],
            "config": cfg, **extra}


# check ----------------------------------------------------------------------------

def _entry(defect, tol, **extra):
    defect = float(defect)
    return {"max_defect": defect, "tol": tol, "passed": bool(defect <= tol), **extra}


def run_checks(cfg):
    """Identity suites on the configured potential and model; returns the report dict."""
    chk = cfg["check"]
    seed = cfg["seed"]
    rng = np.random.default_rng(seed)
    d = cfg["box"]["d"]
    tol = float(chk["tol"])
    mtol = float(chk["matrix_tol"])
    report = {}

    pspec = cfg["potential"]
    if pspec["kind"] == "table":
        anti = check_table_antisymmetry(pspec.get("table", []))
        report["antisymmetry"] = _entry(anti.max_defect, 0.0, worst_pair=anti.worst_pair)
        pot = build_potential(cfg, strict=False)
    else:
        pot = build_potential(cfg)
        pts = rng.integers(-chk["radius"], chk["radius"] + 1, size=(2, chk["samples"], d))
        report["antisymmetry"] = _entry(np.max(np.abs(pot.phase(pts[0], pts[1]) + pot.phase(pts[1], pts[0]))), 0.0)

    eps = float(chk["epsilon"])
    fld = build_field(cfg, pot)
    coc = fld.at(eps)
    cr = check_cocycle(coc, n=chk["samples"], radius=chk["radius"], rng=seed, tol=tol)
    report["cocycle"] = _entry(cr.max_defect, tol, identity=cr.cocycle_defect,
                               normalization=cr.normalization_defect, inverse=cr.inverse_defect)

    window = int(chk["window"])
    lam_d = cochain_direct(fld.potential_at(eps)) if fld.potential_at else None
    lam_t = cochain_transversal(coc)
    for name, lam in (("cochain_direct", lam_d), ("cochain_transversal", lam_t)):
        if lam is not None:
            r = verify_cochain(lam, coc, window, tol=tol)
            report[name] = _entry(r.max_defect, tol, worst=r.worst)

    g = GaugeFunction.random(d, 1.0, seed)
    coc_g = cocycle_from_potential(gauge_transform_potential(pot, g))
    coc_0 = cocycle_from_potential(pot)
    q, x, y = rng.integers(-chk["radius"], chk["radius"] + 1, size=(3, chk["samples"], d))
    report["gauge"] = _entry(np.max(phase_defect(coc_g.phase(q, x, y), coc_0.phase(q, x, y))), tol)

    family = build_family(cfg)
    h = family.at(eps)
    f1 = random_symbol(d, rng, 3, 1)
    f2 = random_symbol(d, rng, 3, 1)
    lhs = twisted_product(twisted_product(h, f1, coc), f2, coc)
    rhs = twisted_product(h, twisted_product(f1, f2, coc), coc)
    report["product_associativity"] = _entry(symbol_defect(lhs, rhs, window), tol)
    inv = symbol_defect(involution(twisted_product(h, f1, coc)),
                        twisted_product(involution(f1), involution(h), coc), window)
    report["involution"] = _entry(inv, tol)
    report["selfadjoint_model"] = _entry(symbol_defect(involution(h), h, window), tol)

    box = Box(d, int(chk["L"]))
    lam = lam_d or lam_t
    a_h = assemble(f1, lam, box).matrix
    a_hs = assemble(involution(f1), lam, box).matrix
    report["adjoint"] = _entry(abs(a_hs - a_h.conj().T).max(), mtol)
    report["homomorphism"] = _entry(homomorphism_defect(h, f1, lam, coc, box), mtol)
    if lam_d is not None:
        s_d = eigenvalues(assemble(h, lam_d, box))
        s_t = eigenvalues(assemble(h, lam_t, box))
        report["gauge_spectra"] = _entry(np.max(np.abs(s_d.values - s_t.values)), mtol)

    if chk.get("triangle_bound"):
        tb = check_triangle_bound(pot, n=chk["samples"], radius=chk["radius"], rng=seed)
        report["triangle_bound"] = {"max_ratio": tb.max_ratio, "worst": tb.worst,
                                    "degenerate_max": tb.degenerate_max, "passed": tb.passed}
    return {"identities": report, "passed": all(v["passed"] for v in report.values())}


def cmd_check(cfg):
    out = output_dir(cfg, "check")
    out.mkdir(parents=True, exist_ok=True)
    report = run_checks(cfg)
    _dump(out / "check_report.json", report)
    _dump(out / "manifest.json", manifest(cfg, "check", files=["check_report.json"]))
    for name, entry in report["identities"].items():
        value = entry.get("max_defect", entry.get("max_ratio"))
        print(f"{'PASS' if entry['passed'] else 'FAIL'} {name} {value:.3e}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


# scan / butterfly / gaps ---------------------------------------------------------------

def _scan(cfg, box_spec, grid_spec):
    pot = build_potential(cfg)
    return spectrum_scan(build_family(cfg), build_field(cfg, pot), build_box(box_spec),
                         build_grid(grid_spec), cfg["cochain_policy"], cfg["workers"])


def cmd_scan(cfg):
    out = output_dir(cfg, "scan")
    scan = _scan(cfg, cfg["box"], cfg["grid"])
    save_scan(scan, out, manifest(cfg, "scan"))
    print(f"wrote {len(scan.grid)} spectra to {out}")
    return EXIT_OK


def cmd_butterfly(cfg):
    out = output_dir(cfg, "butterfly")
    out.mkdir(parents=True, exist_ok=True)
    bf = cfg["butterfly"]
    box_spec = dict(cfg["box"], L=int(bf["L"]))
    scan = _scan(cfg, box_spec, {"n": int(bf["n"])})
    with open(out / "butterfly.csv", "w", encoding="utf-8") as fh:
        fh.write("epsilon,eigenvalue\n")
        for eps, spec in scan.items():
            for v in spec.values:
                fh.write(f"{eps!r},{float(v)!r}\n")
    _dump(out / "manifest.json", manifest(cfg, "butterfly", box=box_spec, files=["butterfly.csv"]))
    print(f"wrote {out / 'butterfly.csv'}")
    return EXIT_OK


def cmd_gaps(cfg, scan_dir=None):
    out = output_dir(cfg, "gaps")
    if scan_dir:
        try:
            scan = load_scan(scan_dir)
        except FileNotFoundError as exc:
            raise ConfigError(f"scan_dir: no scan at {scan_dir}") from exc
    else:
        scan = _scan(cfg, cfg["box"], cfg["grid"])
    out.mkdir(parents=True, exist_ok=True)
    res = float(cfg["gaps"]["resolution"])
    rows = gap_persistence_report(scan, res)
    write_persistence_csv(out / "gap_persistence.csv", rows)
    write_gaps_csv(out / "gaps.csv", [(e, gaps(s, res)) for e, s in scan.items()])
    probes = []
    for i, p in enumerate(cfg["gaps"].get("probes", [])):
        try:
            kind, eps0, (a, b) = p["kind"], float(p["eps0"]), p["interval"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"gaps.probes[{i}]: needs kind, eps0 and interval [a, b]") from exc
        probe = {"outer": outer_continuity_probe, "inner": inner_continuity_probe}.get(kind)
        if probe is None:
            raise ConfigError(f"gaps.probes[{i}].kind: must be 'outer' or 'inner'")
        try:
            v = probe(scan, eps0, (a, b))
        except ValueError as exc:
            raise ConfigError(f"gaps.probes[{i}].eps0: {exc}") from exc
        probes.append({"kind": kind, "eps0": eps0, "interval": [a, b], "vacuous": v.vacuous,
                       "left_steps": v.left_steps, "right_steps": v.right_steps,
                       "neighborhood": v.neighborhood, "min_margin": v.min_margin,
                       "spacing": v.spacing, "statement": v.statement})
    _dump(out / "probes.json", probes)
    _dump(out / "manifest.json", manifest(cfg, "gaps", scan_dir=str(scan_dir) if scan_dir else None,
                                          files=["gap_persistence.csv", "gaps.csv", "probes.json"]))
    print(f"wrote {len(rows)} gap rows to {out}")
    return EXIT_OK


# entry point ------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser():
    p = _Parser(prog="magspec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("check", "run identity suites"), ("scan", "spectrum scan over epsilon"),
                        ("butterfly", "flux/energy pairs for scatter plots"),
                        ("gaps", "gap persistence and continuity probes")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--output", help="output directory")
        s.add_argument("--seed", type=int)
        s.add_argument("--workers", type=int)
        s.add_argument("--L", type=int, help="box radius")
        s.add_argument("--boundary", choices=["dirichlet", "periodic"])
        s.add_argument("--grid-n", type=int, help="number of uniform grid points")
        s.add_argument("--cochain-policy", choices=["direct", "transversal"])
        s.add_argument("--B", type=float, help="field strength of a gauge potential")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (dotted path, JSON value)")
        if name == "check":
            s.add_argument("--triangle-bound", action="store_true", default=None)
        if name == "gaps":
            s.add_argument("scan_dir", nargs="?", help="directory written by 'magspec scan'")
            s.add_argument("--resolution", type=float)
    return p


def _overrides(args):
    out = []
    flag_paths = {"output": "output", "seed": "seed", "workers": "workers", "L": "box.L",
                  "boundary": "box.boundary", "grid_n": "grid.n", "cochain_policy": "cochain_policy",
                  "B": "potential.B", "triangle_bound": "check.triangle_bound",
                  "resolution": "gaps.resolution"}
    for attr, path in flag_paths.items():
        v = getattr(args, attr, None)
        if v is not None:
            out.append((path, v))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set {item}: expected KEY=VALUE")
        k, v = item.split("=", 1)
        out.append((k.strip(), _parse_value(v)))
    return out


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "check":
            return cmd_check(cfg)
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "butterfly":
            return cmd_butterfly(cfg)
        return cmd_gaps(cfg, args.scan_dir)
    except ConfigError as exc:
        print(f"magspec: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
