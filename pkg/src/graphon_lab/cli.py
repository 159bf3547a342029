"""Verb-style command line entry point.

Every verb accepts ``--config FILE`` (a JSON object of parameter values,
keys spelled as the long flags with dashes or underscores) and ``--seed``.
Explicit flags win over the config file, which wins over built-in
defaults.  Outputs go to ``--out`` or stdout and always carry a
provenance header: ``# key: value`` lines for CSV, a ``provenance`` key
for JSON, and a leading ``{"provenance": ...}`` line for JSON lines.

Exit codes: 0 success, 1 domain error, 2 resource or convergence error,
64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import replace

from . import __version__
from .errors import ConvergenceError, DomainError, GraphonLabError, ResourceError

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_RESOURCE = 2
EXIT_USAGE = 64

VERBS = ("boundary", "solve", "scan", "transitions", "region", "dos", "sample", "compare", "verify")

# Built-in defaults per verb; argparse itself defaults everything to None so
# that config-file values can be told apart from explicit flags.
DEFAULTS = {
    "boundary": {"step": 1e-3},
    "solve": {"e": None, "t": None, "m": 16, "starts": 8, "mu0": 10.0, "mu_max": 1e8,
              "tol_c": 1e-8, "tol_g": 1e-7, "max_outer": 60},
    "scan": {"e_min": None, "e_max": None, "e_steps": None, "t_min": None, "t_max": None,
             "t_steps": None, "m": 16, "starts": 8},
    "transitions": {"scan": None, "path": None, "fix_e": None, "fix_t": None,
                    "kappa": 20.0, "m": 16, "starts": 8},
    "region": {"step": 1e-3},
    "dos": {"n": None, "method": "auto", "walkers": 4, "ln_f_final": 1e-6,
            "flatness": 0.8, "check_every": 100_000, "max_steps": 2_000_000_000},
    "sample": {"n": None, "e": None, "t": None, "delta": None, "burn_in": 100_000,
               "thin": 10_000, "samples": 100},
    "compare": {"a": None, "b": None},
    "verify": {"suite": "all", "strict": False},
}
COMMON = {"seed": 0, "out": None, "format": None, "threads": None}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_common(p):
    p.add_argument("--config", help="JSON file with parameter values")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format where both exist")
    p.add_argument("--threads", type=int,
                   help="worker count (default: $GRAPHON_LAB_THREADS, else all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="python -m graphon_lab", description="Constrained graph entropy toolkit.")
    parser.add_argument("--version", action="version", version=f"graphon_lab {__version__}")
    sub = parser.add_subparsers(dest="verb", parser_class=_Parser, metavar="VERB")

    p = sub.add_parser("boundary", help="boundary and transition curves as CSV")
    p.add_argument("--step", type=float)

    p = sub.add_parser("solve", help="minimize the rate at fixed (e, t)")
    p.add_argument("--e", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--starts", type=int)
    p.add_argument("--mu0", type=float)
    p.add_argument("--mu-max", type=float)
    p.add_argument("--tol-c", type=float)
    p.add_argument("--tol-g", type=float)
    p.add_argument("--max-outer", type=int)

    p = sub.add_parser("scan", help="entropy and branch over an (e, t) grid")
    for name, typ in (("e-min", float), ("e-max", float), ("e-steps", int),
                      ("t-min", float), ("t-max", float), ("t-steps", int),
                      ("m", int), ("starts", int)):
        p.add_argument(f"--{name}", type=typ)

    p = sub.add_parser("transitions", help="flag transitions along a path")
    p.add_argument("--scan", help="scan CSV to read cells from")
    p.add_argument("--path", help="CSV with e,t columns; cells are solved if no --scan")
    p.add_argument("--fix-e", type=float, help="use the scan cells with this e, ordered by t")
    p.add_argument("--fix-t", type=float, help="use the scan cells with this t, ordered by e")
    p.add_argument("--kappa", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--starts", type=int)

    p = sub.add_parser("region", help="feasible region and transition curves, one row per e")
    p.add_argument("--step", type=float)

    p = sub.add_parser("dos", help="density of states of (edges, triangles)")
    p.add_argument("--n", type=int)
    p.add_argument("--method", choices=("auto", "exact", "wl"))
    p.add_argument("--walkers", type=int)
    p.add_argument("--ln-f-final", type=float)
    p.add_argument("--flatness", type=float)
    p.add_argument("--check-every", type=int)
    p.add_argument("--max-steps", type=int)

    p = sub.add_parser("sample", help="uniform graphs in a density window, as JSON lines")
    p.add_argument("--n", type=int)
    p.add_argument("--e", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("compare", help="distances between two graphon JSON files")
    p.add_argument("--a")
    p.add_argument("--b")

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--suite", help="'all' or a comma list of criterion numbers")
    p.add_argument("--strict", action="store_const", const=True,
                   help="exit 1 if any criterion fails")

    for name, sp in sub.choices.items():
        _add_common(sp)
    return parser


# -- configuration ----------------------------------------------------------------


def resolve(verb: str, ns: argparse.Namespace) -> dict:
    """Merge defaults, the config file and explicit flags (in that order)."""
    params = {**DEFAULTS[verb], **COMMON}
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key, val in cfg.items():
            k = key.replace("-", "_")
            if k not in params:
                raise UsageError(f"unknown config key for {verb}: {key}")
            params[k] = val
    for k, v in vars(ns).items():
        if k in params and v is not None:
            params[k] = v
    missing = [k for k, v in params.items() if v is None and k in _REQUIRED.get(verb, ())]
    if missing:
        raise UsageError(f"{verb}: missing " + ", ".join("--" + k.replace("_", "-") for k in missing))
    if params["threads"] is None:
        env = os.environ.get("GRAPHON_LAB_THREADS")
        try:
            params["threads"] = int(env) if env else (os.cpu_count() or 1)
        except ValueError:
            raise UsageError("GRAPHON_LAB_THREADS must be an integer") from None
    if params["threads"] < 1:
        raise UsageError("--threads must be positive")
    return params


_REQUIRED = {
    "solve": ("e", "t"),
    "scan": ("e_min", "e_max", "e_steps", "t_min", "t_max", "t_steps"),
    "dos": ("n",),
    "sample": ("n", "e", "t", "delta"),
    "compare": ("a", "b"),
}

# Parameters that never change results, left out of the config hash.
_NOT_HASHED = ("out", "threads", "format")


def provenance(verb: str, params: dict) -> dict:
    hashed = {k: v for k, v in params.items() if k not in _NOT_HASHED}
    blob = json.dumps({"verb": verb, **hashed}, sort_keys=True, default=str)
    return {
        "version": __version__,
        "verb": verb,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "seed": params["seed"],
        "params": hashed,
    }


def csv_header(prov: dict) -> str:
    return "".join(f"# {k}: {json.dumps(prov[k], sort_keys=True)}\n" for k in sorted(prov))


def _emit(text: str, out, stdout):
    if out is None:
        stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n"


def _json_default(x):
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, float) and math.isnan(x):
        return None
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _csv_rows(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if isinstance(x, float) and math.isnan(x) else
                    (repr(x) if isinstance(x, float) else x) for x in r])
    return buf.getvalue()


def _solve_config(p):
    from .solver import SolveConfig

    keys = ("m", "starts", "mu0", "mu_max", "tol_c", "tol_g", "max_outer")
    return SolveConfig(seed=p["seed"], **{k: p[k] for k in keys if k in p})


# -- verbs ------------------------------------------------------------------------


def _do_boundary(p, prov, stdout):
    from .boundary import boundary_curves

    if not 0 < p["step"] <= 1:
        raise DomainError("step must lie in (0, 1]")
    text = csv_header(prov) + _csv_rows(["e", "t", "curve_tag"], boundary_curves(p["step"]))
    _emit(text, p["out"], stdout)


def _do_region(p, prov, stdout):
    from .phase import emit_region

    _emit(csv_header(prov) + emit_region(p["step"]), p["out"], stdout)


def _do_solve(p, prov, stdout):
    from .solver import minimize_rate

    cfg = replace(_solve_config(p), threads=p["threads"])
    res = minimize_rate(p["e"], p["t"], cfg)
    _emit(_json_text({"provenance": prov, "e": p["e"], "t": p["t"],
                      "entropy": -res.value, "result": res.to_dict()}), p["out"], stdout)


def _do_scan(p, prov, stdout):
    from .phase import GridSpec, scan

    grid = GridSpec(p["e_min"], p["e_max"], p["e_steps"], p["t_min"], p["t_max"], p["t_steps"])
    table = scan(grid, _solve_config(p), p["threads"])
    table.provenance = {**table.provenance, **prov}
    _write_table(table, prov, p["out"], stdout)


def _write_table(table, prov, out, stdout):
    text = csv_header(prov) + table.to_csv()
    _emit(text, out, stdout)
    if out is not None:
        with open(os.path.splitext(out)[0] + ".json", "w") as fh:
            fh.write(_json_text(table.sidecar()))


def _read_path(path):
    with open(path) as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return [(float(r["e"]), float(r["t"])) for r in rows]


def _do_transitions(p, prov, stdout):
    from .phase import ScanTable, detect_transition, scan_points

    if p["scan"]:
        table = ScanTable.read(p["scan"])
        if p["path"]:
            cells = _read_path(p["path"])
        elif p["fix_e"] is not None:
            cells = sorted(((q.e, q.t) for q in table.points if math.isclose(q.e, p["fix_e"])),
                           key=lambda c: c[1])
        elif p["fix_t"] is not None:
            cells = sorted(((q.e, q.t) for q in table.points if math.isclose(q.t, p["fix_t"])),
                           key=lambda c: c[0])
        else:
            raise UsageError("transitions: with --scan give --path, --fix-e or --fix-t")
        flags = detect_transition(cells, table, kappa=p["kappa"])
    elif p["path"]:
        table = scan_points(_read_path(p["path"]), _solve_config(p), p["threads"])
        flags = detect_transition(table.points, kappa=p["kappa"])
    else:
        raise UsageError("transitions: need --scan or --path")
    rows = [(f.kind, f.index, f.e, f.t, f.detail) for f in flags]
    text = csv_header(prov) + _csv_rows(["kind", "index", "e", "t", "detail"], rows)
    _emit(text, p["out"], stdout)


def _do_dos(p, prov, stdout):
    from .finite import EXACT_MAX_N, WLConfig, exact_enumerate, wang_landau, write_dos_csv

    method = p["method"]
    if method == "auto":
        method = "exact" if p["n"] <= EXACT_MAX_N else "wl"
    if method == "exact":
        dos = exact_enumerate(p["n"])
    else:
        cfg = WLConfig(seed=p["seed"], walkers=p["walkers"], ln_f_final=p["ln_f_final"],
                       flatness=p["flatness"], check_every=p["check_every"],
                       max_steps=p["max_steps"], threads=p["threads"])
        dos = wang_landau(p["n"], cfg)
    _emit(write_dos_csv(dos, extra_meta={"provenance": prov}), p["out"], stdout)


def _do_sample(p, prov, stdout):
    from .finite import sample_constrained

    graphs = sample_constrained(p["n"], p["e"], p["t"], p["delta"], seed=p["seed"],
                                burn_in=p["burn_in"], thin=p["thin"], n_samples=p["samples"])
    lines = [json.dumps({"provenance": prov}, sort_keys=True)]
    lines += [json.dumps(G.to_dict(), sort_keys=True) for G in graphs]
    _emit("\n".join(lines) + "\n", p["out"], stdout)


def _load_graphon(path):
    from .graphon import StepGraphon

    with open(path) as fh:
        d = json.load(fh)
    if "result" in d:
        d = d["result"]
    if "graphon" in d:
        d = d["graphon"]
    return StepGraphon.from_dict(d)


def _do_compare(p, prov, stdout):
    from .canonical import compare_reduced
    from .distances import cut_distance_labeled, hom_metric
    from .graphon import l1_distance

    f, g = _load_graphon(p["a"]), _load_graphon(p["b"])
    cut = cut_distance_labeled(f, g, seed=p["seed"])
    out = {
        "provenance": prov,
        "l1": l1_distance(f, g),
        "cut_labeled": cut.value,
        "cut_labeled_exact": cut.exact,
        "hom_metric": hom_metric(f, g),
        "reduced": compare_reduced(f, g),
    }
    if p["format"] == "csv":
        keys = [k for k in out if k != "provenance"]
        text = csv_header(prov) + _csv_rows(keys, [[out[k] for k in keys]])
    else:
        text = _json_text(out)
    _emit(text, p["out"], stdout)


def _do_verify(p, prov, stdout):
    from .acceptance import CRITERIA, format_result, run_criteria

    suite = str(p["suite"])
    if suite == "all":
        numbers = sorted(CRITERIA)
    else:
        try:
            numbers = [int(x) for x in suite.split(",") if x.strip()]
        except ValueError:
            raise UsageError("--suite must be 'all' or a comma list of integers") from None
        bad = [k for k in numbers if k not in CRITERIA]
        if bad:
            raise UsageError(f"unknown criteria: {bad}")
    stdout.write(csv_header(prov))

    def echo(line):
        stdout.write(line + "\n")
        stdout.flush()

    results = run_criteria(numbers, seed=p["seed"], echo=echo)
    failed = [r.number for r in results if not r.passed]
    stdout.write(f"# summary: {len(results) - len(failed)}/{len(results)} passed\n")
    if p["out"] is not None:
        rows = [{"criterion": r.number, "name": r.name, "passed": r.passed,
                 "elapsed": r.elapsed, "detail": r.detail} for r in results]
        with open(p["out"], "w") as fh:
            fh.write(_json_text({"provenance": prov, "results": rows}))
    return EXIT_DOMAIN if (failed and p["strict"]) else EXIT_OK


HANDLERS = {
    "boundary": _do_boundary,
    "solve": _do_solve,
    "scan": _do_scan,
    "transitions": _do_transitions,
    "region": _do_region,
    "dos": _do_dos,
    "sample": _do_sample,
    "compare": _do_compare,
    "verify": _do_verify,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    """Run one verb and return the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.verb is None:
            raise UsageError("a verb is required: " + ", ".join(VERBS))
        params = resolve(ns.verb, ns)
        prov = provenance(ns.verb, params)
        code = HANDLERS[ns.verb](params, prov, stdout)
        return EXIT_OK if code is None else code
    except UsageError as exc:
        stderr.write(parser.format_usage())
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (ResourceError, ConvergenceError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_RESOURCE
    except (DomainError, GraphonLabError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_RESOURCE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
