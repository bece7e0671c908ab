"""Command-line front end.

Every command resolves its parameters as defaults < config file < flags and
embeds the resolved snapshot (including the seed and any input documents)
in its output.  Passing a previous output back through ``--config``
reproduces it byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import corr_bounds, efron_decomp, entropy_oracle, icfb_channels, regions, strategies
from .errors import ConfigurationError, EfflenError, StructuralError
from .info_math import JointPMF, NoiseParams
from .maxcorr import hgr_maximal_correlation, verify_psi_by_search

SCHEMA_VERSION = 1
SNAPSHOT_PREFIX = "# snapshot: "

NOISE = {"p": 0.0, "delta": 0.0, "epsilon": 0.0, "p1": 0.0, "p3": 0.0}

# Parameters of each command and their defaults.  ``None`` means optional.
PARAMS = {
    "decompose": {
        "function": "dictator",
        "n": 3,
        "coordinate": 1,
        "table": None,
        "source": "uniform",
        "q": 0.5,
        "method": "auto",
        "seed": 0,
        "format": "json",
    },
    "maxcorr": {"alpha": None, "pmf": None, "search": False, "restarts": 20, "seed": 0, "format": "json"},
    "bounds": {
        "spectrum_e": None,
        "spectrum_f": None,
        "psi": None,
        "alpha": None,
        "pmf": None,
        "seed": 0,
        "format": "json",
    },
    "simulate": {
        "preset": "example1",
        "strategy": "shared",
        **NOISE,
        "n": 60,
        "trials": 1000,
        "seed": 0,
        "inner": 3,
        "n0": 4,
        "seed1": 1,
        "seed3": 2,
        "batch_size": 10000,
        "transcripts": 10,
        "format": "json",
    },
    "region": {"kind": "outer", **NOISE, "g": 1.0, "grid": [], "seed": 0, "format": "json"},
    "entropy-check": {
        "mode": "margin",
        "n": 4,
        "pattern": None,
        "strategy": "last-bit",
        "p": 0.2,
        "delta": 0.1,
        "n0": 1,
        "inner": 3,
        "cap": icfb_channels.MAX_EXACT_STATES,
        "seed": 0,
        "format": "json",
    },
    "sweep": {"family": "parity", "n": 6, "alpha": 0.1, "pmf": None, "count": 20, "seed": 0, "format": "csv"},
}

HELP = {
    "decompose": "dependency spectrum and effective lengths of a Boolean function",
    "maxcorr": "maximal correlation of a joint pmf",
    "bounds": "two-sided disagreement bounds from two spectra and psi",
    "simulate": "Monte Carlo session on a preset channel",
    "region": "rate-region formulas over a parameter grid",
    "entropy-check": "exact entropy checks on small sessions",
    "sweep": "exact disagreement and bounds over a function family",
}


# Output ---------------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _json_doc(command: str, snapshot: dict, result) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": "efflen",
        "version": __version__,
        "command": command,
        "seed": snapshot["seed"],
        "snapshot": snapshot,
        "result": result,
    }
    return json.dumps(doc, indent=2, default=_plain, allow_nan=False) + "\n"


def _csv_doc(command: str, snapshot: dict, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# efflen {__version__} {command} schema_version={SCHEMA_VERSION} seed={snapshot['seed']}\n")
    buf.write(SNAPSHOT_PREFIX + json.dumps(snapshot, separators=(",", ":"), default=_plain) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# Config ---------------------------------------------------------------------


def _read_json(path: str, what: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read {what} {path!r}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"{what} {path!r} is not valid JSON: {exc}") from None


def load_config(path: str, command: str) -> dict:
    """Parameter map from a config file or from a previous output (JSON or CSV)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc.strerror}") from None
    line = next((ln for ln in text.splitlines() if ln.startswith(SNAPSHOT_PREFIX)), None)
    try:
        data = json.loads(line[len(SNAPSHOT_PREFIX) :] if line is not None else text)
    except json.JSONDecodeError as exc:
        raise StructuralError(f"config {path!r} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise StructuralError(f"config {path!r} must hold a JSON object")
    if "snapshot" in data and "result" in data:
        if data.get("command") != command:
            raise ConfigurationError(f"config {path!r} was produced by {data.get('command')!r}, not {command!r}")
        data = data["snapshot"]
    data = dict(data)
    if data.pop("command", command) != command:
        raise ConfigurationError(f"config {path!r} is a snapshot of a different command")
    unknown = sorted(set(data) - set(PARAMS[command]))
    if unknown:
        raise ConfigurationError(f"unknown config keys for {command}: {unknown}")
    return data


def resolve(command: str, args: argparse.Namespace) -> dict:
    snap = dict(PARAMS[command])
    if getattr(args, "config", None):
        snap.update(load_config(args.config, command))
    flags = {k: v for k, v in vars(args).items() if k in snap}
    # Input documents are embedded so a snapshot is self-contained.
    for key, what in (("table", "truth table"), ("pmf", "joint pmf")):
        if key in flags and flags[key] is not None:
            flags[key] = _read_json(flags[key], what)
    if "spectra" in vars(args):
        e_path, f_path = args.spectra
        flags["spectrum_e"] = _spectrum_doc(_read_json(e_path, "spectrum"))
        flags["spectrum_f"] = _spectrum_doc(_read_json(f_path, "spectrum"))
    snap.update(flags)
    return {"command": command, **snap}


def _spectrum_doc(data) -> dict:
    """Accept either a bare spectrum document or a ``decompose`` output."""
    if isinstance(data, dict) and isinstance(data.get("result"), dict) and "spectrum" in data["result"]:
        data = data["result"]["spectrum"]
    if not isinstance(data, dict):
        raise StructuralError("spectrum document must be a JSON object")
    return data


# Commands -------------------------------------------------------------------


def _function_from(snap: dict) -> efron_decomp.TruthTableFunction:
    kind, n = snap["function"], int(snap["n"])
    if snap["table"] is not None:
        return efron_decomp.TruthTableFunction.from_json(json.dumps(snap["table"]))
    if kind == "dictator":
        if not 1 <= snap["coordinate"] <= n:
            raise ConfigurationError(f"coordinate must lie in 1..{n}")
        return efron_decomp.dictator(n, snap["coordinate"] - 1)
    if kind == "parity":
        return efron_decomp.parity(n)
    if kind == "majority":
        return efron_decomp.majority(n)
    if kind == "constant":
        return efron_decomp.constant(n)
    if kind == "random":
        return efron_decomp.random_function(n, np.random.default_rng(snap["seed"]))
    raise ConfigurationError(f"unknown function {kind!r}")


def cmd_decompose(snap: dict):
    fn = _function_from(snap)
    if snap["source"] == "uniform":
        source = efron_decomp.ProductSource.uniform(fn.n, fn.alphabet_size)
    elif snap["source"] == "bernoulli":
        source = efron_decomp.ProductSource.bernoulli(fn.n, snap["q"])
    else:
        raise ConfigurationError(f"unknown source {snap['source']!r}; choose uniform or bernoulli")
    spec = efron_decomp.spectrum(fn, source, snap["method"])
    result = {"one_probability": efron_decomp.one_probability(fn, source), "spectrum": spec.to_json_dict()}
    rows = [(efron_decomp.mask_to_string(m, spec.n), efron_decomp.popcount(m), v) for m, v in enumerate(spec.variances)]
    return result, ("mask", "weight", "variance"), rows


def _pmf_from(snap: dict) -> JointPMF:
    if snap["pmf"] is not None:
        if not isinstance(snap["pmf"], dict):
            raise StructuralError("joint pmf document must be a JSON object with field 'probs'")
        return JointPMF.from_dict(snap["pmf"])
    if snap["alpha"] is not None:
        return JointPMF.dsbs(snap["alpha"])
    raise ConfigurationError("give a joint pmf (--pmf) or a DSBS crossover (--alpha)")


def cmd_maxcorr(snap: dict):
    pmf = _pmf_from(snap)
    res = hgr_maximal_correlation(pmf)
    result = {"psi": res.psi, "degenerate": res.degenerate, "optimal_e": res.optimal_e, "optimal_f": res.optimal_f}
    if snap["search"]:
        rep = verify_psi_by_search(pmf, res, restarts=snap["restarts"], seed=snap["seed"])
        result["search"] = {"best": rep.best, "sampled_max": rep.sampled_max, "gap": rep.gap, "upper_ok": rep.upper_ok}
    return result, ("psi", "degenerate"), [(res.psi, res.degenerate)]


def cmd_bounds(snap: dict):
    if snap["spectrum_e"] is None or snap["spectrum_f"] is None:
        raise ConfigurationError("two spectrum documents are required (--spectra E F)")
    se = efron_decomp.DependencySpectrum.from_json_dict(snap["spectrum_e"])
    sf = efron_decomp.DependencySpectrum.from_json_dict(snap["spectrum_f"])
    if snap["psi"] is not None:
        psi = float(snap["psi"])
    else:
        psi = hgr_maximal_correlation(_pmf_from(snap)).psi
    b = corr_bounds.disagreement_bounds(se, sf, psi)
    result = {"psi": psi, **b.to_dict(), "eff_len_e": se.effective_length, "eff_len_f": sf.effective_length}
    header = ("lower", "upper", "lower_clamped", "upper_clamped", "psi")
    return result, header, [(b.lower, b.upper, b.lower_clamped, b.upper_clamped, psi)]


def cmd_simulate(snap: dict):
    params = NoiseParams(*(snap[k] for k in NOISE))
    kernel = icfb_channels.preset(snap["preset"], params)
    if kernel.name != "example1":
        raise ConfigurationError(f"strategies are defined for example1 only, not {kernel.name!r}")
    strat = strategies.build(
        snap["strategy"], params, inner=snap["inner"], n0=snap["n0"], seed1=snap["seed1"], seed3=snap["seed3"]
    )
    res = icfb_channels.run_session(kernel, strat, snap["n"], snap["trials"], snap["seed"], snap["batch_size"])
    agree = strategies.measure_agreement_and_r2_bound(res, params.p, params.delta)
    result = {
        **res.summary(),
        "r2_bound_at_agreement": agree.r2_bound,
        "r2_bound_linear_form": agree.r2_bound_linear,
        "eff_len_x12": strat.metadata.get("eff_len_x12"),
        "eff_len_x32": strat.metadata.get("eff_len_x32"),
    }
    for key in ("psi", "steady_disagreement", "disagreement_bounds", "inner_code"):
        if key in strat.metadata:
            result[key] = strat.metadata[key]
    if isinstance(strat.data_layout, strategies.ForwardingLayout):
        rate, count = strategies.forwarded_stream_error(res, strat)
        result["forwarded_stream_error"] = {"value": rate, "bits": count}
    text = res.transcripts_csv(snap["transcripts"])
    rows = list(csv.reader(io.StringIO(text)))
    return result, rows[0], rows[1:]


def _parse_grid(specs) -> list[tuple[str, list[float]]]:
    axes = []
    for spec in specs:
        name, sep, body = spec.partition("=")
        if not sep or not body:
            raise ConfigurationError(f"grid spec {spec!r} must look like name=start:stop:step or name=v1,v2")
        try:
            if ":" in body:
                start, stop, step = (float(x) for x in body.split(":"))
                if step <= 0.0:
                    raise ConfigurationError(f"grid step must be positive in {spec!r}")
                count = int(math.floor((stop - start) / step + 1e-9)) + 1
                values = [start + i * step for i in range(max(count, 0))]
            else:
                values = [float(x) for x in body.split(",")]
        except ValueError:
            raise ConfigurationError(f"cannot parse grid spec {spec!r}") from None
        axes.append((name.strip(), values))
    return axes


def cmd_region(snap: dict):
    axes = _parse_grid(snap["grid"])
    fixed = {k: snap[k] for k in (*NOISE, "g")}
    unknown = [name for name, _ in axes if name not in fixed]
    if unknown:
        raise ConfigurationError(f"grid axes {unknown} are not region parameters {sorted(fixed)}")
    if snap["kind"] == "continuity":
        eps = dict(axes).get("epsilon", [fixed["epsilon"]])
        table = regions.continuity_probe(fixed["p"], fixed["delta"], eps)
        result = {"rows": table.rows, "max_step_difference": table.max_step_difference}
        return result, ("epsilon", "r1", "r2_g0", "r2_g1", "r3"), table.rows
    reports = []
    for combo in itertools.product(*(values for _, values in axes)):
        point = {**fixed, **dict(zip((name for name, _ in axes), combo))}
        reports.append(regions.evaluate(snap["kind"], **point))
    result = {"rows": [r.to_dict() for r in reports]}
    return result, regions.REGION_CSV_HEADER, [regions.report_csv_row(r) for r in reports]


def cmd_entropy_check(snap: dict):
    if snap["mode"] == "uncoded-gap":
        rep = entropy_oracle.uncoded_entropy_gap(snap["n"], snap["p"], snap["delta"])
        d = rep.to_dict()
        return d, tuple(d), [tuple(d.values())]
    if snap["mode"] != "margin":
        raise ConfigurationError(f"unknown mode {snap['mode']!r}; choose margin or uncoded-gap")
    pattern = snap["pattern"] if snap["pattern"] is not None else "1" * snap["n"]
    rep = entropy_oracle.agreement_entropy_check(
        snap["n"], pattern, snap["strategy"], snap["p"], snap["delta"], snap["n0"], snap["seed"], snap["inner"], snap["cap"]
    )
    d = rep.to_dict()
    return d, ("n", "z", "bound", "exact", "margin"), [(rep.n, rep.z, rep.bound, rep.exact, rep.margin)]


def cmd_sweep(snap: dict):
    n = snap["n"]
    source = _pmf_from(snap)
    if snap["family"] == "parity":
        family = list(corr_bounds.parity_family(n))
    elif snap["family"] == "random":
        rng = np.random.default_rng(snap["seed"])
        family = [
            (f"random-{i}", efron_decomp.random_function(n, rng), efron_decomp.random_function(n, rng))
            for i in range(snap["count"])
        ]
    else:
        raise ConfigurationError(f"unknown family {snap['family']!r}; choose parity or random")
    rows = corr_bounds.agreement_sweep(family, source, n)
    result = {"rows": [dict(zip(("label", *corr_bounds.SWEEP_HEADER), (r.label, *r.csv_row()))) for r in rows]}
    return result, corr_bounds.SWEEP_HEADER, [r.csv_row() for r in rows]


COMMANDS = {
    "decompose": cmd_decompose,
    "maxcorr": cmd_maxcorr,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "region": cmd_region,
    "entropy-check": cmd_entropy_check,
    "sweep": cmd_sweep,
}


# Parser ---------------------------------------------------------------------


def _flag(parser, name, **kw):
    parser.add_argument(name, default=argparse.SUPPRESS, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="efflen", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"efflen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, defaults in PARAMS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="JSON parameter file or a previous output to re-run")
        p.add_argument("--out", help="output path (default: stdout)")
        _flag(p, "--format", choices=("json", "csv"))
        _flag(p, "--seed", type=int)
        for key in ("p", "delta", "epsilon", "p1", "p3", "alpha", "psi", "q", "g"):
            if key in defaults:
                _flag(p, f"--{key}", type=float)
        for key in ("n", "n0", "trials", "inner", "coordinate", "restarts", "seed1", "seed3", "count", "cap"):
            if key in defaults:
                _flag(p, f"--{key}", type=int)
        if "batch_size" in defaults:
            _flag(p, "--batch-size", dest="batch_size", type=int)
        if "transcripts" in defaults:
            _flag(p, "--transcripts", type=int, help="trials written in CSV transcripts")
        if "pmf" in defaults:
            _flag(p, "--pmf", help="JSON joint pmf file with field 'probs'")
        if "table" in defaults:
            _flag(p, "--table", help="JSON truth table file (n, alphabet_size, table)")
            _flag(p, "--function", choices=("dictator", "parity", "majority", "constant", "random"))
            _flag(p, "--source", choices=("uniform", "bernoulli"))
            _flag(p, "--method", choices=("auto", "recursion", "butterfly"))
        if "search" in defaults:
            _flag(p, "--search", action="store_true")
        if "spectrum_e" in defaults:
            _flag(p, "--spectra", nargs=2, metavar=("E", "F"))
        if "preset" in defaults:
            _flag(p, "--preset")
            _flag(p, "--strategy", choices=("shared", "uncoded", "independent"))
        if "kind" in defaults:
            _flag(p, "--kind", choices=(*regions.REGION_KINDS, "continuity"))
            _flag(p, "--grid", action="append", help="axis spec name=start:stop:step or name=v1,v2 (repeatable)")
        if "mode" in defaults:
            _flag(p, "--mode", choices=("margin", "uncoded-gap"))
            _flag(p, "--pattern")
            _flag(p, "--strategy", choices=entropy_oracle.CHECK_STRATEGIES)
        if "family" in defaults:
            _flag(p, "--family", choices=("parity", "random"))
    return parser


def run(argv=None) -> tuple[str, str | None]:
    """Execute one command; returns the rendered output and the path it was written to."""
    args = build_parser().parse_args(argv)
    snap = resolve(args.command, args)
    result, header, rows = COMMANDS[args.command](snap)
    if snap["format"] == "csv":
        text = _csv_doc(args.command, snap, header, rows)
    elif snap["format"] == "json":
        text = _json_doc(args.command, snap, result)
    else:
        raise ConfigurationError(f"unknown format {snap['format']!r}")
    if args.out:
        write_atomic(args.out, text)
    return text, args.out


def main(argv=None) -> int:
    try:
        text, out = run(argv)
    except EfflenError as exc:
        print(f"efflen: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # anything unexpected is an internal failure
        print(f"efflen: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    if out is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
