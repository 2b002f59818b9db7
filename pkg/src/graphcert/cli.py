"""
Command-line entry point.

Every subcommand writes a records file (``records.csv`` or ``records.json``)
and ``summary.json`` into the output directory. Values come from, in
increasing priority: built-in defaults, a JSON ``--config`` file, flags.

Exit status: 0 success, 1 a bound check failed, 2 usage error, 3 a dense
size cap was exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import dense, protocol, spectral
from .applications import mbqc, metrology, secret_sharing, tdesign
from .errors import CapacityError, GraphCertError, ValidationError
from .graphs import ghz_rotation, graph_from_spec, star
from .montecarlo import MAX_SEED

SCHEMA_VERSION = 1
OUTPUT_ENV = "GRAPHCERT_OUTPUT_DIR"
SUBCOMMANDS = ("certify", "spectrum", "mbqc", "tdesign", "metrology", "secretshare")
SOURCES = ("honest", "replace-orthogonal", "replace-partial", "depolarizing", "random-product", "random-coherent")
DEFAULT_ANGLES = (0.3, 1.1, -0.7, 2.0)

# spawn keys at or above this are reserved for auxiliary streams, never trials
_AUX_BASE = 2**63


class UsageError(GraphCertError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str = "certify"
    graph: str | None = None
    copies: int | None = None
    trials: int = 10000
    tau: float = 1.0
    source: str = "honest"
    position: int = 1
    fidelity: float = 0.5
    p: float = 0.05
    seed: int = 0
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    exclude_identity: bool = False
    pattern: str | None = None
    angles: tuple | None = None
    t: int = 2
    haar_samples: int = 0
    k: int | None = None
    authorized: tuple | None = None
    N: int = 3

    def echo(self) -> dict:
        """Settings that determine the results (worker count and paths excluded)."""
        d = asdict(self)
        for key in ("out", "workers"):
            d.pop(key)
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


_FIELDS = {f.name for f in fields(ExperimentConfig)}


def _int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _float_list(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphcert", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    S = argparse.SUPPRESS
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, argument_default=S)
        p.add_argument("--config", help="JSON file with default values")
        p.add_argument("--repeat", help="JSON list of override objects, one run each")
        p.add_argument("--graph", help="line:N, ring:N, star:N, complete:N or an edge-list file")
        p.add_argument("--copies", "-M", type=int, help="number of copies M")
        p.add_argument("--trials", type=int)
        p.add_argument("--tau", type=float, help="acceptance fraction in (0, 1]")
        p.add_argument("--source", choices=SOURCES)
        p.add_argument("--position", type=int, help="copy replaced by replace-* sources")
        p.add_argument("--fidelity", type=float, help="F^2 of the replace-partial state")
        p.add_argument("--p", type=float, help="depolarizing probability")
        p.add_argument("--seed", type=int, help="64-bit unsigned master seed")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./graphcert-out)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--workers", type=int)
        p.add_argument("--exclude-identity", dest="exclude_identity", action="store_true")
        p.add_argument("--pattern", help="JSON measurement pattern file")
        p.add_argument("--angles", type=_float_list, help="comma separated angles of a line pattern")
        p.add_argument("--t", type=int, help="largest frame-potential order")
        p.add_argument("--haar-samples", dest="haar_samples", type=int)
        p.add_argument("--k", type=int, help="secret-sharing threshold")
        p.add_argument("--authorized", type=_int_list, help="comma separated authorised players")
        p.add_argument("--N", type=int, help="GHZ size for metrology")
    return parser


def _load_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None


def _merge(base: dict, overrides: dict, origin: str) -> dict:
    unknown = set(overrides) - _FIELDS
    if unknown:
        raise UsageError(f"unknown keys in {origin}: {sorted(unknown)}")
    out = dict(base)
    for key, val in overrides.items():
        if key in ("angles", "authorized") and isinstance(val, list):
            val = tuple(val)
        out[key] = val
    return out


def parse_config(argv=None, parser=None) -> tuple[list[ExperimentConfig], argparse.ArgumentParser]:
    """Parse flags (and an optional config file) into one config per run."""
    parser = parser or build_parser()
    ns = vars(parser.parse_args(argv))
    sub = ns.pop("subcommand")
    cfg_file = ns.pop("config", None)
    repeat_file = ns.pop("repeat", None)
    values = {"subcommand": sub}
    if cfg_file:
        data = _load_json(cfg_file, "config file")
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        data.pop("subcommand", None)
        values = _merge(values, data, "config file")
    values = _merge(values, ns, "flags")
    runs = [values]
    if repeat_file:
        overrides = _load_json(repeat_file, "repeat file")
        if not isinstance(overrides, list):
            raise UsageError("repeat file must hold a JSON list")
        runs = [_merge(values, o, "repeat file") for o in overrides]
    return [_validate(ExperimentConfig(**v)) for v in runs], parser


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    need_graph = cfg.subcommand in ("certify", "spectrum", "secretshare")
    if need_graph and not cfg.graph:
        raise UsageError(f"{cfg.subcommand} needs --graph")
    if cfg.copies is None:
        raise UsageError(f"{cfg.subcommand} needs --copies")
    if cfg.copies < 2:
        raise UsageError("--copies must be at least 2")
    if cfg.trials < 1:
        raise UsageError("--trials must be positive")
    if not 0.0 < cfg.tau <= 1.0:
        raise UsageError("--tau must lie in (0, 1]")
    if not 0 <= cfg.seed <= MAX_SEED:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    if cfg.workers < 1:
        raise UsageError("--workers must be positive")
    if cfg.source not in SOURCES:
        raise UsageError(f"unknown source {cfg.source!r}")
    if cfg.format not in ("csv", "json"):
        raise UsageError("--format must be csv or json")
    if cfg.subcommand == "secretshare" and (cfg.k is None or cfg.authorized is None):
        raise UsageError("secretshare needs --k and --authorized")
    return cfg


# -- sources --------------------------------------------------------------------


def aux_rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(_AUX_BASE + purpose,))))


def make_source(cfg: ExperimentConfig, target: np.ndarray, M: int) -> protocol.SourceStrategy:
    name = cfg.source
    if name == "honest":
        return protocol.Honest()
    if name == "replace-orthogonal":
        return protocol.SingleCopyReplace(cfg.position, protocol.orthogonal_replacement(target), "orthogonal")
    if name == "replace-partial":
        state = protocol.partial_replacement(target, cfg.fidelity)
        return protocol.SingleCopyReplace(cfg.position, state, f"F^2={cfg.fidelity}")
    if name == "depolarizing":
        return protocol.IIDChannel.depolarizing(cfg.p)
    rng = aux_rng(cfg.seed, 1)
    d = target.shape[0]
    if name == "random-product":
        return protocol.ProductState(tuple(dense.random_density(d, rng) for _ in range(M)))
    dense.check_cap("random coherent source", dense.num_qubits(target) * M, dense.GLOBAL_STATE_CAP)
    return protocol.Coherent(dense.haar_state(d**M, rng))


# -- output ------------------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def write_outputs(out_dir: Path, cfg: ExperimentConfig, header, rows, summary: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows([_fmt(v) for v in row] for row in rows)
        (out_dir / "records.csv").write_text(buf.getvalue())
    else:
        recs = [dict(zip(header, _clean(list(row)))) for row in rows]
        (out_dir / "records.json").write_text(json.dumps(recs, indent=1, sort_keys=True) + "\n")
    summary = {"schema": SCHEMA_VERSION, "subcommand": cfg.subcommand, "config": cfg.echo(), **summary}
    (out_dir / "summary.json").write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")


def _bound(name: str, value, check, applies: bool = True) -> dict:
    return {"bound": {"name": name, "value": value, "applies": applies}, "bound_check": check}


# -- subcommands ---------------------------------------------------------------------


def run_certify(cfg: ExperimentConfig):
    g = graph_from_spec(cfg.graph)
    M = cfg.copies
    target = protocol.CertificationTarget(g, exclude_identity=cfg.exclude_identity)
    src = make_source(cfg, target.state, M)
    est = protocol.estimate_p_fail(g, M, src, cfg.trials, cfg.seed, cfg.tau, None, cfg.exclude_identity, cfg.workers)
    exact = None
    if src.is_product or g.n * M <= dense.Q_MATRIX_CAP:
        exact = protocol.exact_evaluation(g, M, src, cfg.tau, None, cfg.exclude_identity)
    guaranteed = cfg.tau == 1.0
    check = est.estimate <= 1.0 / M + 3 * est.stderr if guaranteed else None
    summary = {
        "p_fail_estimate": est.estimate,
        "stderr": est.stderr,
        "p_acc": est.p_acc,
        "p_fail_exact": None if exact is None else exact["p_fail"],
        "p_acc_exact": None if exact is None else exact["p_acc"],
        "trials": est.trials,
        **_bound("1/M", 1.0 / M, check, guaranteed),
    }
    rows = [(r.trial, r.key_r, r.accepted, r.tests_passed, r.fidelity_sq) for r in est.records]
    return ("trial", "key_r", "accepted", "tests_passed", "fidelity_sq"), rows, summary, check is not False


def run_spectrum(cfg: ExperimentConfig):
    g = graph_from_spec(cfg.graph)
    M = cfg.copies
    table = spectral.spectrum_table(g, M)
    top, ok = spectral.verify_q_bound(g, M)
    dev, match = spectral.spectrum_matches(g, M)
    rows = [(r["k"], r["eigenvalue"], r["expected_multiplicity"], r["observed_multiplicity"]) for r in table]
    summary = {
        "max_eigenvalue": top,
        "spectrum_max_deviation": dev,
        "spectrum_matches": match,
        **_bound("max eigenvalue of Q <= 1", 1.0, ok),
    }
    return ("k", "eigenvalue", "expected_multiplicity", "observed_multiplicity"), rows, summary, ok


def _pattern(cfg: ExperimentConfig) -> mbqc.MeasurementPattern:
    if cfg.pattern:
        return mbqc.load_pattern(cfg.pattern)
    return mbqc.line_pattern(cfg.angles or DEFAULT_ANGLES)


def run_mbqc(cfg: ExperimentConfig):
    pat = _pattern(cfg)
    g = pat.graph
    M = cfg.copies
    target = protocol.CertificationTarget(g)
    src = make_source(cfg, target.state, M)
    res = mbqc.delegated_soundness(g, pat, M, src, cfg.trials, cfg.seed, cfg.tau, cfg.workers)
    guaranteed = cfg.tau == 1.0
    check = res.estimate <= 1.0 / M + 3 * res.stderr if guaranteed else None
    eq12 = tdesign.certified_ensemble_fidelity(res.p_acc, M) if res.p_acc > 0 else None
    eq12_ok = None
    if guaranteed and eq12 is not None:
        eq12_ok = bool(res.fidelity_sq >= eq12 - 3 * res.fidelity_sq_stderr)
    summary = {
        "comp_fail_estimate": res.estimate,
        "stderr": res.stderr,
        "p_acc": res.p_acc,
        "raw_fail_estimate": res.raw_estimate,
        "raw_stderr": res.raw_stderr,
        "accepted_fidelity_sq": res.fidelity_sq,
        "accepted_fidelity_sq_stderr": res.fidelity_sq_stderr,
        "fidelity_bound": {"name": "1 - 1/(P_acc M)", "value": eq12, "check": eq12_ok},
        **_bound("1/M", 1.0 / M, check, guaranteed),
    }
    rows = [(r.trial, r.key_r, r.accepted, r.raw_fail, r.comp_fail) for r in res.records]
    ok = check is not False and eq12_ok is not False
    return ("trial", "key_r", "accepted", "raw_fail", "comp_fail"), rows, summary, ok


def run_tdesign(cfg: ExperimentConfig):
    pat = _pattern(cfg)
    g = pat.graph
    M = cfg.copies
    target = protocol.CertificationTarget(g)
    src = make_source(cfg, target.state, M)
    res = tdesign.certify_ensemble(g, pat, M, src, cfg.trials, cfg.seed, cfg.t, cfg.tau, cfg.workers)
    summary = {
        "p_acc": res.p_acc,
        "accepted_fidelity_sq": res.fidelity_sq,
        "accepted_fidelity_sq_stderr": res.fidelity_sq_stderr,
        "ensemble_frame_potential": {str(k): v for k, v in res.frame_potentials.items()},
        **_bound("1 - 1/(P_acc M)", res.bound, res.passed if cfg.tau == 1.0 else None, cfg.tau == 1.0),
    }
    if cfg.haar_samples >= 2:
        d = 1 << len(pat.inputs)
        samples = tdesign.haar_samples(d, cfg.haar_samples, aux_rng(cfg.seed, 2))
        summary["haar_frame_potential"] = {
            str(t): tdesign.frame_potential(samples, t) for t in range(1, cfg.t + 1)
        }
    rows = [
        (i, acc, "" if m is None else "".join(map(str, m)), f2)
        for i, acc, m, f2 in res.records
    ]
    ok = not (cfg.tau == 1.0 and not res.passed)
    return ("trial", "accepted", "outcomes", "fidelity_sq"), rows, summary, ok


def run_metrology(cfg: ExperimentConfig):
    N, M = cfg.N, cfg.copies
    target = protocol.CertificationTarget(star(N), ghz_rotation(N))
    src = make_source(cfg, target.state, M)
    res = metrology.ghz_certification(N, M, src, cfg.trials, cfg.seed, cfg.tau, cfg.workers)
    guaranteed = cfg.tau == 1.0 and res.p_acc > 0
    summary = {
        "N": N,
        "p_acc": res.p_acc,
        "qfi_accepted": res.qfi,
        "qfi_ideal": metrology.ghz_qfi(N),
        "accepted_fidelity_sq": res.fidelity_sq,
        "cramer_rao_single_shot": metrology.cramer_rao(1, res.qfi) if res.qfi > 0 else None,
        **_bound("N^2 (1 - 6/(P_acc M))", res.bound, res.passed if guaranteed else None, guaranteed),
    }
    rows = [(i, a) for i, a in enumerate(res.accepted_flags)]
    return ("trial", "accepted"), rows, summary, not (guaranteed and not res.passed)


def run_secretshare(cfg: ExperimentConfig):
    g = graph_from_spec(cfg.graph)
    M = cfg.copies
    access = secret_sharing.AccessStructure(g.n, cfg.k)
    target = protocol.CertificationTarget(g)
    src = make_source(cfg, target.state, M)
    allowed = secret_sharing.restricted_tests(g, cfg.authorized)
    recs = secret_sharing.ss_records(g, M, src, access, cfg.authorized, cfg.trials, cfg.seed, cfg.tau, cfg.workers)
    p_acc = float(np.mean([a for a, _ in recs]))
    honest = cfg.source == "honest"
    check = (p_acc == 1.0) if honest else None
    summary = {
        "p_acc": p_acc,
        "restricted_tests": len(allowed),
        "degenerate": len(allowed) <= 1,
        **_bound("honest acceptance = 1", 1.0, check, honest),
    }
    rows = [(i, a, p) for i, (a, p) in enumerate(recs)]
    return ("trial", "accepted", "tests_passed"), rows, summary, check is not False


RUNNERS = {
    "certify": run_certify,
    "spectrum": run_spectrum,
    "mbqc": run_mbqc,
    "tdesign": run_tdesign,
    "metrology": run_metrology,
    "secretshare": run_secretshare,
}


def run(cfg: ExperimentConfig, out_dir: Path | None = None) -> int:
    """Execute one experiment; returns the exit status."""
    if out_dir is None:
        out_dir = Path(cfg.out or os.environ.get(OUTPUT_ENV) or "graphcert-out")
    header, rows, summary, ok = RUNNERS[cfg.subcommand](cfg)
    write_outputs(out_dir, cfg, header, rows, summary)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        configs, parser = parse_config(argv, parser)
        status = 0
        for i, cfg in enumerate(configs):
            base = Path(cfg.out or os.environ.get(OUTPUT_ENV) or "graphcert-out")
            out_dir = base / f"run_{i:03d}" if len(configs) > 1 else base
            status = max(status, run(cfg, out_dir))
        return status
    except CapacityError as exc:
        print(f"graphcert: capacity error: {exc}. Reduce the number of qubits or copies.", file=sys.stderr)
        return 3
    except (UsageError, ValidationError) as exc:
        parser.print_usage(sys.stderr)
        print(f"graphcert: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        return int(exc.code or 0)
