"""Command-line interface: compute, verify, sweep, discriminate and replay."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import extensions as ext
from . import measures, qsd, states, suites
from .errors import ParseError, QCorrError, UnknownMeasure
from .measures import Side, as_side
from .optimize import MeasureReport, OptimizerConfig

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_NONCONVERGED = 3

SEED_ENV = "QCORR_SEED"


def _version() -> str:
    from . import __version__

    return __version__


# measures by name ---------------------------------------------------------------

BASIC = {"E_B", "E_B_cr", "E_r", "D_B", "D_r"}
EXTENDED = {
    # name: (kind, side, fixed distance or None)
    "Ehat": ("gdse", Side.LEFT, "bures"),
    "Ehat_d": ("gdse", Side.LEFT, None),
    "Ehat_dp": ("midse", Side.LEFT, None),
    "Echeck_d": ("pt_gdse", Side.LEFT, None),
    "Echeck_dp": ("pt_midse", Side.LEFT, None),
    "Etilde": ("gdse", Side.BOTH, "bures"),
    "Etilde_d": ("gdse", Side.BOTH, None),
    "Etilde_dp": ("midse", Side.BOTH, None),
    "Ebreve_d": ("pt_gdse", Side.BOTH, None),
    "Ebreve_dp": ("pt_midse", Side.BOTH, None),
}
MEASURES = sorted(BASIC) + list(EXTENDED)


def compute_measure(rho: states.DensityMatrix, name: str, side="left", distance: str = "bures",
                    config: OptimizerConfig | None = None, mode: str = "direct") -> MeasureReport:
    config = config or OptimizerConfig()
    if name == "E_B":
        return measures.bures_entanglement(rho, config=config)
    if name == "E_B_cr":
        return measures.convex_roof_bures(rho, config=config)
    if name == "E_r":
        return measures.relent_entanglement(rho, config=config)
    if name == "D_B":
        return measures.bures_discord(rho, side, config)
    if name == "D_r":
        return measures.relent_discord(rho, side, config)
    if name not in EXTENDED:
        raise UnknownMeasure(f"unknown measure {name!r}; known: {', '.join(MEASURES)}")
    kind, fixed_side, fixed_dist = EXTENDED[name]
    dist = fixed_dist or distance
    if kind == "gdse":
        return ext.gdse(rho, dist, fixed_side, config)
    if kind == "midse":
        return ext.midse(rho, dist, fixed_side, config)
    if kind == "pt_gdse":
        return ext.pt_gdse(rho, dist, fixed_side, config, mode=mode)
    return ext.pt_midse(rho, dist, fixed_side, config)


# manifests and serialization ------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    params: dict
    config: dict
    seed: int
    version: str
    input_digest: str | None = None
    timings: dict = field(default_factory=dict)

    def reproducible_part(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.reproducible_part(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["digest"] = self.digest()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        d = dict(d)
        d.pop("digest", None)
        return cls(**d)


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def jsonable(obj):
    """Best-effort conversion of report payloads into JSON values."""
    if isinstance(obj, states.DensityMatrix):
        return states.state_to_json(obj)
    if isinstance(obj, (states.Ensemble,)):
        return {"weights": obj.weights.tolist(), "members": [states.state_to_json(m) for m in obj.members]}
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"shape": list(obj.shape), "re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if obj is None or isinstance(obj, (str, int, bool)):
        return obj
    return repr(obj)


def report_payload(rep: MeasureReport) -> dict:
    cert = {k: v for k, v in rep.certificate.items() if k != "params"}
    diag = {k: v for k, v in rep.diagnostics.items() if k != "trace"}
    return {"value": rep.value, "converged": rep.converged, "restarts_used": rep.restarts_used,
            "certificate": jsonable(cert), "diagnostics": jsonable(diag)}


def _write_text(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(obj, out) -> None:
    _write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", out)


def _csv_text(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


# configuration -----------------------------------------------------------------


def parse_ancilla_dims(text: str | None):
    """``"1,2,4"`` (one-sided) or ``"1x1,2x2"`` (two-sided) to a schedule tuple."""
    if not text:
        return None
    out = []
    try:
        for item in text.split(","):
            item = item.strip()
            out.append(tuple(int(v) for v in item.split("x")) if "x" in item else int(item))
    except ValueError:
        raise ParseError(f"cannot parse ancilla dims {text!r}") from None
    return tuple(out)


def _load_config_file(path) -> dict:
    if not path:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(d, dict):
        raise ParseError("config file must hold a JSON object")
    return d


def resolve_config(args) -> OptimizerConfig:
    """Flags override the config file, which overrides ``QCORR_SEED`` and the defaults."""
    base = {}
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            base["seed"] = int(env_seed)
        except ValueError:
            raise ParseError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from None
    base.update(_load_config_file(getattr(args, "config", None)))
    flags = {"restarts": args.restarts, "seed": args.seed, "value_tol": args.tol,
             "dims_schedule": parse_ancilla_dims(getattr(args, "ancilla_dims", None))}
    base.update({k: v for k, v in flags.items() if v is not None})
    return OptimizerConfig.from_dict(base)


def _load_state(path) -> states.DensityMatrix:
    try:
        return states.load_state(path)
    except OSError as exc:
        raise ParseError(f"cannot read state file {path}: {exc}") from None


# commands ------------------------------------------------------------------------


def run_compute(params: dict, config: OptimizerConfig) -> dict:
    rho = _load_state(params["state"])
    t0 = time.perf_counter()
    rep = compute_measure(rho, params["measure"], params["side"], params["distance"], config, params["mode"])
    payload = report_payload(rep)
    payload["seconds"] = time.perf_counter() - t0
    return payload


def cmd_compute(args) -> int:
    config = resolve_config(args)
    params = {"state": str(args.state), "measure": args.measure, "side": as_side(args.side).value,
              "distance": args.distance, "mode": args.mode}
    payload = run_compute(params, config)
    manifest = RunManifest("compute", params, config.to_dict(), config.seed, _version(),
                           file_digest(args.state), {"compute": payload.pop("seconds")})
    payload["manifest"] = manifest.to_dict()
    _dump(payload, args.out)
    return EXIT_OK if payload["converged"] else EXIT_NONCONVERGED


def _suite_outputs(result: suites.SuiteResult, manifest: RunManifest, out) -> None:
    doc = result.to_dict()
    doc["manifest"] = manifest.to_dict()
    if out in (None, "-"):
        _dump(doc, None)
        return
    prefix = Path(out)
    _dump(doc, prefix.with_suffix(".json"))
    cols = ["suite", "index", "label", "check", "gap", "tol", "passed", "required", "converged"]
    _write_text(_csv_text(result.rows(), cols), prefix.with_suffix(".csv"))


def run_verify(params: dict, config: OptimizerConfig, jobs: int = 1) -> suites.SuiteResult:
    return suites.run_suite(params["suite"], params["size"], config.seed, config, jobs=jobs,
                            indices=params.get("indices"))


def cmd_verify(args) -> int:
    config = resolve_config(args)
    suite = suites.get_suite(args.suite)
    params = {"suite": suite.name, "size": args.size if args.size is not None else suite.size,
              "indices": None}
    t0 = time.perf_counter()
    result = run_verify(params, config, args.jobs)
    manifest = RunManifest("verify", params, config.to_dict(), config.seed, _version(), None,
                           {"total": time.perf_counter() - t0,
                            "instances": [r.seconds for r in result.instances]})
    _suite_outputs(result, manifest, args.out)
    for name, w in result.worst_gaps().items():
        flag = "ok" if w["gap"] <= w["tol"] else ("FAIL" if w["required"] else "recorded")
        print(f"[{flag}] {suite.name}: {name}: worst gap {w['gap']:.3e} (tol {w['tol']:.1e})", file=sys.stderr)
    if not result.passed:
        return EXIT_FAIL
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def parse_corpus(spec: str, seed: int) -> list[tuple[str, states.DensityMatrix]]:
    """Corpus specs: ``werner:START:STOP:STEP``, ``random:N[:DAxDB[:RANK]]`` or ``files:PATH[,PATH...]``."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "werner":
            lo, hi, step = (float(v) for v in rest.split(":"))
            n = int(round((hi - lo) / step)) + 1
            grid = [round(lo + i * step, 10) for i in range(n)]
            return [(f"werner p={p:g}", states.werner(min(p, 1.0))) for p in grid]
        if kind == "random":
            parts = rest.split(":") if rest else []
            n = int(parts[0]) if parts else 10
            dims = tuple(int(v) for v in parts[1].split("x")) if len(parts) > 1 else (2, 2)
            rank = int(parts[2]) if len(parts) > 2 else None
            out = []
            for i in range(n):
                rng = suites.instance_rng(seed, i)
                d = int(np.prod(dims))
                out.append((f"random{i}", states.random_density(d, rank=rank, seed=rng,
                                                                layout=states.bipartite_layout(*dims))))
            return out
        if kind == "files":
            return [(p, _load_state(p)) for p in rest.split(",") if p]
    except (ValueError, IndexError):
        raise ParseError(f"cannot parse corpus spec {spec!r}") from None
    raise ParseError(f"unknown corpus kind {kind!r}; use werner, random or files")


def _sweep_task(task):
    index, label, rho, name, side, distance, config, mode = task
    t0 = time.perf_counter()
    rep = compute_measure(rho, name, side, distance, config, mode)
    return {"index": index, "label": label, "measure": name, "value": repr(float(rep.value)),
            "converged": int(rep.converged), "restarts_used": rep.restarts_used}, time.perf_counter() - t0


def run_sweep(params: dict, config: OptimizerConfig, jobs: int = 1):
    corpus = parse_corpus(params["corpus"], config.seed)
    tasks = [(i, label, rho, m, params["side"], params["distance"], config, params["mode"])
             for i, (label, rho) in enumerate(corpus) for m in params["measures"]]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_sweep_task, tasks))
    else:
        out = [_sweep_task(t) for t in tasks]
    return [r for r, _ in out], [s for _, s in out]


SWEEP_COLUMNS = ["index", "label", "measure", "value", "converged", "restarts_used", "manifest"]


def cmd_sweep(args) -> int:
    config = resolve_config(args)
    names = [m for m in (args.measure or "").split(",") if m]
    if not names:
        raise QCorrError("sweep needs at least one measure")
    for m in names:
        if m not in MEASURES:
            raise UnknownMeasure(f"unknown measure {m!r}; known: {', '.join(MEASURES)}")
    params = {"corpus": args.corpus, "measures": names, "side": as_side(args.side).value,
              "distance": args.distance, "mode": args.mode}
    rows, secs = run_sweep(params, config, args.jobs)
    manifest = RunManifest("sweep", params, config.to_dict(), config.seed, _version(), None,
                           {"tasks": secs})
    ref = manifest.digest()
    for r in rows:
        r["manifest"] = ref
    _write_text(_csv_text(rows, SWEEP_COLUMNS), args.out)
    if args.out not in (None, "-"):
        _dump(manifest.to_dict(), Path(args.out).with_suffix(".manifest.json"))
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


def load_ensemble(path) -> qsd.DiscriminationEnsemble:
    try:
        obj = json.loads(Path(path).read_text())
        priors = obj["priors"]
        hyps = [states.state_from_json(s) for s in obj["states"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"cannot read ensemble file {path}: {exc}") from None
    return qsd.DiscriminationEnsemble(np.asarray(priors, dtype=float), hyps)


def run_discriminate(params: dict, config: OptimizerConfig) -> dict:
    if params.get("from_state"):
        rho = _load_state(params["from_state"])
        res = qsd.verify_corollary(rho, config)
        return {"lhs": res.lhs, "rhs": res.rhs, "gap": res.gap, "converged": res.discrimination.converged,
                "schedule": jsonable(res.discrimination.diagnostics.get("schedule"))}
    e = load_ensemble(params["ensemble"])
    out = {}
    if e.size == 2:
        out["helstrom"] = qsd.helstrom_two_state(e)
    rep = qsd.optimal_success_vn(e, config)
    out.update({"vn": rep.value, "converged": rep.converged,
                "assignment": jsonable(rep.certificate.get("assignment"))})
    return out


def cmd_discriminate(args) -> int:
    if bool(args.ensemble) == bool(args.from_state):
        raise QCorrError("give exactly one of an ensemble file or --from-state")
    config = resolve_config(args)
    params = {"ensemble": args.ensemble, "from_state": args.from_state}
    src = args.from_state or args.ensemble
    t0 = time.perf_counter()
    payload = run_discriminate(params, config)
    manifest = RunManifest("discriminate", params, config.to_dict(), config.seed, _version(), file_digest(src),
                           {"total": time.perf_counter() - t0})
    payload["manifest"] = manifest.to_dict()
    _dump(payload, args.out)
    return EXIT_OK if payload["converged"] else EXIT_NONCONVERGED


def replay_values(manifest: RunManifest):
    """Re-run a manifest and return the values its report records."""
    config = OptimizerConfig.from_dict(manifest.config)
    p = manifest.params
    if manifest.command == "compute":
        return run_compute(p, config)["value"]
    if manifest.command == "verify":
        res = run_verify(p, config)
        return [r.values for r in res.instances]
    if manifest.command == "sweep":
        return [r["value"] for r in run_sweep(p, config)[0]]
    if manifest.command == "discriminate":
        return {k: v for k, v in run_discriminate(p, config).items() if isinstance(v, float)}
    raise ParseError(f"cannot replay command {manifest.command!r}")


def recorded_values(doc: dict, command: str):
    if command == "compute":
        return doc["value"]
    if command == "verify":
        return [r["values"] for r in doc["instances"]]
    if command == "discriminate":
        return {k: v for k, v in doc.items() if isinstance(v, float)}
    raise ParseError("sweep reports are replayed from their CSV; pass the CSV with --csv")


def cmd_replay(args) -> int:
    try:
        doc = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read report {args.report}: {exc}") from None
    manifest = RunManifest.from_dict(doc["manifest"] if "manifest" in doc else doc)
    if manifest.input_digest is not None:
        src = manifest.params.get("state") or manifest.params.get("from_state") or manifest.params.get("ensemble")
        if file_digest(src) != manifest.input_digest:
            print(f"input {src} changed since the report was written", file=sys.stderr)
            return EXIT_FAIL
    if manifest.command == "sweep":
        if not args.csv:
            raise ParseError("sweep replays need the original CSV via --csv")
        with open(args.csv, newline="") as fh:
            want = [row["value"] for row in csv.DictReader(fh)]
    else:
        want = recorded_values(doc, manifest.command)
    got = replay_values(manifest)
    same = got == want
    print("identical" if same else "values differ")
    return EXIT_OK if same else EXIT_FAIL


# parser --------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float, help="value tolerance of the local descents")
    p.add_argument("--config", help="JSON file with optimizer settings")
    p.add_argument("--out", help="output path (stdout when omitted)")


def _measure_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--side", default="left", choices=["left", "both"])
    p.add_argument("--distance", default="bures", choices=["bures", "relent"])
    p.add_argument("--ancilla-dims", help="schedule such as 1,2,4 or 1x1,2x2")
    p.add_argument("--mode", default="direct", choices=["direct", "extended"],
                   help="search mode for the partial-trace discord quantities")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcorr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="evaluate one measure on a state file")
    p.add_argument("state")
    p.add_argument("--measure", required=True)
    _measure_flags(p)
    _common(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("verify", help="run a property suite")
    p.add_argument("suite")
    p.add_argument("--size", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--ancilla-dims")
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="evaluate measures over a corpus into CSV")
    p.add_argument("corpus")
    p.add_argument("--measure", default="", help="comma separated measure names")
    p.add_argument("--jobs", type=int, default=1)
    _measure_flags(p)
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("discriminate", help="discrimination success for an ensemble or a state")
    p.add_argument("ensemble", nargs="?")
    p.add_argument("--from-state")
    p.add_argument("--ancilla-dims")
    _common(p)
    p.set_defaults(func=cmd_discriminate)

    p = sub.add_parser("replay", help="re-run a report's manifest and compare values")
    p.add_argument("report")
    p.add_argument("--csv", help="original CSV of a sweep")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("list", help="list measures and suites")
    p.set_defaults(func=cmd_list)
    return parser


def cmd_list(args) -> int:
    print("measures: " + ", ".join(MEASURES))
    for s in suites.SUITES.values():
        print(f"suite {s.name} ({s.size}): {s.description}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QCorrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
