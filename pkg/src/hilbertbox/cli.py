"""Command-line entry point: JSON config in, CSV and JSON results out.

Exit codes: 0 success, 2 invalid config, 3 numeric cap reached, 4 unsupported input.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import operator as op
from .determinant import DEFAULT_GRID, det_sequence, find_N_epsilon
from .errors import CapReached, InputError, PreconditionError, UnsupportedInput
from .geometry import sandwich
from .group import RotationFlow, conjugated_flow_classify, lambda_t, overlap_curve
from .proximity import classify
from .rectangle import MeasurableRectangle
from .registry import Piece, Registry, RingElement, decompose, glued_measure
from .seqcert import TailDescriptor

EXIT_OK, EXIT_SCHEMA, EXIT_CAP, EXIT_UNSUPPORTED = 0, 2, 3, 4

# ---------------------------------------------------------------------------
# schemas

_NUM = {"type": "number"}
_TAIL = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["kind", "c"],
         "properties": {"kind": {"const": "constant"}, "c": _NUM}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "coeff", "ratio"],
         "properties": {"kind": {"const": "geometric"}, "coeff": _NUM,
                        "ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}}},
        {"type": "object", "additionalProperties": False,
         "required": ["kind", "coeff", "exponent"],
         "properties": {"kind": {"const": "power"}, "coeff": _NUM,
                        "exponent": {"type": "number", "exclusiveMinimum": 0}}},
    ]
}
_SEQ = {
    "oneOf": [
        _NUM,
        {"type": "object", "additionalProperties": False,
         "properties": {"head": {"type": "array", "items": _NUM}, "tail": _TAIL, "base": _NUM}},
    ]
}
_RECT = {
    "type": "object", "additionalProperties": False, "required": ["lengths"],
    "properties": {"lengths": _SEQ, "centers": _SEQ, "basis": {"type": "string"}},
}
_FLOW = {"type": "object", "additionalProperties": False, "required": ["rates"],
         "properties": {"rates": _SEQ}}
_INT_LIST = {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}


def _op_schema() -> dict:
    ref = {"$ref": "#/$defs/operator"}
    kinds = {
        "identity": {},
        "permutation_sign": {"perm": {"type": "array", "items": {"type": "integer"}},
                             "flips": {"type": "array", "items": {"type": "integer"}}},
        "block_rotation": {"angles": _SEQ},
        "embedded_finite": {"matrix": {"type": "array", "items": {"type": "array", "items": _NUM}}},
        "householder": {"axis": {"type": "integer", "minimum": 1}, "vector": _SEQ},
        "composition": {"factors": {"type": "array", "items": ref, "minItems": 1}},
    }
    required = {"permutation_sign": ["perm"], "block_rotation": ["angles"],
                "embedded_finite": ["matrix"], "householder": ["axis", "vector"],
                "composition": ["factors"]}
    return {"oneOf": [
        {"type": "object", "additionalProperties": False,
         "required": ["kind", *required.get(k, [])],
         "properties": {"kind": {"const": k}, **props}}
        for k, props in kinds.items()
    ]}


_OP = {"$ref": "#/$defs/operator"}
_COMMON = {"command": {"type": "string"}, "tol": {"type": "number", "exclusiveMinimum": 0},
           "n_cap": {"type": "integer", "minimum": 1}, "seed": {"type": "integer"}}
_BASIS_REF = {"type": "object", "additionalProperties": False, "required": ["basis", "rectangle"],
              "properties": {"basis": {"type": "integer", "minimum": 0}, "rectangle": _RECT}}


def _cmd(props: dict, required=(), **extra) -> dict:
    return {"type": "object", "additionalProperties": False, "required": list(required),
            "properties": {**_COMMON, **props}, **extra}


SCHEMAS = {
    "measure": _cmd({"rectangle": _RECT}, ["rectangle"]),
    "classify": _cmd({"operator": _OP, "flow": _FLOW, "t": _NUM},
                     oneOf=[{"required": ["operator"]}, {"required": ["flow", "t"]}]),
    "det-trace": _cmd({"operator": _OP, "truncations": _INT_LIST,
                       "eps": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                          "exclusiveMaximum": 0.5}}},
                      ["operator"]),
    "sandwich": _cmd({"operator": _OP, "rectangle": _RECT}, ["operator", "rectangle"]),
    "overlap": _cmd({"flow": _FLOW, "rectangle": _RECT,
                     "ts": {"type": "array", "items": _NUM, "minItems": 1},
                     "t_grid": {"type": "object", "additionalProperties": False,
                                "required": ["start", "stop", "num"],
                                "properties": {"start": _NUM, "stop": _NUM,
                                               "num": {"type": "integer", "minimum": 1}}}},
                    ["flow"], oneOf=[{"required": ["ts"]}, {"required": ["t_grid"]}]),
    "decompose": _cmd({"bases": {"type": "array", "items": _OP, "minItems": 1},
                       "elements": {"type": "array", "items": {
                           "type": "object", "additionalProperties": False, "required": ["base"],
                           "properties": {"base": _BASIS_REF,
                                          "subtracted": {"type": "array", "items": _BASIS_REF}}}},
                       "random_elements": {"type": "integer", "minimum": 0}},
                      ["bases"]),
    "demo-remark73": _cmd({"flow": _FLOW, "conjugator": _OP,
                           "ts": {"type": "array", "items": _NUM, "minItems": 1}}),
}
for _s in SCHEMAS.values():
    _s["$defs"] = {"operator": _op_schema()}

RESULT_SCHEMA = {
    "type": "object", "required": ["command", "status", "result"],
    "properties": {"command": {"enum": sorted(SCHEMAS)},
                   "status": {"enum": ["ok", "cap_reached"]},
                   "partial": {"type": "boolean"},
                   "result": {"type": "object"}},
}

# frozen CSV column contracts
CSV_COLUMNS = {
    "measure": ["status", "value", "error"],
    "classify": ["classification", "sum_l_minus_1", "sum_error", "offdiag_sum", "case_tag", "m0"],
    "det-trace": ["n", "det", "gram_det", "gram_trace"],
    "sandwich": ["n", "lower", "upper", "gap"],
    "overlap": ["t", "value", "error", "verdict"],
    "decompose": ["class_id", "value", "error"],
    "demo-remark73": ["t", "basis", "classification"],
}


class SchemaError(Exception):
    pass


def validate_config(command: str, cfg: dict) -> None:
    if command not in SCHEMAS:
        raise SchemaError(f"unknown command {command!r}")
    if not isinstance(cfg, dict):
        raise SchemaError("config must be a JSON object")
    if cfg.get("command", command) != command:
        raise SchemaError(f"$.command: config is for {cfg['command']!r}, not {command!r}")
    err = jsonschema.exceptions.best_match(
        jsonschema.Draft202012Validator(SCHEMAS[command]).iter_errors(cfg))
    if err is not None:
        raise SchemaError(f"{err.json_path}: {err.message}")


# ---------------------------------------------------------------------------
# commands


def _seq(obj) -> TailDescriptor:
    return TailDescriptor.from_json(obj)


def _rect(obj) -> MeasurableRectangle:
    return MeasurableRectangle.from_json(obj)


def _cv_row(cv) -> tuple:
    return cv.status.value, cv.value, cv.error_bound


def _run_measure(cfg, tol, n_cap, seed):
    from .rectangle import measure
    cv = measure(_rect(cfg["rectangle"]), tol)
    return {"measure": cv.to_json()}, [dict(zip(CSV_COLUMNS["measure"], _cv_row(cv)))], \
        f"measure = {cv.value} (+/- {cv.error_bound}, {cv.status.value})", False


def _operator_of(cfg):
    if "operator" in cfg:
        return op.from_json(cfg["operator"])
    return lambda_t(RotationFlow.from_json(cfg["flow"]), float(cfg["t"]))


def _run_classify(cfg, tol, n_cap, seed):
    rep = classify(_operator_of(cfg), tol)
    s = rep.sum_l_minus_1
    row = {"classification": rep.classification.value,
           "sum_l_minus_1": s.value if s is not None and s.is_converged else (s.status.value if s else ""),
           "sum_error": s.error_bound if s is not None and s.is_converged else "",
           "offdiag_sum": rep.offdiag_sum.value if rep.offdiag_sum is not None
           and rep.offdiag_sum.is_converged else "",
           "case_tag": rep.case_tag.value if rep.case_tag else "",
           "m0": "" if rep.m0 is None else rep.m0}
    summary = rep.classification.value
    if rep.witness:
        summary += f" (witness: {rep.witness})"
    elif rep.reason:
        summary += f" ({rep.reason})"
    return rep.to_json(), [row], summary, False


def _run_det_trace(cfg, tol, n_cap, seed):
    U = op.from_json(cfg["operator"])
    grid = [n for n in cfg.get("truncations", DEFAULT_GRID) if n <= n_cap]
    if not grid:
        raise InputError("every truncation exceeds the cap")
    trace = det_sequence(U, grid, tol)
    out = trace.to_json()
    capped = False
    n_eps = {}
    for eps in cfg.get("eps", []):
        try:
            n_eps[str(eps)] = find_N_epsilon(U, eps, n_cap)
        except CapReached as e:
            n_eps[str(eps)] = None
            out.setdefault("cap_diagnostics", {})[str(eps)] = e.diagnostics
            capped = True
    if n_eps:
        out["N_eps"] = n_eps
    summary = f"det at n={trace.truncations[-1]}: {trace.det_values[-1]:.15g}; {trace.verdict}"
    if n_eps:
        summary += "; N_eps " + ", ".join(f"{k}: {v}" for k, v in n_eps.items())
    return out, trace.rows(), summary, capped


def _run_sandwich(cfg, tol, n_cap, seed):
    res = sandwich(op.from_json(cfg["operator"]), _rect(cfg["rectangle"]), tol, n_cap)
    rows = [{"n": n, "lower": lo, "upper": hi, "gap": hi - lo} for n, lo, hi in res.trace]
    summary = (f"measure in [{res.lower:.12g}, {res.upper:.12g}] at n={res.n_final}, "
               f"gap {res.gap:.3g}" + (" (cap reached)" if res.capped else ""))
    return res.to_json(), rows, summary, res.capped


def _run_overlap(cfg, tol, n_cap, seed):
    from .rectangle import unit_cube
    flow = RotationFlow.from_json(cfg["flow"])
    rect = _rect(cfg["rectangle"]) if "rectangle" in cfg else unit_cube()
    if "ts" in cfg:
        ts = cfg["ts"]
    else:
        g = cfg["t_grid"]
        ts = np.linspace(g["start"], g["stop"], g["num"]).tolist()
    curve = overlap_curve(flow, rect, ts, min(tol, 1e-10))
    summary = f"{curve.verdict.value}; O({ts[0]:g}) = {curve.values[0].value}"
    return curve.to_json(), curve.rows(), summary, False


def _random_elements(bases_count, count, seed):
    rng = np.random.default_rng(seed)
    elems = []
    for _ in range(count):
        b = int(rng.integers(bases_count))
        d = rng.uniform(0.2, 1.0, size=3)
        base = {"basis": b, "rectangle": {"lengths": {"head": d.tolist(),
                                                      "tail": {"kind": "constant", "c": 1.0}}}}
        subs = []
        for _ in range(int(rng.integers(0, 3))):
            sb = b if rng.random() < 0.5 else int(rng.integers(bases_count))
            sd = rng.uniform(0.1, 1.0, size=3)
            sc = rng.uniform(-0.3, 0.3, size=3)
            subs.append({"basis": sb, "rectangle": {
                "lengths": {"head": sd.tolist(), "tail": {"kind": "constant", "c": 1.0}},
                "centers": {"head": sc.tolist()}}})
        elems.append({"base": base, "subtracted": subs})
    return elems


def _run_decompose(cfg, tol, n_cap, seed):
    reg = Registry()
    labels = [reg.register_basis(op.from_json(b)) for b in cfg["bases"]]
    raw = list(cfg.get("elements", []))
    if cfg.get("random_elements"):
        raw += _random_elements(len(labels), cfg["random_elements"], seed)

    def piece(obj):
        if obj["basis"] >= len(labels):
            raise InputError(f"basis index {obj['basis']} out of range")
        return Piece(labels[obj["basis"]], _rect(obj["rectangle"]))

    elems = [RingElement(piece(e["base"]), tuple(piece(p) for p in e.get("subtracted", [])))
             for e in raw]
    parts = decompose(elems, tol)
    total = [glued_measure(e, tol).value for e in elems]
    rows = [{"class_id": cid, "value": cv.value, "error": cv.error_bound}
            for cid, cv in parts.items()]
    out = {"registry": reg.to_json(),
           "basis_classes": [lab.class_id for lab in labels],
           "components": {str(cid): cv.to_json() for cid, cv in parts.items()},
           "element_measures": total}
    summary = (f"{len(reg.classes)} classes; components "
               + ", ".join(f"{cid}: {cv.value:.12g}" for cid, cv in parts.items()))
    return out, rows, summary, False


def _run_demo(cfg, tol, n_cap, seed):
    flow = RotationFlow.from_json(cfg.get("flow", {"rates": {"head": [0.7]}}))
    V = op.from_json(cfg["conjugator"]) if "conjugator" in cfg else \
        op.HouseholderFromVector(2, op.harmonic_unit_vector())
    rows, samples = [], []
    for t in cfg.get("ts", [0.0, 0.5, 1.0]):
        e = classify(lambda_t(flow, t), tol, with_m0=False)
        f = conjugated_flow_classify(flow, V, t, tol)
        rows += [{"t": t, "basis": "E", "classification": e.classification.value},
                 {"t": t, "basis": "F", "classification": f.classification.value}]
        samples.append({"t": t, "E": e.to_json(), "F": f.to_json()})
    summary = "; ".join(f"t={r['t']:g} {r['basis']}: {r['classification']}" for r in rows)
    return {"conjugator": op.to_json(V), "flow": flow.to_json(), "samples": samples}, rows, \
        summary, False


RUNNERS = {"measure": _run_measure, "classify": _run_classify, "det-trace": _run_det_trace,
           "sandwich": _run_sandwich, "overlap": _run_overlap, "decompose": _run_decompose,
           "demo-remark73": _run_demo}


# ---------------------------------------------------------------------------
# output


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(command: str, rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS[command], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def run(command: str, cfg: dict, out_dir: str | None = None, tol: float | None = None,
        n_cap: int | None = None, seed: int | None = None, stream=None) -> int:
    """Execute one command; returns the process exit code."""
    stream = stream or sys.stdout
    try:
        validate_config(command, cfg)
    except SchemaError as e:
        print(f"config error at {e}", file=sys.stderr)
        return EXIT_SCHEMA
    tol = tol if tol is not None else cfg.get("tol", 1e-6 if command == "sandwich" else 1e-10)
    n_cap = n_cap if n_cap is not None else cfg.get("n_cap", 256 if command == "sandwich" else 4096)
    seed = seed if seed is not None else cfg.get("seed", 0)
    try:
        result, rows, summary, capped = RUNNERS[command](cfg, tol, n_cap, seed)
    except CapReached as e:
        print(f"cap reached: {e}", file=sys.stderr)
        return EXIT_CAP
    except (UnsupportedInput, PreconditionError) as e:
        print(f"unsupported input: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except InputError as e:
        print(f"config error at $: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    payload = {"command": command, "status": "cap_reached" if capped else "ok",
               "partial": capped, "result": result}
    jsonschema.validate(payload, RESULT_SCHEMA)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = command.replace("-", "_")
        _atomic_write(out / f"{stem}.csv", _csv_text(command, rows))
        _atomic_write(out / f"{stem}.json", json.dumps(payload, indent=2, sort_keys=True) + "\n")
        _atomic_write(out / f"{stem}_summary.txt", summary + "\n")
    print(summary, file=stream)
    return EXIT_CAP if capped else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hilbertbox",
                                     description="Certified box measures in l2.")
    parser.add_argument("command", choices=sorted(RUNNERS))
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", help="directory for CSV/JSON artifacts")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--n-cap", type=int, dest="n_cap")
    parser.add_argument("--seed", type=int)
    args = parser.parse_args(argv)
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error at $: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    return run(args.command, cfg, args.out, args.tol, args.n_cap, args.seed)


if __name__ == "__main__":
    sys.exit(main())
