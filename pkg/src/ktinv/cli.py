"""Command line front end: ``ktinv <verb> [flags]``.

Every verb builds a job (verb, inputs, params), validates all inputs
against the bundled JSON schema before computing anything, and prints a
report record.  Records are deterministic: keys are sorted and wall time is
only included with ``--timing``.

Exit codes: 0 ok, 1 error, 2 undecided.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import orderext as ox
from . import realize as rz
from . import unitary as un
from .dimgrp import InductiveSystem, default_system
from .zmod import (
    FGAbelianGroup,
    GroupHom,
    IntMatrix,
    QMatrix,
    _ext_slots,
    ext_class,
    ext_group,
    hom_coordinates,
    hom_group,
    smith_decomposition,
)

EXIT_OK, EXIT_ERROR, EXIT_UNDECIDED = 0, 1, 2

# verb -> ((input name, schema definition), ...)
VERBS = {
    "snf": (("matrix", "intmatrix"),),
    "ext": (("g1", "group"), ("g0", "group")),
    "hom": (("source", "group"), ("target", "group")),
    "oext-sum": (("x", "orderextension"), ("y", "orderextension")),
    "oext-inverse": (("x", "orderextension"),),
    "oext-trivial": (("x", "orderextension"),),
    "oext-iso": (("x", "orderextension"), ("y", "orderextension")),
    "solve-cocycle": (("psi", "cocycle"),),
    "assemble": (("psi", "cocycle"),),
    "bott": (("input", "bott_input"),),
    "rotation": (("path", "path"),),
    "winding-pair": (("blocks", "blocks"),),
    "realize": (("phi", "phi"),),
    "classify-rotation-algebra": (),
}


class InputError(Exception):
    """Unreadable, malformed or schema-invalid input."""


class Undecided(Exception):
    def __init__(self, message, result=None, diagnostics=None):
        super().__init__(message)
        self.result, self.diagnostics = result, diagnostics or {}


# ---------------------------------------------------------------------------
# loading and validation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def schema():
    text = resources.files("ktinv").joinpath("schema.json").read_text()
    return json.loads(text)


def validate(doc, definition, name="input"):
    sch = {"$ref": f"#/$defs/{definition}", "$defs": schema()["$defs"]}
    validator = jsonschema.Draft202012Validator(sch)
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise InputError(f"{name}: schema violation at {where}: {err.message}")
    return doc


def parse_json_text(text, name):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{name}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_ref(ref, base=Path(".")):
    """A file path, inline JSON text, or an already parsed document."""
    if isinstance(ref, (dict, list)):
        return ref
    text = ref.lstrip()
    if text.startswith("{") or text.startswith("["):
        return parse_json_text(ref, "<inline>")
    path = Path(ref)
    if not path.is_absolute():
        path = base / path
    try:
        content = path.read_text()
    except OSError as exc:
        raise InputError(f"{ref}: {exc.strerror or exc}") from None
    return parse_json_text(content, str(ref))


def digest(obj):
    blob = json.dumps(plain(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def plain(obj):
    """Convert results into JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, IntMatrix):
        return obj.to_json()
    return obj


def dumps(record):
    return json.dumps(plain(record), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# parameter helpers
# ---------------------------------------------------------------------------

def _int_param(v):
    if isinstance(v, int):
        return v
    s = str(v).strip()
    if "^" in s:
        b, e = s.split("^")
        return int(b) ** int(e)
    f = Fraction(s)
    if f.denominator != 1:
        raise InputError(f"expected an integer, got {v!r}")
    return int(f)


def _frac_param(v):
    try:
        return Fraction(str(v))
    except ValueError:
        raise InputError(f"expected a number, got {v!r}") from None


def _cmatrix(doc):
    a = np.asarray(doc, dtype=float)
    if a.ndim != 3 or a.shape[-1] != 2:
        raise InputError("complex matrices are arrays of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def _unit_vector(k, n):
    return tuple(int(i == k) for i in range(n))


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def _snf(d, p):
    A = IntMatrix.from_json(d["matrix"])
    sf = smith_decomposition(A)
    diag = list(sf.diagonal)
    return ({"S": sf.S, "U": sf.left_inv, "V": sf.right_inv, "invariant_factors": diag},
            {"reconstruction_ok": sf.left @ A @ sf.right == sf.S
             and sf.left_inv @ sf.S @ sf.right_inv == A,
             "divisibility_ok": all(b % a == 0 for a, b in zip(diag, diag[1:]))})


def _group_summary(G):
    torsion, free = G.invariants
    return {"torsion": list(torsion), "free_rank": free}


def _ext(d, p):
    G1, G0 = FGAbelianGroup.from_json(d["g1"]), FGAbelianGroup.from_json(d["g0"])
    eg = ext_group(G1, G0)
    n = len(eg.slots)
    classes = [ext_class(rep) for rep in eg.representatives]
    return ({**_group_summary(eg.group), "slots": eg.slots,
             "representatives": [r.to_json() for r in eg.representatives]},
            {"representatives_exact": all(r.is_exact() for r in eg.representatives),
             "classes_ok": all(c == _unit_vector(k, n) for k, c in enumerate(classes))})


def _hom(d, p):
    G, H = FGAbelianGroup.from_json(d["source"]), FGAbelianGroup.from_json(d["target"])
    hg = hom_group(G, H)
    n = len(hg.slots)
    ok = True
    for f in hg.basis:
        try:
            GroupHom(G, H, f.matrix)
        except ValueError:
            ok = False
    coords = [hom_coordinates(hg, f) for f in hg.basis]
    return ({**_group_summary(hg.group), "slots": hg.slots,
             "basis": [f.matrix for f in hg.basis]},
            {"basis_well_defined": ok,
             "coordinates_ok": all(c == _unit_vector(k, n) for k, c in enumerate(coords))})


def _ext_slot_orders(G1, G0):
    return [g for *_, g in _ext_slots(G1, G0)]


def _oext_diag(z, expected):
    cls = ext_class(z.ext)
    return {"exact": z.ext.is_exact(), "ext_class": cls, "expected_class": expected,
            "class_ok": tuple(cls) == tuple(expected)}


def _oext_sum(d, p):
    x = ox.OrderExtension.from_json(d["x"])
    y = ox.OrderExtension.from_json(d["y"])
    if x.ambient != y.ambient:
        raise ValueError("orderextensions live over different ambients")
    s = ox.baer_sum(x, y)
    orders = _ext_slot_orders(x.ambient.g1, x.ambient.g0)
    expected = tuple((a + b) % g for a, b, g in zip(ext_class(x.ext), ext_class(y.ext), orders))
    return s.to_json(), _oext_diag(s, expected)


def _oext_inverse(d, p):
    x = ox.OrderExtension.from_json(d["x"])
    z = ox.oext_inverse(x)
    orders = _ext_slot_orders(x.ambient.g1, x.ambient.g0)
    expected = tuple((-a) % g for a, g in zip(ext_class(x.ext), orders))
    return z.to_json(), _oext_diag(z, expected)


def _triviality(rep):
    return {"trivial": rep.trivial, "splits": rep.splits, "range_matches": rep.range_matches,
            "kernel_splits": rep.kernel_splits, "ext_class": rep.ext_class,
            "section": rep.section}


def _oext_trivial(d, p):
    x = ox.OrderExtension.from_json(d["x"])
    rep = ox.oext_is_trivial(x)
    return _triviality(rep), {"notes": list(rep.notes), "exact": x.ext.is_exact()}


def _oext_iso(d, p):
    x = ox.OrderExtension.from_json(d["x"])
    y = ox.OrderExtension.from_json(d["y"])
    res = ox.oext_is_isomorphic(x, y)
    verified = res.certificate is not None and ox._verify_iso(x, y, res.certificate)
    return ({"isomorphic": res.isomorphic, "certificate": res.certificate},
            {"reason": res.reason, "certificate_verified": verified})


def _solve_cocycle(d, p):
    psi = ox.CocycleSequence.from_json(d["psi"])
    depth = int(p.get("depth", len(psi.psi) + 1))
    try:
        h = ox.solve_cocycle(psi, depth)
    except ox.NotFoundAtDepth as exc:
        raise Undecided(f"no cochain at depth {depth}", {"found": False, "depth": depth},
                        {"message": str(exc)}) from None
    return ({"found": True, "depth": depth, "cochain": h.to_json()},
            {"residual_indices": psi.residual(h, upto=depth - 1)})


def _assemble(d, p):
    psi = ox.CocycleSequence.from_json(d["psi"])
    depth = int(p.get("depth", len(psi.psi) + 1))
    oe = ox.assemble_stage_extension(psi, depth)
    rep = ox.oext_is_trivial(oe)
    iso = ox.oext_is_isomorphic(oe, ox.trivial_orderextension(oe.ambient))
    return ({"depth": depth, "extension": oe.to_json(), "triviality": _triviality(rep),
             "isomorphic_to_trivial": iso.isomorphic},
            {"exact": oe.ext.is_exact(), "kernel_defect": psi.kernel_defect(),
             "notes": list(rep.notes), "iso_reason": iso.reason})


def _bott(d, p):
    doc = d["input"]
    gap = float(p.get("gap", 0.1))
    if "blocks" in doc:
        grid = int(p.get("grid", 2048))
        w, z = un.make_winding_pair(doc["blocks"], grid)
        r = un.bott_loop(w, z, gap)
        values = sorted(set(int(v) for v in r.rounded))
        return ({"rounded": values[0] if len(values) == 1 else values,
                 "constant": len(values) == 1,
                 "expected": sum(b["N"] for b in doc["blocks"])},
                {"max_residual": r.max_residual, "min_gap": r.min_gap, "samples": grid})
    u, v = _cmatrix(doc["u"]), _cmatrix(doc["v"])
    r = un.bott(u, v, gap)
    return {"raw": r.raw, "rounded": r.rounded}, {"residual": r.residual, "min_gap": r.min_gap}


def _rotation(d, p):
    doc = d["path"]
    grid = int(p.get("grid", 4096))
    tol = float(p.get("tol", 1e-10))
    reference = None
    if "frames" in doc:
        path = un.UnitaryPath(_cmatrix(doc["frames"]), doc.get("base_dim"), tol=tol)
    elif "projection" in doc:
        P = _cmatrix(doc["projection"])
        path = un.projection_loop(P, grid)
        reference = float(np.trace(P).real) / P.shape[0]
    else:
        H = _cmatrix(doc["exp"])
        path = un.exp_path(H, grid)
        reference = float(np.trace(H).real) / H.shape[0]
    rep = un.rotation_report(path)
    diag = {"max_step_angle": rep.max_step_angle, "step_bound": rep.step_bound,
            "frames": len(path.frames)}
    if reference is not None:
        diag["reference"] = reference
        diag["deviation"] = abs(rep.value - reference)
    return {"value": rep.value}, diag


def _winding_pair(d, p):
    blocks = d["blocks"]["blocks"]
    grid = int(p.get("grid", 2048))
    gap = float(p.get("gap", 0.1))
    eps = float(p["tol"]) if "tol" in p else None
    w, z = un.make_winding_pair(blocks, grid)
    r = un.bott_loop(w, z, gap)
    nc = un.winding_norm_check(blocks, grid, eps)
    values = sorted(set(int(v) for v in r.rounded))
    return ({"bott": values[0] if len(values) == 1 else values,
             "expected": sum(b["N"] for b in blocks),
             "norm_check": {"lhs": nc.lhs, "rhs": nc.rhs, "passed": nc.passed},
             "dimension": int(w.shape[0])},
            {"max_residual": r.max_residual, "min_gap": r.min_gap, "samples": grid})


def phi_from_json(doc) -> "rz.PhiSpec":
    sysdoc = doc["system"]
    system = default_system(sysdoc["default"]) if "default" in sysdoc \
        else InductiveSystem.from_json(sysdoc)
    precision = Fraction(str(doc.get("precision", "0")))
    vals = doc["values"]
    if "constant" in vals:
        c = vals["constant"]
        if c["value"].strip().lower() == "golden":
            m = rz.RotationAlgebraModel.golden(digits=120)
            return rz.PhiSpec.constant(system, c["generator"], m.theta,
                                       max(precision, m.theta_error))
        return rz.PhiSpec.constant(system, c["generator"], Fraction(c["value"]), precision)
    if "map" in vals:
        return rz.PhiSpec.from_map(system, IntMatrix.from_json(vals["map"]), vals.get("stage", 1))
    return rz.PhiSpec(system, QMatrix.from_json(vals), precision)


def _realize(d, p):
    phi = phi_from_json(d["phi"])
    depth = int(p.get("depth", 5))
    try:
        cert = rz.realize_phi(phi, depth)
    except rz.DepthExhausted as exc:
        raise Undecided(str(exc), {"found": False, "depth": depth},
                        {"round": exc.round_index, "stage": exc.stage,
                         "achieved_slack": exc.slack}) from None
    tele = []
    for n in range(1, depth):
        t = rz.telescoping_check(cert, phi, n)
        tele.append({"stage": n, "gap": t.gap, "bound": t.bound, "residual": t.residual,
                     "passed": t.passed})
    rep = cert.bounds_report
    slacks = {k: rep[k] for k in ("approximation", "coordinate", "growth", "psi")}
    return ({"found": True, "depth": depth, "stages": cert.stages,
             "h": [m for m in cert.h.h], "psi": [m for m in cert.psi.psi]},
            {"slacks": slacks,
             "min_slack": {k: (float(min(v)) if v else None) for k, v in slacks.items()},
             "certificate_ok": rep["ok"], "telescoping": tele,
             "precision": phi.precision})


def _classify(d, p):
    qmax = _int_param(p.get("qmax", 10 ** 6))
    tol = _frac_param(p.get("tol", "1e-9"))
    theta = str(p.get("theta", "golden"))
    model = rz.RotationAlgebraModel.from_string(theta, qmax, tol)
    spec = str(p.get("phi", "random"))
    if spec.strip() == "random":
        rnd = random.Random(int(p.get("seed", 0)))
        phi = tuple(Fraction(rnd.randrange(10 ** 30), 10 ** 30) for _ in range(2))
    else:
        parts = spec.split(",")
        if len(parts) != 2:
            raise InputError("--phi takes two comma separated values")
        try:
            phi = tuple(rz.parse_real(s, model) for s in parts)
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"cannot parse --phi: {exc}") from None
    v = rz.classify_rotation_algebra(model, phi)
    result = {"verdict": v.verdict, "phi": phi, "witnesses": v.witnesses,
              "representative": v.representative}
    diag = {"distances": [float(x) for x in v.distances], "distances_exact": v.distances,
            "tol": tol, "qmax": qmax, "theta": model.label,
            "precision_margin": v.precision_margin}
    if v.verdict == "Undecided":
        raise Undecided("distance inside the undecided band", result, diag)
    return result, diag


HANDLERS = {
    "snf": _snf, "ext": _ext, "hom": _hom, "oext-sum": _oext_sum,
    "oext-inverse": _oext_inverse, "oext-trivial": _oext_trivial, "oext-iso": _oext_iso,
    "solve-cocycle": _solve_cocycle, "assemble": _assemble, "bott": _bott,
    "rotation": _rotation, "winding-pair": _winding_pair, "realize": _realize,
    "classify-rotation-algebra": _classify,
}


# ---------------------------------------------------------------------------
# jobs
# ---------------------------------------------------------------------------

def run(job, base=Path("."), timing=False):
    """Run one job and return ``(record, exit_code)``.  Never raises."""
    start = time.perf_counter()
    verb = job.get("verb") if isinstance(job, dict) else None
    record = {"verb": verb, "params": {}, "inputs_digest": None}
    try:
        validate(job, "job", "job")
        params = dict(job.get("params", {}))
        record["params"] = params
        given = job.get("inputs", {})
        names = dict(VERBS[verb])
        unknown = set(given) - set(names)
        if unknown:
            raise InputError(f"unknown inputs for {verb}: {sorted(unknown)}")
        docs = {}
        for name, definition in names.items():
            if name not in given:
                raise InputError(f"missing input {name!r} for {verb}")
            docs[name] = validate(load_ref(given[name], base), definition, name)
        record["inputs_digest"] = digest({"verb": verb, "inputs": docs})
        result, diagnostics = HANDLERS[verb](docs, params)
        record.update(status="ok", result=result, diagnostics=diagnostics)
        code = EXIT_OK
    except Undecided as exc:
        record.update(status="undecided", result=exc.result,
                      diagnostics={"reason": str(exc), **exc.diagnostics})
        code = EXIT_UNDECIDED
    except InputError as exc:
        record.update(status="error", error=str(exc), result=None, diagnostics={})
        code = EXIT_ERROR
    except Exception as exc:  # operation errors are reported verbatim
        record.update(status="error", error=f"{type(exc).__name__}: {exc}", result=None,
                      diagnostics={})
        code = EXIT_ERROR
    if timing:
        record["wall_time"] = time.perf_counter() - start
    return plain(record), code


def _run_indexed(args):
    index, job, base, timing = args
    record, code = run(job, Path(base), timing)
    record["index"] = index
    return record, code


def sweep(jobs, base=Path("."), timing=False, workers=1):
    """Run independent jobs; records come back ordered by job index."""
    tasks = [(k, job, str(base), timing) for k, job in enumerate(jobs)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_run_indexed, tasks))
    else:
        out = [_run_indexed(t) for t in tasks]
    records = [r for r, _ in out]
    for (rec, _), job in zip(out, jobs):
        dest = job.get("output") if isinstance(job, dict) else None
        if dest:
            p = Path(dest) if Path(dest).is_absolute() else Path(base) / dest
            p.write_text(dumps(rec))
    summary = {"ok": 0, "undecided": 0, "error": 0}
    verdicts = {}
    for r in records:
        summary[r["status"]] += 1
        res = r.get("result")
        if isinstance(res, dict) and "verdict" in res:
            verdicts[res["verdict"]] = verdicts.get(res["verdict"], 0) + 1
    if verdicts:
        summary["verdicts"] = verdicts
    return records, summary


def _sweep_record(jobs_ref, workers, timing):
    start = time.perf_counter()
    try:
        doc = validate(load_ref(jobs_ref), "jobs", "jobs")
    except InputError as exc:
        return {"verb": "sweep", "status": "error", "error": str(exc), "result": None,
                "diagnostics": {}}, EXIT_ERROR
    base = Path(jobs_ref).parent if isinstance(jobs_ref, str) and not \
        jobs_ref.lstrip().startswith(("{", "[")) else Path(".")
    records, summary = sweep(doc["jobs"], base, timing, workers)
    code = EXIT_ERROR if summary["error"] else EXIT_UNDECIDED if summary["undecided"] else EXIT_OK
    rec = {"verb": "sweep", "params": {}, "inputs_digest": digest(doc),
           "status": "ok" if code == EXIT_OK else ("error" if code == EXIT_ERROR else "undecided"),
           "result": {"records": records, "summary": summary},
           "diagnostics": {"jobs": len(records)}}
    if timing:
        rec["wall_time"] = time.perf_counter() - start
    return plain(rec), code


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

_PARAM_FLAGS = {
    "snf": (), "ext": (), "hom": (), "oext-sum": (), "oext-inverse": (), "oext-trivial": (),
    "oext-iso": (),
    "solve-cocycle": ("depth",), "assemble": ("depth",),
    "bott": ("grid", "gap"), "rotation": ("grid", "tol"),
    "winding-pair": ("grid", "gap", "tol"),
    "realize": ("depth",),
    "classify-rotation-algebra": ("theta", "phi", "qmax", "tol", "seed"),
}

_PARAM_TYPES = {"depth": int, "grid": int, "gap": float, "tol": str, "qmax": str,
                "seed": int, "theta": str, "phi": str}

_HELP = {
    "snf": "Smith normal form of an integer matrix",
    "ext": "Ext(G1, G0) of two finitely generated abelian groups",
    "hom": "Hom(G, H) of two finitely generated abelian groups",
    "oext-sum": "Baer sum of two orderextensions",
    "oext-inverse": "inverse of an orderextension",
    "oext-trivial": "triviality test for an orderextension",
    "oext-iso": "isomorphism test for two orderextensions",
    "solve-cocycle": "solve psi_n = chi h_n - h_{n+1} chi for a cochain",
    "assemble": "assemble the truncated extension glued by psi",
    "bott": "Bott element of a unitary pair or a winding fixture",
    "rotation": "rotation number of a unitary path",
    "winding-pair": "Bott values and norm check of a winding pair",
    "realize": "realize rotation data by stage maps",
    "classify-rotation-algebra": "decide membership in (Z + theta Z)^2",
}


def build_parser():
    ap = argparse.ArgumentParser(prog="ktinv", description="K-theory invariant calculator")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, inputs in VERBS.items():
        sp = sub.add_parser(verb, help=_HELP[verb])
        for name, _ in inputs:
            sp.add_argument(f"--{name}", required=True,
                            help="JSON file, or inline JSON text")
        for flag in _PARAM_FLAGS[verb]:
            sp.add_argument(f"--{flag}", type=_PARAM_TYPES[flag])
        sp.add_argument("--output", help="write the report here instead of stdout")
        sp.add_argument("--timing", action="store_true", help="include wall time")
    sp = sub.add_parser("sweep", help="run a list of jobs")
    sp.add_argument("--jobs", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--output")
    sp.add_argument("--timing", action="store_true")
    return ap


def job_from_args(ns):
    inputs = {name: getattr(ns, name) for name, _ in VERBS[ns.verb]}
    params = {}
    for flag in _PARAM_FLAGS[ns.verb]:
        v = getattr(ns, flag)
        if v is not None:
            params[flag] = v
    return {"verb": ns.verb, "inputs": inputs, "params": params}


def main(argv=None):
    ns = build_parser().parse_args(argv)
    if ns.verb == "sweep":
        record, code = _sweep_record(ns.jobs, ns.workers, ns.timing)
    else:
        record, code = run(job_from_args(ns), timing=ns.timing)
    text = dumps(record)
    if ns.output:
        Path(ns.output).write_text(text)
    else:
        sys.stdout.write(text)
    if code == EXIT_ERROR:
        print(f"ktinv: {record.get('error', 'failed')}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
