"""JSON and CSV serialization of certificates and bound tables.

Reports are deterministic: keys are sorted, floats are written with
``repr`` precision, non-finite values become the strings ``"inf"``,
``"-inf"`` and ``"nan"``, and no timestamps are recorded.  Every numeric
leaf is wrapped as ``{"value": v, "provenance": {"formula": id,
"inputs_hash": h}}`` where ``h`` is the first 16 hex digits of the SHA-256
of the canonical run inputs.
"""
from __future__ import annotations

import csv
import enum
import hashlib
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"

# formula ids for certificate and rate-report fields
CERT_FORMULAS = {
    "p": "input.dimension",
    "eps_alpha": "input.cone_margin",
    "K": "input.cone_height",
    "R_alpha": "cone.radius",
    "box_mass": "cone.box_probability",
    "lambda_tilde": "drift.factor",
    "eps": "drift.epsilon",
    "delta": "drift.delta",
    "K_eps": "drift.tail_radius",
    "R_eps": "drift.radius",
    "R_eps_terms": "drift.radius_terms",
    "log_b": "drift.constant_b",
    "b": "drift.constant_b",
    "R_max": "minorization.small_set_radius",
    "small_set_radius": "minorization.small_set_radius",
    "log_eta_tilde": "minorization.constant",
    "eta_tilde": "minorization.constant",
    "p_star": "target.density_at_mode",
    "M_star": "target.certificate_radius",
}
RATE_FORMULAS = {
    "upper_t_R": "upper.rosenthal_optimized",
    "log_upper_t_R": "upper.rosenthal_optimized",
    "r_star": "upper.rosenthal_optimized",
    "A": "upper.rosenthal_constant_A",
    "log_A": "upper.rosenthal_constant_A",
    "alpha_tilde": "upper.rosenthal_constant_alpha",
    "log_alpha_tilde": "upper.rosenthal_constant_alpha",
    "M_coefficient": "upper.tv_prefactor",
    "log_M_coefficient": "upper.tv_prefactor",
}
LOWER_FORMULAS = {
    "acceptance": "lower.acceptance_infimum",
    "bounded_proposal": "lower.bounded_proposal",
    "mode": "lower.mode",
    "spectral_dirichlet": "lower.spectral_dirichlet",
    "spectral_conductance": "lower.spectral_conductance",
}


def to_plain(obj):
    """Recursively convert numpy scalars/arrays, enums and non-finite floats to JSON-safe data."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(to_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def inputs_hash(inputs) -> str:
    return hashlib.sha256(json.dumps(to_plain(inputs), sort_keys=True).encode("utf-8")).hexdigest()[:16]


def _is_number(v):
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, (bool, np.bool_))


def _is_numeric_list(v):
    return isinstance(v, (list, tuple)) and len(v) > 0 and all(
        _is_number(x) or _is_numeric_list(x) for x in v)


def annotate(obj, formula, h, formulas=None):
    """Wrap every numeric leaf of ``obj`` with its provenance.

    ``formulas`` maps a key to its formula id; keys not found inherit
    ``formula`` from the enclosing level.  A list of numbers is one leaf.
    """
    formulas = formulas or {}
    if _is_number(obj) or _is_numeric_list(obj):
        return {"value": obj, "provenance": {"formula": formula, "inputs_hash": h}}
    if isinstance(obj, dict):
        return {k: annotate(v, formulas.get(k, formula), h, formulas) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [annotate(v, formula, h, formulas) for v in obj]
    return obj


def lower_bound_entry(lb, h):
    d = lb.to_dict()
    f = LOWER_FORMULAS.get(lb.method, "lower." + lb.method)
    return {"method": d["method"], "vacuous": d["vacuous"],
            "value": annotate(d["value"], f, h), "metadata": annotate(d["metadata"], f, h)}


def certificate_json(cert, h):
    return annotate(cert.to_dict(), "certificate", h, CERT_FORMULAS)


def rate_json(report, h):
    d = report.to_dict()
    d.pop("lower_bounds")
    out = annotate(d, "rates", h, RATE_FORMULAS)
    out["lower_bounds"] = [lower_bound_entry(lb, h) for lb in report.lower_bounds]
    return out


def envelope(command, inputs, body):
    """Top-level report object shared by every subcommand."""
    return {"schema_version": SCHEMA_VERSION, "command": command, "inputs": to_plain(inputs),
            "inputs_hash": inputs_hash(inputs), **body}


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _cell(v):
    v = to_plain(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return v


def bounds_rows(cert, report):
    """``(quantity, value, vacuous, formula)`` rows for the bounds table."""
    rows = []
    cd = cert.to_dict()
    for k, f in CERT_FORMULAS.items():
        if k in cd and k != "R_eps_terms":
            rows.append((k, cd[k], "", f))
    rows.append(("certificate_vacuous", cert.vacuous, "", "minorization.constant"))
    rd = report.to_dict()
    for k, f in RATE_FORMULAS.items():
        vac = report.upper_vacuous if k in ("upper_t_R", "log_upper_t_R") else ""
        rows.append((k, rd[k], vac, f))
    for lb in report.lower_bounds:
        rows.append(("lower." + lb.method, lb.value, lb.vacuous, LOWER_FORMULAS.get(lb.method, "")))
    return rows


def lower_rows(lowers):
    """``(method, value, vacuous, metadata)`` rows for the lower-bound table."""
    return [(lb.method, lb.value, lb.vacuous, lb.metadata) for lb in lowers]
