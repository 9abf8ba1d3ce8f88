"""CSV field files with a one-line JSON header.

Layout: line 1 is ``#META {json}``, line 2 the CSV column names, then one
row per grid point with the first axis outermost.  Coordinates are written
next to the values so any plotting tool can consume the file directly,
but the header alone determines the geometry and the reader checks the
row count against it.  Floats are written in repr's shortest round-trip
form, so finite doubles survive write/read bit-exactly; JSON arrays in
the metadata come back as tuples.
"""

from __future__ import annotations

import json

import numpy as np

from .fields import (
    CharacteristicGrid,
    DensityMatrixGrid,
    MarginalField,
    MarginalSlice,
    ReconstructionConfig,
    TomographyParams,
    WignerField,
)

SCHEMA_VERSION = 1

FIELD_KINDS = {
    WignerField: "wigner",
    MarginalSlice: "marginal_slice",
    MarginalField: "marginal_field",
    DensityMatrixGrid: "density_matrix",
    CharacteristicGrid: "characteristic",
}

_META_PREFIX = "#META "


def _axes(field):
    """(column name, grid) pairs in row-major output order."""
    if isinstance(field, WignerField):
        return [("q", field.q_grid), ("p", field.p_grid)]
    if isinstance(field, MarginalSlice):
        return [("x", field.x_grid)]
    if isinstance(field, MarginalField):
        return [("mu", field.mu_grid), ("nu", field.nu_grid),
                ("x", field.x_grid)]
    if isinstance(field, DensityMatrixGrid):
        # square geometry; rows index q, columns its conjugate argument
        return [("q", field.q_grid), ("q_conj", field.q_grid)]
    if isinstance(field, CharacteristicGrid):
        return [("a", field.a_grid), ("b", field.b_grid)]
    raise TypeError(f"cannot serialize {type(field).__name__}")


def _tuplify(obj):
    if isinstance(obj, list):
        return tuple(_tuplify(v) for v in obj)
    if isinstance(obj, dict):
        return {k: _tuplify(v) for k, v in obj.items()}
    return obj


def _jsonable(obj):
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def write_field(field, path, meta: dict | None = None) -> None:
    """Persist a field; ``meta`` is merged over the field's own metadata."""
    kind = FIELD_KINDS.get(type(field))
    if kind is None:
        raise TypeError(f"cannot serialize {type(field).__name__}")
    axes = _axes(field)
    values = np.asarray(field.values)
    if values.shape != tuple(g.size for _, g in axes):
        raise ValueError(f"values shape {values.shape} does not match grids")
    if not np.all(np.isfinite(values)):
        raise ValueError("field contains non-finite values")
    is_complex = bool(np.iscomplexobj(values))

    merged = dict(getattr(field, "meta", {}) or {})
    merged.update(meta or {})
    header = {
        "schema_version": SCHEMA_VERSION,
        "field_kind": kind,
        "axes": [name for name, _ in axes],
        "grids": {name: [float(v) for v in grid] for name, grid in axes},
        "complex": is_complex,
        "warnings": list(field.warnings),
        "meta": _jsonable(merged),
    }
    if isinstance(field, MarginalSlice):
        p = field.params
        header["params"] = {"mu": p.mu, "nu": p.nu, "delta": p.delta}
    if isinstance(field, DensityMatrixGrid):
        c = field.config
        header["reconstruction"] = {
            "s": c.s, "mu_range": list(c.mu_range), "mu_samples": c.mu_samples,
            "y_range": list(c.y_range), "y_samples": c.y_samples,
        }

    names = [n for n, _ in axes]
    names += ["re_value", "im_value"] if is_complex else ["value"]
    mesh = np.meshgrid(*[g for _, g in axes], indexing="ij")
    cols = [m.ravel() for m in mesh]
    if is_complex:
        cols += [values.real.ravel(), values.imag.ravel()]
    else:
        cols += [values.ravel()]
    with open(path, "w") as fh:
        fh.write(_META_PREFIX + json.dumps(header, sort_keys=True) + "\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _scan_body(path, n_cols: int) -> None:
    """Locate the first malformed data row and raise with its line number."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno <= 2:
                continue
            parts = line.rstrip("\n").split(",")
            if len(parts) != n_cols:
                raise ValueError(
                    f"{path}: line {lineno}: expected {n_cols} "
                    f"comma-separated fields, found {len(parts)}")
            for part in parts:
                try:
                    float(part)
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: "
                                     f"non-numeric field {part!r}") from None


def read_field(path):
    """Load a field written by write_field; inverse for finite values."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith(_META_PREFIX):
            raise ValueError(f"{path}: missing {_META_PREFIX.strip()} header")
        try:
            header = json.loads(first[len(_META_PREFIX):])
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: line 1: malformed {_META_PREFIX.strip()}"
                             f" header ({exc})") from None
        version = header.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported schema_version {version!r}"
                             f" (this reader handles {SCHEMA_VERSION})")
        kind = header.get("field_kind")
        if kind not in FIELD_KINDS.values():
            raise ValueError(f"{path}: unknown field_kind {kind!r}")
        axis_names = header.get("axes", list(header["grids"]))
        grids = {name: np.asarray(header["grids"][name], dtype=float)
                 for name in axis_names}
        is_complex = bool(header.get("complex"))
        names = fh.readline().rstrip("\n").split(",")
        expected = axis_names + (["re_value", "im_value"] if is_complex
                                 else ["value"])
        if names != expected:
            raise ValueError(f"{path}: column header {names} does not match "
                             f"geometry {expected}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError:
            _scan_body(path, len(expected))
            raise

    shape = tuple(g.size for g in grids.values())
    n_rows = int(np.prod(shape))
    if data.shape[0] != n_rows:
        raise ValueError(f"{path}: {data.shape[0]} data rows, header "
                         f"geometry needs {n_rows}")
    if data.shape[1] != len(expected):
        raise ValueError(f"{path}: {data.shape[1]} columns, expected "
                         f"{len(expected)}")
    if is_complex:
        values = (data[:, -2] + 1j * data[:, -1]).reshape(shape)
    else:
        values = data[:, -1].reshape(shape)
    warnings = tuple(header.get("warnings", ()))
    meta = _tuplify(header.get("meta", {}))

    if kind == "wigner":
        return WignerField(grids["q"], grids["p"], values, warnings, meta)
    if kind == "marginal_slice":
        p = header.get("params", {})
        params = TomographyParams(float(p.get("mu", 1.0)),
                                  float(p.get("nu", 0.0)),
                                  float(p.get("delta", 0.0)))
        return MarginalSlice(params, grids["x"], values, warnings)
    if kind == "marginal_field":
        return MarginalField(grids["mu"], grids["nu"], grids["x"], values,
                             warnings, meta)
    if kind == "density_matrix":
        r = header.get("reconstruction", {})
        config = ReconstructionConfig(
            s=float(r.get("s", 1.0)),
            mu_range=tuple(r.get("mu_range", (-8.0, 8.0))),
            mu_samples=int(r.get("mu_samples", 801)),
            y_range=tuple(r.get("y_range", (-20.0, 20.0))),
            y_samples=int(r.get("y_samples", 512)))
        return DensityMatrixGrid(grids["q"], values, config, warnings)
    return CharacteristicGrid(grids["a"], grids["b"], values, warnings)
