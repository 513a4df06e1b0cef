"""Figure specifications and strict CSV loading.

A FigureSpec names one figure: which kind to draw, which CSV files feed
it, and where the image goes.  Input columns must match the producing
estimator's schema exactly; anything else is a hard error listing the
offending columns, because a renamed or missing column silently changes
what a figure means.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("theta_curve", "loglog_ladder", "telescope", "cutpoints")

# exact header, in order, expected from the producing CSV
SCHEMAS = {
    "theta_curve": [
        "beta", "method", "value", "ci_low", "ci_high", "sizes", "replicas", "seed",
    ],
    "loglog_ladder": [
        "beta", "n", "dim", "measure_kind", "k_threshold", "mean", "stderr",
        "replicas", "pair_policy", "seed",
    ],
    "telescope": [
        "beta", "eps", "n_exponent", "k", "log_ratio", "stderr", "replicas", "seed",
    ],
    "cutpoints": [
        "beta", "n", "dim", "mean_mc", "stderr", "mean_exact", "replicas", "seed",
    ],
}

_NUMERIC = {
    "beta", "value", "ci_low", "ci_high", "n", "mean", "stderr", "eps",
    "n_exponent", "k", "log_ratio", "mean_mc", "mean_exact", "replicas", "dim",
}


class SpecError(Exception):
    """Invalid figure spec or input CSV; carries one message per problem."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input_csv: tuple
    output: str
    title: str = ""
    annotations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        errors = []
        if self.kind not in KINDS:
            errors.append(f"spec.kind: unknown kind {self.kind!r}, expected one of {', '.join(KINDS)}")
        if not self.input_csv:
            errors.append("spec.input_csv: at least one CSV path is required")
        if not self.output:
            errors.append("spec.output: output image path is required")
        else:
            suffix = Path(self.output).suffix.lower()
            if suffix not in (".png", ".svg"):
                errors.append(f"spec.output: unsupported image format {suffix!r}, expected .png or .svg")
        if errors:
            raise SpecError(errors)

    @classmethod
    def from_dict(cls, data: dict) -> "FigureSpec":
        if not isinstance(data, dict):
            raise SpecError(["spec: top level must be a JSON object"])
        known = {"kind", "input_csv", "output", "title", "annotations"}
        errors = [f"spec.{k}: unknown field" for k in sorted(set(data) - known)]
        for req in ("kind", "input_csv", "output"):
            if req not in data:
                errors.append(f"spec.{req}: required field is missing")
        if errors:
            raise SpecError(errors)
        paths = data["input_csv"]
        if isinstance(paths, str):
            paths = (paths,)
        return cls(
            kind=str(data["kind"]),
            input_csv=tuple(str(p) for p in paths),
            output=str(data["output"]),
            title=str(data.get("title", "")),
            annotations=tuple(str(a) for a in data.get("annotations", ())),
        )

    @classmethod
    def from_file(cls, path) -> "FigureSpec":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise SpecError([f"spec: file not found: {path}"])
        except json.JSONDecodeError as exc:
            raise SpecError([f"spec: not valid JSON ({exc})"])
        return cls.from_dict(data)


def load_rows(spec: FigureSpec):
    """Read and validate every input CSV, returning one combined row list.

    Numeric fields come back as floats, empty fields as None, the rest as
    strings.  A header differing from the schema in any way fails with
    the full column diff.
    """
    expected = SCHEMAS[spec.kind]
    rows = []
    errors = []
    for path in spec.input_csv:
        p = Path(path)
        if not p.exists():
            errors.append(f"input: file not found: {path}")
            continue
        with p.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != expected:
                missing = [c for c in expected if c not in (header or [])]
                extra = [c for c in (header or []) if c not in expected]
                parts = [f"input {path}: columns do not match the {spec.kind} schema"]
                if missing:
                    parts.append(f"missing: {', '.join(missing)}")
                if extra:
                    parts.append(f"unexpected: {', '.join(extra)}")
                if not missing and not extra:
                    parts.append(f"order must be: {', '.join(expected)}")
                errors.append(" | ".join(parts))
                continue
            for lineno, raw in enumerate(reader, start=2):
                if len(raw) != len(expected):
                    errors.append(f"input {path}:{lineno}: expected {len(expected)} fields, got {len(raw)}")
                    break
                row = {}
                for name, cell in zip(expected, raw):
                    if cell == "":
                        row[name] = None
                    elif name in _NUMERIC:
                        try:
                            row[name] = float(cell)
                        except ValueError:
                            errors.append(f"input {path}:{lineno}: column {name} is not numeric: {cell!r}")
                            row[name] = None
                    else:
                        row[name] = cell
                rows.append(row)
    if errors:
        raise SpecError(errors)
    if not rows:
        raise SpecError(["input: no data rows found"])
    return rows
