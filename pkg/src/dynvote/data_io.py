"""Loading multi-view tables, the synthetic generator and model persistence.

Table format
------------
A delimited text file (comma, or tab for ``.tsv``/``.tab`` files unless the
manifest says otherwise) whose first line is a header of unique column
names.  Every other non-blank line is one sample.  Feature cells must parse
as finite 64-bit floats; label cells must be non-empty and are kept as
strings.

Manifest grammar
----------------
An INI file read with :mod:`configparser` (no interpolation)::

    [dataset]
    name = nonIDH1            ; optional, defaults to the table file stem
    label = outcome           ; label column, required
    delimiter = ,             ; optional: "," "tab" ";" or "|"
    notes = free text         ; optional provenance

    [view texture_t1]         ; one section per view, in view order
    columns = f0001..f1200, age

``columns`` is a comma-separated list whose items are either a column name
or ``first..last``, the inclusive run of header columns between two names.
Views may not overlap and may not include the label column.

Model container
---------------
See :func:`save_model`.
"""
from __future__ import annotations

import configparser
import csv
import json
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import IngestionError, InvalidInputError, ModelFormatError, ModelVersionError
from .forest import DecisionTree, ForestConfig, RandomForest
from .multiview import MultiViewDataset, ViewEnsemble

__all__ = [
    "ViewManifest",
    "SynthSpec",
    "read_manifest",
    "load_dataset",
    "write_table",
    "write_manifest",
    "generate_synthetic",
    "save_model",
    "load_model",
    "MODEL_FORMAT",
    "MODEL_VERSION",
]

MODEL_FORMAT = "dynvote-model"
MODEL_VERSION = "1.0"

_DELIMS = {",": ",", "comma": ",", "tab": "\t", "\\t": "\t", ";": ";", "|": "|"}


# ---------------------------------------------------------------------------
# manifest and tables
# ---------------------------------------------------------------------------

@dataclass
class ViewManifest:
    """Which columns of a table form which view."""

    label_column: str
    views: List[Tuple[str, List[str]]]
    name: Optional[str] = None
    delimiter: Optional[str] = None
    notes: str = ""

    def __post_init__(self):
        if not self.views:
            raise IngestionError("manifest declares no views")

    def resolve(self, header: Sequence[str]) -> List[List[int]]:
        """Column positions of every view in ``header``."""
        pos = {}
        for i, h in enumerate(header):
            if h in pos:
                raise IngestionError(f"duplicate header column {h!r}", row=1)
            pos[h] = i
        if self.label_column not in pos:
            raise IngestionError(f"label column {self.label_column!r} not found in table")

        def lookup(col, view):
            if col not in pos:
                raise IngestionError(f"view {view!r} references missing column {col!r}")
            return pos[col]

        used: Dict[int, str] = {}
        out = []
        for view, items in self.views:
            cols = []
            for item in items:
                if ".." in item:
                    a, b = (s.strip() for s in item.split("..", 1))
                    ia, ib = lookup(a, view), lookup(b, view)
                    if ib < ia:
                        raise IngestionError(f"view {view!r}: range {item!r} runs backwards")
                    cols.extend(range(ia, ib + 1))
                else:
                    cols.append(lookup(item, view))
            if not cols:
                raise IngestionError(f"view {view!r} has no columns")
            for c in cols:
                if c == pos[self.label_column]:
                    raise IngestionError(f"view {view!r} includes the label column")
                if c in used:
                    raise IngestionError(
                        f"column {header[c]!r} appears in views {used[c]!r} and {view!r}")
                used[c] = view
            out.append(cols)
        return out


def read_manifest(path) -> ViewManifest:
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"manifest not found: {path}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise IngestionError(f"malformed manifest {path}: {exc}") from None
    if not cp.has_section("dataset") or not cp.has_option("dataset", "label"):
        raise IngestionError(f"manifest {path} needs a [dataset] section with a 'label' key")
    ds = cp["dataset"]
    views = []
    for sec in cp.sections():
        if sec.startswith("view "):
            name = sec[5:].strip()
            cols = [c.strip() for c in cp[sec].get("columns", "").split(",") if c.strip()]
            views.append((name, cols))
    delim = ds.get("delimiter")
    if delim is not None:
        if delim.strip().lower() not in _DELIMS and delim not in _DELIMS:
            raise IngestionError(f"unsupported delimiter {delim!r} in {path}")
        delim = _DELIMS.get(delim.strip().lower(), _DELIMS.get(delim))
    return ViewManifest(ds["label"].strip(), views, ds.get("name"), delim, ds.get("notes", ""))


def _sniff_delimiter(path: Path) -> str:
    return "\t" if path.suffix.lower() in (".tsv", ".tab") else ","


def read_table(path, delimiter: Optional[str] = None):
    """Header and rows (with 1-based line numbers) of a delimited file."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"table not found: {path}")
    delimiter = delimiter or _sniff_delimiter(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise IngestionError(f"table {path} is empty") from None
        rows = []
        for row in reader:
            if not any(cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"expected {len(header)} cells, found {len(row)}", row=reader.line_num)
            rows.append((reader.line_num, row))
    return header, rows


def _parse_float(cell: str, line: int, column: str) -> float:
    try:
        v = float(cell)
    except ValueError:
        kind = "missing" if not cell.strip() else "non-numeric"
        raise IngestionError(f"{kind} feature value {cell!r}", row=line, column=column) from None
    if not np.isfinite(v):
        raise IngestionError(f"non-finite feature value {cell!r}", row=line, column=column)
    return v


def load_dataset(table, manifest) -> MultiViewDataset:
    """Read a table into a :class:`MultiViewDataset` as described by ``manifest``.

    ``manifest`` is a :class:`ViewManifest` or a path to a manifest file.
    Labels are mapped to ids in order of first appearance; the original values
    are kept in ``class_names``.
    """
    if not isinstance(manifest, ViewManifest):
        manifest = read_manifest(manifest)
    table = Path(table)
    header, rows = read_table(table, manifest.delimiter)
    if not rows:
        raise IngestionError(f"table {table} has no data rows")
    view_cols = manifest.resolve(header)
    label_pos = header.index(manifest.label_column)

    classes: Dict[str, int] = {}
    labels = np.empty(len(rows), dtype=np.int64)
    views = [np.empty((len(rows), len(cols))) for cols in view_cols]
    for r, (line, row) in enumerate(rows):
        lab = row[label_pos].strip()
        if not lab:
            raise IngestionError("missing label", row=line, column=manifest.label_column)
        labels[r] = classes.setdefault(lab, len(classes))
        for q, cols in enumerate(view_cols):
            out = views[q][r]
            for j, c in enumerate(cols):
                out[j] = _parse_float(row[c], line, header[c])
    name = manifest.name or table.stem
    return MultiViewDataset(views, labels, len(classes),
                            [v for v, _ in manifest.views], list(classes), name)


def write_table(data: MultiViewDataset, path, label_column: str = "label",
                delimiter: str = ",") -> List[List[str]]:
    """Write ``data`` as a delimited table; returns the column names per view.

    Values are written with ``repr`` so reading the file back is lossless.
    """
    view_cols = [[f"{vn}_{j}" for j in range(d)]
                 for vn, d in zip(data.view_names, data.view_dims)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([label_column] + [c for cols in view_cols for c in cols])
        for i in range(data.n_samples):
            cells = [data.class_names[data.labels[i]]]
            for v in data.views:
                cells.extend(repr(float(x)) for x in v[i])
            w.writerow(cells)
    return view_cols


def write_manifest(path, view_names: Sequence[str], view_columns: Sequence[Sequence[str]],
                   label_column: str = "label", name: Optional[str] = None,
                   notes: str = "") -> None:
    lines = ["[dataset]"]
    if name:
        lines.append(f"name = {name}")
    lines.append(f"label = {label_column}")
    if notes:
        lines.append(f"notes = {notes}")
    for vn, cols in zip(view_names, view_columns):
        lines += ["", f"[view {vn}]"]
        if len(cols) > 2:
            lines.append(f"columns = {cols[0]}..{cols[-1]}")
        else:
            lines.append("columns = " + ", ".join(cols))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic heterogeneous multi-view generator.

    Samples fall into latent regions.  In region ``r`` only view
    ``informative_views[r]`` carries class signal: its samples sit in one
    Gaussian cluster per class (centres ``separation`` apart from the origin
    along distinct axes, spread ``noise``).  Every other view of those samples,
    and the informative view for samples of other regions, is standard normal
    noise.
    """

    n_samples: int = 400
    n_views: int = 5
    view_dim: int = 5
    n_regions: int = 2
    informative_views: Tuple[int, ...] = (0, 1)
    noise: float = 1.0
    imbalance_ratio: float = 1.0
    separation: float = 3.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "informative_views", tuple(int(v) for v in self.informative_views))
        if self.n_samples < 4 or self.n_views < 1 or self.view_dim < 2:
            raise InvalidInputError("need n_samples >= 4, n_views >= 1 and view_dim >= 2")
        if self.n_regions < 1 or len(self.informative_views) != self.n_regions:
            raise InvalidInputError("need one informative view per region and n_regions >= 1")
        if any(not 0 <= v < self.n_views for v in self.informative_views):
            raise InvalidInputError(f"informative views must lie in [0, {self.n_views})")
        if self.noise < 0 or self.imbalance_ratio < 1 or self.separation <= 0:
            raise InvalidInputError("need noise >= 0, imbalance_ratio >= 1, separation > 0")

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestionError(f"cannot read synthetic spec {path}: {exc}") from None
        try:
            return cls(**raw)
        except TypeError as exc:
            raise IngestionError(f"bad synthetic spec {path}: {exc}") from None


def generate_synthetic(spec: SynthSpec, return_regions: bool = False):
    """Draw a binary multi-view dataset from ``spec``.

    Returns the dataset, and the region of every sample when
    ``return_regions`` is set.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    n_minor = int(round(n / (1.0 + spec.imbalance_ratio)))
    n_minor = min(max(n_minor, 2), n - 2)
    labels = np.zeros(n, dtype=np.int64)
    labels[:n_minor] = 1
    labels = rng.permutation(labels)
    regions = rng.integers(0, spec.n_regions, size=n)

    centers = np.zeros((2, spec.view_dim))
    centers[0, 0] = spec.separation
    centers[1, 1] = spec.separation
    views = []
    for q in range(spec.n_views):
        X = rng.standard_normal((n, spec.view_dim))
        signal = np.isin(regions, [r for r, v in enumerate(spec.informative_views) if v == q])
        k = int(signal.sum())
        X[signal] = centers[labels[signal]] + spec.noise * rng.standard_normal((k, spec.view_dim))
        views.append(X)
    data = MultiViewDataset(views, labels, 2, [f"view{q}" for q in range(spec.n_views)],
                            ["0", "1"], "synthetic")
    return (data, regions) if return_regions else data


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------

_TREE_FIELDS = ("feature", "threshold", "left", "right", "leaf_index")


def save_model(ensemble: ViewEnsemble, path) -> None:
    """Write ``ensemble`` to ``path`` as an uncompressed ``.npz`` archive.

    The archive holds a ``header`` member (UTF-8 JSON in a uint8 array: format
    name, ``version`` as ``"major.minor"``, forest config, view and class
    names, ``metadata``) and, for every view ``q``, the training matrix
    ``v{q}.X``, the ``v{q}.inbag`` mask, and the node arrays of all its trees
    concatenated (``v{q}.feature``, ``.threshold``, ``.left``, ``.right``,
    ``.leaf_index``, ``.counts``) with tree boundaries in ``v{q}.offsets``.
    Child indices are local to their tree.  ``labels`` holds the training
    class ids.
    """
    data = ensemble.data
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": asdict(ensemble.config),
        "name": data.name,
        "n_classes": data.n_classes,
        "view_names": list(data.view_names),
        "class_names": list(data.class_names),
        "view_seeds": [f.config.seed for f in ensemble.forests],
        "metadata": getattr(ensemble, "metadata", {}),
    }
    arrays = {
        "header": np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8),
        "labels": data.labels,
    }
    for q, forest in enumerate(ensemble.forests):
        p = f"v{q}."
        arrays[p + "X"] = data.views[q]
        arrays[p + "inbag"] = forest.inbag
        arrays[p + "offsets"] = np.cumsum([0] + [t.n_nodes for t in forest.trees])
        for name in _TREE_FIELDS:
            arrays[p + name] = np.concatenate([getattr(t, name) for t in forest.trees])
        arrays[p + "counts"] = np.concatenate([t.counts for t in forest.trees])
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def _read_header(z) -> dict:
    try:
        header = json.loads(bytes(z["header"]).decode("utf-8"))
    except (KeyError, ValueError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"missing or unreadable model header: {exc}") from None
    if header.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"not a {MODEL_FORMAT} container")
    version = str(header.get("version", ""))
    if version.split(".")[0] != MODEL_VERSION.split(".")[0]:
        raise ModelVersionError(
            f"model version {version} is incompatible with reader version {MODEL_VERSION}")
    return header


def load_model(path) -> ViewEnsemble:
    """Read an ensemble written by :func:`save_model`."""
    try:
        with np.load(path, allow_pickle=False) as z:
            header = _read_header(z)
            arrays = {k: z[k] for k in z.files}
    except ModelFormatError:
        raise
    except (zipfile.BadZipFile, ValueError, OSError, EOFError, KeyError) as exc:
        raise ModelFormatError(f"corrupt model container {path}: {exc}") from None
    try:
        config = ForestConfig(**header["config"])
        n_classes = int(header["n_classes"])
        views, forests = [], []
        for q, seed in enumerate(header["view_seeds"]):
            p = f"v{q}."
            X = arrays[p + "X"]
            off = arrays[p + "offsets"]
            trees = []
            for k in range(len(off) - 1):
                s = slice(off[k], off[k + 1])
                trees.append(DecisionTree(
                    *(arrays[p + name][s] for name in ("feature", "threshold", "left", "right")),
                    counts=arrays[p + "counts"][s],
                    leaf_index=arrays[p + "leaf_index"][s],
                    n_features=X.shape[1]))
            cfg = ForestConfig(**{**header["config"], "seed": int(seed)})
            forests.append(RandomForest(trees, arrays[p + "inbag"], n_classes, X.shape[1], cfg))
            views.append(X)
        data = MultiViewDataset(views, arrays["labels"], n_classes, header["view_names"],
                                header["class_names"], header["name"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFormatError(f"corrupt model container {path}: {exc}") from None
    ens = ViewEnsemble(data, forests, config)
    ens.metadata = header.get("metadata", {})
    return ens
