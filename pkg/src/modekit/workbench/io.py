"""Dataset manifests, episode CSVs and report tables.

A dataset is a JSON manifest::

    {"p": 100, "classes": ["a", "b"],
     "episodes": [{"id": "ep000", "path": "ep000.csv", "label": 1}, ...]}

with one headerless CSV per episode (p rows, tau comma-separated values).
Relative paths resolve against the manifest's directory. All writes go
through a temporary file and ``os.replace``.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from modekit.dmd import Episode


class ManifestError(ValueError):
    """The manifest or an episode file is malformed."""


class DimensionMismatchError(ValueError):
    """Episodes disagree on the snapshot dimension."""


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_episode_csv(path: Path, x: np.ndarray) -> None:
    x = np.asarray(x)
    if np.iscomplexobj(x):
        raise ValueError("episode CSVs hold real snapshots only")
    buf = io.StringIO()
    np.savetxt(buf, x, delimiter=",", fmt="%.17g")
    atomic_write_text(path, buf.getvalue())


def read_episode_csv(path: Path) -> np.ndarray:
    try:
        x = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot parse episode file {path}: {exc}") from exc
    return x


def write_dataset(directory: Path, episodes: list[Episode], class_names=None) -> Path:
    directory = Path(directory)
    labels = sorted({ep.label for ep in episodes})
    if class_names is None:
        class_names = [f"class{y}" for y in labels]
    entries = []
    for ep in episodes:
        name = f"{ep.id}.csv"
        write_episode_csv(directory / name, ep.snapshots)
        entries.append({"id": ep.id, "path": name, "label": int(ep.label)})
    manifest = {"p": int(episodes[0].p), "classes": list(class_names), "episodes": entries}
    path = directory / "manifest.json"
    atomic_write_text(path, json.dumps(manifest, indent=2) + "\n")
    return path


def read_dataset(manifest_path: Path) -> tuple[list[Episode], list[str]]:
    """Episodes in manifest order plus the class names."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {manifest_path}: {exc}") from exc
    try:
        p = int(manifest["p"])
        classes = [str(c) for c in manifest["classes"]]
        entries = manifest["episodes"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"manifest {manifest_path} lacks p/classes/episodes: {exc}") from exc
    base = manifest_path.parent
    episodes = []
    for entry in entries:
        try:
            ident, rel, label = str(entry["id"]), entry["path"], int(entry["label"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad episode entry {entry!r}: {exc}") from exc
        if not 1 <= label <= len(classes):
            raise ManifestError(f"episode {ident}: label {label} outside 1..{len(classes)}")
        x = read_episode_csv(base / rel)
        if x.shape[0] != p:
            raise DimensionMismatchError(f"episode {ident}: {x.shape[0]} rows, manifest says p={p}")
        try:
            episodes.append(Episode(x, label, ident))
        except ValueError as exc:
            raise ManifestError(str(exc)) from exc
    if not episodes:
        raise ManifestError("manifest lists no episodes")
    return episodes, classes


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_json(path: Path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, set):
        return sorted(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj)}")


def save_fit(directory: Path, episodes: list[Episode], result) -> None:
    """Persist fitted eigenvalues and objective trace so ``report`` can rebuild modes."""
    directory = Path(directory)
    rows = []
    for ep, th in zip(episodes, result.thetas):
        for j, z in enumerate(th):
            rows.append((ep.id, ep.label, j, float(z.real), float(z.imag)))
    write_csv(directory / "eigenvalues.csv", ["id", "label", "mode", "re", "im"], rows)
    write_csv(
        directory / "trace.csv",
        ["iteration", "objective", "f_dmd_mean", "f_kfd"],
        [(k, *map(float, row)) for k, row in enumerate(result.objective_trace)],
    )


def load_eigenvalues(path: Path, episodes: list[Episode]) -> np.ndarray:
    """(n, r) eigenvalue array from ``eigenvalues.csv`` ordered like ``episodes``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    by_id: dict[str, dict[int, complex]] = {}
    for row in rows:
        by_id.setdefault(row["id"], {})[int(row["mode"])] = complex(float(row["re"]), float(row["im"]))
    try:
        r = len(by_id[episodes[0].id])
        return np.array([[by_id[ep.id][j] for j in range(r)] for ep in episodes])
    except KeyError as exc:
        raise ManifestError(f"eigenvalue table lacks an entry for {exc}") from exc
