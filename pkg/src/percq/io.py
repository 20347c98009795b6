"""Output conventions: CSV data files with a JSON manifest alongside."""

from __future__ import annotations

import csv
import datetime as _dt
import functools
import io
import json
import subprocess
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, rng

MANIFEST_SUFFIX = ".manifest.json"


def fmt_real(x: float) -> str:
    return format(x, ".17g")


def _cell(v) -> str:
    if isinstance(v, float):
        return fmt_real(v)
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


@functools.cache
def tool_version() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent, capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    desc = res.stdout.strip()
    return f"{__version__}+{desc}" if res.returncode == 0 and desc else __version__


@dataclass
class RunManifest:
    command: str
    parameters: dict
    master_seed: int | None
    tool_version: str = field(default_factory=tool_version)
    rng_scheme: str = rng.SCHEME
    started_at: str = field(
        default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    )


def emit(text: str, out: str | None, manifest: RunManifest | None = None) -> None:
    """Write ``text`` to ``out`` (stdout when ``None``) plus the manifest sidecar."""
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text)
    if manifest is not None:
        Path(str(path) + MANIFEST_SUFFIX).write_text(json_text(asdict(manifest)))
