"""
Run bookkeeping and output writers.

Every command is described by a RunConfig whose sha256 hash names the run,
prefixes the run id and is stamped into each CSV and JSON output. Writers
use fixed float formatting and LF line endings so reruns with the same
configuration produce identical bytes.
"""

import csv
import hashlib
import io
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import psutil

from . import __version__
from .logging_config import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = ".15g"
SVG_HASH_SALT = "ekman-bifurcation"


@dataclass(frozen=True)
class RunConfig:
    command: str
    a: Optional[float]
    M: int
    N: int
    tolerances: Dict[str, float] = field(default_factory=dict)
    outputs: Dict[str, Optional[str]] = field(default_factory=dict)
    format: str = "json"
    seed: Optional[int] = None
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.tolerances.items():
            if not value > 0:
                raise ValueError(f"tolerance {name} must be positive, got {value}")
        if self.format not in ("json", "csv"):
            raise ValueError(f"format must be 'json' or 'csv', got {self.format}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def canonical_json(self) -> str:
        """Hashed payload; output paths are recorded but not hashed."""
        payload = self.to_dict()
        del payload["outputs"]
        return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @property
    def run_id(self) -> str:
        return f"{self.command}-{self.config_hash[:8]}"


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def format_float(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), FLOAT_FORMAT)


def dumps_json(payload: Dict[str, Any], config_hash: Optional[str] = None) -> str:
    body = dict(payload)
    if config_hash is not None:
        body["config_hash"] = config_hash
    return json.dumps(body, indent=2, sort_keys=True, default=_jsonable) + "\n"


def dumps_csv(
    header: Sequence[str], rows: Iterable[Sequence[Any]], config_hash: Optional[str] = None
) -> str:
    buffer = io.StringIO()
    if config_hash is not None:
        buffer.write(f"# config_hash: {config_hash}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) for v in row])
    return buffer.getvalue()


def _write_text(path: Union[str, Path], text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.debug("Artifact written", extra={"path": str(path), "bytes": len(text)})
    return path


def write_json(
    path: Union[str, Path], payload: Dict[str, Any], config_hash: Optional[str] = None
) -> Path:
    return _write_text(path, dumps_json(payload, config_hash))


def write_csv(
    path: Union[str, Path],
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    config_hash: Optional[str] = None,
) -> Path:
    return _write_text(path, dumps_csv(header, rows, config_hash))


def emit(text: str, path: Optional[Union[str, Path]] = None) -> Optional[Path]:
    """Write ``text`` to ``path``, or to standard output when no path is given."""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return None
    return _write_text(path, text)


def library_versions() -> Dict[str, str]:
    import matplotlib
    import scipy

    return {
        "ekman-bifurcation": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def manifest_path(output_dir: Union[str, Path], run: RunConfig) -> Path:
    return Path(output_dir) / f"{run.command}-{run.config_hash[:12]}.manifest.json"


def write_manifest(
    output_dir: Union[str, Path],
    run: RunConfig,
    started: float,
    exit_code: int,
    artifacts: Optional[List[str]] = None,
) -> Path:
    """
    Record the configuration, versions, seed, wall time and resident memory
    of a finished run.
    """
    memory = psutil.Process().memory_info()
    manifest = {
        "run_config": run.to_dict(),
        "config_hash": run.config_hash,
        "run_id": run.run_id,
        "versions": library_versions(),
        "seed": run.seed,
        "wall_time_s": round(time.monotonic() - started, 6),
        "rss_mb": round(memory.rss / (1024 * 1024), 2),
        "exit_code": exit_code,
        "artifacts": sorted(artifacts or []),
    }
    path = manifest_path(output_dir, run)
    _write_text(path, json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    logger.info("Manifest written", extra={"path": str(path), "exit_code": exit_code})
    return path


def write_bifurcation_svg(
    path: Union[str, Path],
    branches: Dict[str, Sequence[Sequence[float]]],
    kappa_c: Optional[float] = None,
    title: Optional[str] = None,
) -> Path:
    """
    Amplitude against κ for each labelled branch, given as (κ, amplitude)
    pairs. The SVG carries no date and a fixed hash salt.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = SVG_HASH_SALT

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, points in branches.items():
        data = np.asarray(points, dtype=float).reshape(-1, 2)
        style = "k--" if label == "trivial" else "o-"
        ax.plot(data[:, 0], data[:, 1], style, label=label, markersize=3)
    if kappa_c is not None:
        ax.axvline(kappa_c, color="grey", linewidth=0.8)
    ax.set_xlabel("kappa")
    ax.set_ylabel("amplitude |psi - psi*|")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.debug("Bifurcation diagram written", extra={"path": str(path)})
    return path
