"""
Result persistence: CSV series, heatmaps and the run record.
"""
import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from dataclasses_json import dataclass_json

logger = logging.getLogger(__name__)

PGM_MAX = 255


@dataclass_json
@dataclass
class RunRecord:
    """Everything needed to reproduce a run and verify its outputs."""
    experiment: str
    version: str
    seed: int
    config: Dict[str, Any]
    started_at: str
    wall_clock_seconds: float = 0.0
    checksums: Dict[str, str] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)


def file_checksum(path: Union[str, Path]) -> str:
    """SHA-256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def _prepare_dir(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        logger.error(f"Cannot create output directory {path.parent}: {e}")
        raise


def heatmap_pixels(matrix: np.ndarray) -> np.ndarray:
    """
    Linear map of [0, max] onto gray levels [255, 0]; all white when max is 0.

    Levels are 255 - floor(255 * value / max + 0.5), so halves round up.
    """
    peak = float(matrix.max()) if matrix.size else 0.0
    if peak <= 0:
        return np.full(matrix.shape, PGM_MAX, dtype=np.uint8)
    return (PGM_MAX - np.floor(PGM_MAX * matrix / peak + 0.5)).astype(np.uint8)


def emit_heatmap(matrix: np.ndarray, path: Union[str, Path]) -> List[Path]:
    """
    Write a [time, site] matrix as plain text and as a binary PGM image.

    Args:
        matrix: Finite nonnegative array, rows = time ascending, columns = site
        path: Output stem; .txt and .pgm are appended to its full name

    Returns:
        Paths written (text first)
    """
    values = np.asarray(matrix, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"heatmap matrix must be 2-D (got shape {values.shape})")
    if np.any(np.isnan(values)) or not np.all(np.isfinite(values)):
        raise ValueError("heatmap matrix contains NaN or infinite entries")
    if np.any(values < 0):
        raise ValueError("heatmap matrix must be nonnegative")

    base = Path(path)
    text_path = base.parent / (base.name + '.txt')
    image_path = base.parent / (base.name + '.pgm')
    _prepare_dir(text_path)

    rows, cols = values.shape
    header = f"rows: time ascending ({rows}); columns: site 0..{cols - 1}"
    np.savetxt(text_path, values, fmt='%.12e', header=header)

    pixels = heatmap_pixels(values)
    with open(image_path, 'wb') as f:
        f.write(f"P5\n{cols} {rows}\n{PGM_MAX}\n".encode('ascii'))
        f.write(pixels.tobytes())

    logger.debug(f"Heatmap written to {text_path} and {image_path}")
    return [text_path, image_path]


def write_csv(path: Union[str, Path], columns: Dict[str, Sequence[float]]) -> Path:
    """
    Write equal-length columns with a header row; the first column must be 't'.

    Args:
        path: Output file
        columns: Ordered mapping of column name to values

    Returns:
        Path written
    """
    names = list(columns)
    if not names or names[0] != 't':
        raise ValueError(f"first CSV column must be 't' (got {names[:1]})")
    data = [np.asarray(columns[name], dtype=float).ravel() for name in names]
    length = data[0].size
    for name, col in zip(names, data):
        if col.size != length:
            raise ValueError(f"column '{name}' has {col.size} rows, expected {length}")

    path = Path(path)
    _prepare_dir(path)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(names)
        for i in range(length):
            writer.writerow([repr(float(col[i])) for col in data])
    logger.debug(f"CSV written to {path} ({length} rows)")
    return path


def read_csv(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Columns of a CSV written by write_csv."""
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.reader(f)
        names = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    table = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return {name: table[:, i] for i, name in enumerate(names)}


def write_json(path: Union[str, Path], payload: Any) -> Path:
    """Write a dataclass_json object or plain mapping as indented JSON."""
    path = Path(path)
    _prepare_dir(path)
    text = payload.to_json(indent=2) if hasattr(payload, 'to_json') else json.dumps(payload, indent=2)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
        f.write('\n')
    return path


def write_run_record(record: RunRecord, output_dir: Union[str, Path],
                     outputs: Optional[Sequence[Path]] = None) -> Path:
    """
    Fill in output checksums and write run_record.json.

    Args:
        record: Run record to complete
        output_dir: Directory holding the outputs
        outputs: Files to checksum (names are stored relative to output_dir)

    Returns:
        Path of run_record.json
    """
    output_dir = Path(output_dir)
    for out in outputs or []:
        out = Path(out)
        record.checksums[out.relative_to(output_dir).as_posix()] = file_checksum(out)
    path = write_json(output_dir / 'run_record.json', record)
    logger.info(f"Run record written to {path} ({len(record.checksums)} outputs)")
    return path
