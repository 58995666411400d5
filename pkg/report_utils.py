import csv
import hashlib
import json
import logging
import math
import os
import platform
from datetime import datetime
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pytz
import scipy
import scipy.sparse as sparse


logger = logging.getLogger(__name__)

PACKAGE_VERSION = '0.1.0'


def format_value(value: Any) -> str:
    """Stable text for CSV cells: floats in repr-exact %.17g, None as empty."""
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        return f"{value:.17g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            unknown = set(row) - set(columns)
            if unknown:
                raise KeyError(f"row has columns not in the header: {sorted(unknown)}")
            writer.writerow([format_value(row.get(col)) for col in columns])
    logger.debug("[REPORT] wrote %s", path)
    return path


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, newline='', encoding='utf-8') as fh:
        return list(csv.DictReader(fh))


def write_json(path: str, payload: Dict[str, Any]) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write('\n')
    return path


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"not JSON serialisable: {type(value).__name__}")


def config_sha256(normalized: Dict[str, Any]) -> str:
    text = json.dumps(normalized, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def versions() -> Dict[str, str]:
    return {
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'package': PACKAGE_VERSION,
    }


def now_in_zone(zone: Optional[str] = None) -> datetime:
    """Current time in EIP_TIMEZONE (default UTC)."""
    name = zone or os.environ.get('EIP_TIMEZONE', 'UTC')
    try:
        tz = pytz.timezone(name)
    except pytz.UnknownTimeZoneError:
        logger.warning("[REPORT] unknown timezone %s; using UTC", name)
        tz = pytz.utc
    return datetime.now(tz)


def build_manifest(subcommand: str, normalized: Dict[str, Any], seed: int, started_at: datetime,
                   wall_time_s: float, artifacts: List[str], passed: bool) -> Dict[str, Any]:
    return {
        'subcommand': subcommand,
        'config_sha256': config_sha256(normalized),
        'seed': seed,
        'versions': versions(),
        'started_at': started_at.isoformat(),
        'wall_time_s': wall_time_s,
        'artifacts': [os.path.basename(a) for a in artifacts],
        'passed': bool(passed),
    }


def write_triplets(path: str, matrix) -> str:
    """`# rows cols nnz` header, then one `row col value` line per entry (1-based)."""
    coo = sparse.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for k in order:
            fh.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {coo.data[k]:.17g}\n")
    return path


def read_triplets(path: str) -> sparse.csr_matrix:
    with open(path, encoding='utf-8') as fh:
        header = fh.readline().lstrip('#').split()
        rows, cols, nnz = (int(v) for v in header)
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 3))
    return sparse.coo_matrix((data[:, 2], (data[:, 0].astype(int) - 1, data[:, 1].astype(int) - 1)),
                             shape=(rows, cols)).tocsr()


def write_node_table(path: str, times: np.ndarray, levels: np.ndarray) -> str:
    """One line per (level, node): `level t node x`."""
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(f"# {levels.shape[0]} levels {levels.shape[1]} nodes\n")
        for n, t in enumerate(times):
            for i, x in enumerate(levels[n]):
                fh.write(f"{n} {t:.17g} {i} {x:.17g}\n")
    return path
