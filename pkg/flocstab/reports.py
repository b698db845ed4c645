"""
Report serialization for flocstab

JSON for report dataclasses, pandas CSV for tables. Writers are duck
typed so this module stays free of imports from the numerical modules.
"""

import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from .logging_config import logger
from .validation import GridMismatchError, ValidationError

FLOAT_FORMAT = '%.12g'
# steady-state tables are read back by check-steady and must reload bit for bit
ROUND_TRIP_FORMAT = '%.17g'

PathLike = Union[str, Path]


def to_plain(value: Any) -> Any:
    """Convert dataclasses, numpy values and sample tables into JSON-ready data"""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, 'values') and hasattr(value, 'grid') and isinstance(value.values, np.ndarray):
            return to_plain(value.values)
        return {
            f.name: to_plain(getattr(value, f.name))
            for f in dataclasses.fields(value)
            if f.metadata.get('serialize', True)
        }
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': to_plain(value.real), 'im': to_plain(value.imag)}
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else str(value)
    return value


def rounded(data: Any, digits: int = 12) -> Any:
    """Plain data with every float cut to `digits` significant digits"""
    if isinstance(data, dict):
        return {k: rounded(v, digits) for k, v in data.items()}
    if isinstance(data, list):
        return [rounded(v, digits) for v in data]
    if isinstance(data, float):
        return float(f"{data:.{digits}g}")
    return data


class JsonReport:
    """Mixin giving report dataclasses to_dict / to_json"""

    def to_dict(self) -> Dict[str, Any]:
        return to_plain(self)

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def write_json(report, path: PathLike) -> Path:
    """Write a report (anything with to_json, or plain data) to a file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = report.to_dict() if hasattr(report, 'to_dict') else to_plain(report)
    path.write_text(json.dumps(rounded(data), indent=2) + "\n", encoding='utf-8')
    logger.info(f"Wrote {path}")
    return path


def _write_frame(frame: pd.DataFrame, path: PathLike, float_format: str = FLOAT_FORMAT) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=float_format)
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def steady_frame(result) -> pd.DataFrame:
    """node, x, f*, p* table of a steady state"""
    grid = result.f_star.grid
    return pd.DataFrame({
        'node': np.arange(grid.size),
        'x': grid.nodes,
        'f_star': result.f_star.values,
        'p_star': result.p_star.values,
    })


def write_steady_csv(result, path: PathLike) -> Path:
    return _write_frame(steady_frame(result), path, ROUND_TRIP_FORMAT)


def read_pstar_csv(path: PathLike, grid) -> np.ndarray:
    """
    Read the p* column of a steady-state CSV written by write_steady_csv

    Raises:
        ValidationError: File is missing the p_star column
        GridMismatchError: Node count or node positions differ from grid
    """
    frame = pd.read_csv(path, float_precision='round_trip')
    if 'p_star' not in frame.columns:
        raise ValidationError(f"{path} has no p_star column")
    if len(frame) != grid.size:
        raise GridMismatchError(f"{path} holds {len(frame)} nodes, grid has {grid.size}")
    if 'x' in frame.columns and not np.allclose(frame['x'].to_numpy(), grid.nodes, rtol=1e-10, atol=1e-12):
        raise GridMismatchError(f"node positions in {path} do not match {grid}")
    return frame['p_star'].to_numpy(dtype=float)


def write_spectrum_csv(spectrum, path: PathLike) -> Path:
    """Eigenvalues as (re, im) rows"""
    eigenvalues = np.asarray(spectrum.eigenvalues)
    return _write_frame(pd.DataFrame({'re': eigenvalues.real, 'im': eigenvalues.imag}), path)


def trajectory_frame(trajectory) -> pd.DataFrame:
    """Long form (t, node, x, p)"""
    grid = trajectory.grid
    times = np.asarray(trajectory.times)
    states = np.array([s.values for s in trajectory.states])
    return pd.DataFrame({
        't': np.repeat(times, grid.size),
        'node': np.tile(np.arange(grid.size), len(times)),
        'x': np.tile(grid.nodes, len(times)),
        'p': states.ravel(),
    })


def write_trajectory_csv(trajectory, path: PathLike) -> Path:
    return _write_frame(trajectory_frame(trajectory), path)


def write_diagnostics_csv(trajectory, path: PathLike) -> Path:
    frame = pd.DataFrame([dataclasses.asdict(d) for d in trajectory.diagnostics])
    frame.insert(0, 't', trajectory.times)
    return _write_frame(frame, path)


def write_k_trace_csv(trace, path: PathLike) -> Path:
    """lambda vs K(lambda) with the four A_ij"""
    frame = pd.DataFrame([
        {'lambda': e.lam, 'A11': e.A11, 'A12': e.A12, 'A21': e.A21, 'A22': e.A22, 'K': e.K}
        for e in trace
    ])
    return _write_frame(frame, path)


def sweep_frame(result) -> pd.DataFrame:
    return pd.DataFrame([dataclasses.asdict(r) for r in result.records])


def write_sweep_csv(result, path: PathLike) -> Path:
    return _write_frame(sweep_frame(result), path)
