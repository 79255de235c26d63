"""
CSV formats for sessions, fitted curves and Monte-Carlo replicates.

TAC table:  time_hours,tac_mg_dl
BrAC table: time_hours,brac_pct
"""

import logging
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .diffusion import BracCurve
from .errors import SessionLoadError
from .mestim import Session
from .schema import RunConfig
from .simkit import McReport

log = logging.getLogger(__name__)

__all__ = [
    "TAC_COLUMNS",
    "BRAC_COLUMNS",
    "FIT_COLUMNS",
    "REPLICATE_COLUMNS",
    "read_table",
    "interpolate_brac",
    "load_session",
    "write_session",
    "write_fit_table",
    "write_replicate_table",
]

PathLike = Union[str, Path]

TAC_COLUMNS = ("time_hours", "tac_mg_dl")
BRAC_COLUMNS = ("time_hours", "brac_pct")
FIT_COLUMNS = ("time_hours", "tac_observed_mg_dl", "tac_fitted_mg_dl", "residual")
REPLICATE_COLUMNS = ("m", "replicate", "seed", "q1_hat", "q2_hat", "sigma2_hat", "converged", "error")


def read_table(
    path: PathLike,
    columns: Tuple[str, str],
    nonnegative_values: bool = False,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a two-column numeric CSV with a fixed header.

    Rows are sorted by time if needed (with a warning). Times must be
    nonnegative; values only when `nonnegative_values` is set, since noisy TAC
    readings near zero may be negative.

    Returns:
        Tuple of (times, values)

    Raises:
        SessionLoadError: On missing files, wrong headers, ragged rows,
            non-finite entries, negative times (or values, if required),
            or fewer than 2 rows
    """
    path = Path(path)
    if not path.exists():
        raise SessionLoadError(f"File not found: {path}")

    try:
        df = pd.read_csv(path, skipinitialspace=True, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise SessionLoadError(f"{path}: file is empty")
    except pd.errors.ParserError as e:
        raise SessionLoadError(f"{path}: malformed CSV: {e}")
    except OSError as e:
        raise SessionLoadError(f"{path}: failed to read file: {e}")

    header = tuple(str(c).strip() for c in df.columns)
    if header != columns:
        raise SessionLoadError(f"{path}: expected header '{','.join(columns)}', got '{','.join(header)}'")
    if len(df) < 2:
        raise SessionLoadError(f"{path}: need at least 2 rows, got {len(df)}")

    numeric = df.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.all(np.isfinite(numeric), axis=1)
    if bad.any():
        line = int(np.argmax(bad)) + 2
        raise SessionLoadError(f"{path}: line {line}: values must be finite numbers")
    checks = [(0, "times")] + ([(1, "values")] if nonnegative_values else [])
    for col, name in checks:
        negative = numeric[:, col] < 0
        if negative.any():
            line = int(np.argmax(negative)) + 2
            raise SessionLoadError(f"{path}: line {line}: {name} must be >= 0")

    times, values = numeric[:, 0], numeric[:, 1]
    if np.any(np.diff(times) < 0):
        log.warning(f"{path}: rows are not sorted by time; sorting")
        order = np.argsort(times, kind="stable")
        times, values = times[order], values[order]
    return times, values


def interpolate_brac(times: np.ndarray, values: np.ndarray, T: float, subintervals: int) -> BracCurve:
    """
    Piecewise-constant BrAC on `subintervals` equal segments of [0, T].

    The BrAC table is interpolated linearly at the segment end points (holding
    the first and last observed values outside the table) and each segment
    takes the mean of its two end-point values.
    """
    if subintervals < 1:
        raise SessionLoadError(f"subintervals must be >= 1, got {subintervals}")
    grid = np.linspace(0.0, T, subintervals + 1)
    nodes = np.interp(grid, times, values)
    return BracCurve.uniform(T, 0.5 * (nodes[:-1] + nodes[1:]))


def load_session(tac_path: PathLike, brac_path: PathLike, config: Optional[RunConfig] = None) -> Session:
    """
    Load one session from its TAC and BrAC tables.

    T is the last time in either table; the BrAC input starts at time 0 and
    the state starts at zero, so TAC recorded before the first BrAC reading is
    fitted against the same zero-initial-state model.

    Args:
        tac_path: TAC CSV
        brac_path: BrAC CSV
        config: Run configuration; its brac_subintervals sets the number of
            BrAC segments (environment defaults if None)

    Returns:
        Session
    """
    config = config or RunConfig()
    tac_t, tac_v = read_table(tac_path, TAC_COLUMNS)
    brac_t, brac_v = read_table(brac_path, BRAC_COLUMNS, nonnegative_values=True)

    T = float(max(tac_t[-1], brac_t[-1]))
    if T <= 0:
        raise SessionLoadError(f"{tac_path}: all times are zero")

    brac = interpolate_brac(brac_t, brac_v, T, config.brac_subintervals)
    log.debug(f"Loaded {tac_t.size} TAC and {brac_t.size} BrAC rows, T={T:g} h")
    return Session(horizon_T=T, times=tac_t, tac_values=tac_v, brac=brac)


def write_session(
    session: Session,
    tac_path: PathLike,
    brac_path: PathLike,
    brac_nodes: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> None:
    """
    Write a session as TAC and BrAC tables.

    Args:
        session: Session to write
        tac_path: Destination of the TAC table
        brac_path: Destination of the BrAC table
        brac_nodes: (times, values) to write as the BrAC table. Without it the
            curve is written as a step table at its breakpoints and horizon.
    """
    if brac_nodes is None:
        curve = session.brac
        brac_nodes = (curve.edges, np.append(curve.levels, curve.levels[-1]))

    for path in (tac_path, brac_path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)

    pd.DataFrame({
        TAC_COLUMNS[0]: session.times,
        TAC_COLUMNS[1]: session.tac_values,
    }).to_csv(tac_path, index=False)
    pd.DataFrame({
        BRAC_COLUMNS[0]: np.asarray(brac_nodes[0], dtype=np.float64),
        BRAC_COLUMNS[1]: np.asarray(brac_nodes[1], dtype=np.float64),
    }).to_csv(brac_path, index=False)


def write_fit_table(path: PathLike, times: np.ndarray, observed: np.ndarray, fitted: np.ndarray) -> None:
    """Observed and fitted TAC per observation time, for plotting."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    observed = np.asarray(observed, dtype=np.float64)
    fitted = np.asarray(fitted, dtype=np.float64)
    pd.DataFrame({
        FIT_COLUMNS[0]: np.asarray(times, dtype=np.float64),
        FIT_COLUMNS[1]: observed,
        FIT_COLUMNS[2]: fitted,
        FIT_COLUMNS[3]: fitted - observed,
    }).to_csv(path, index=False)


def write_replicate_table(path: PathLike, reports: Iterable[McReport]) -> None:
    """One row per replicate across all reports."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    rows = [
        {
            "m": report.m,
            "replicate": r.index,
            "seed": r.seed,
            "q1_hat": r.q1,
            "q2_hat": r.q2,
            "sigma2_hat": r.sigma2_hat,
            "converged": r.converged,
            "error": r.error or "",
        }
        for report in reports
        for r in report.records
    ]
    pd.DataFrame(rows, columns=list(REPLICATE_COLUMNS)).to_csv(path, index=False)
