"""Run artifacts: trajectory.csv, convergence.csv, report.txt and a copy of the scenario."""

import csv
import logging
import shutil
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
CONVERGENCE_FILE = "convergence.csv"
REPORT_FILE = "report.txt"
SCENARIO_FILE = "scenario.scn"
SWEEP_FILE = "sweep.csv"
COMPARE_FILE = "compare.csv"

CONVERGENCE_COLUMNS = ("section", "iteration", "J", "g_max", "alpha", "reg", "approx_share")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def trajectory_columns(nx: int, nu: int) -> List[str]:
    return (
        ["stage", "t_days"]
        + [f"x{i}" for i in range(nx)]
        + [f"u{j}" for j in range(nu)]
        + ["thrust_N", "mass_kg"]
    )


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from e


def write_trajectory(
    path: Path,
    states: Sequence[np.ndarray],
    controls: Sequence[np.ndarray],
    dt_days: float,
    thrust_unit: float,
    mass_unit: float,
    mass_index=None,
) -> None:
    """One row per node; the last node carries empty control cells. States and controls are normalized."""
    nx, nu = len(states[0]), len(controls[0])
    rows = []
    for k, x in enumerate(states):
        mass = x[mass_index] * mass_unit if mass_index is not None else None
        if k < len(controls):
            u = controls[k]
            control_cells = list(u) + [float(np.linalg.norm(u)) * thrust_unit]
        else:
            control_cells = [None] * (nu + 1)
        rows.append([k, k * dt_days, *x, *control_cells, mass])
    write_csv(path, trajectory_columns(nx, nu), rows)


def read_trajectory(path: Path) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Normalized states and controls back from trajectory.csv."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = list(reader)
    nx = sum(1 for name in header if name.startswith("x"))
    nu = sum(1 for name in header if name.startswith("u"))
    states, controls = [], []
    for row in rows:
        states.append(np.array([float(v) for v in row[2:2 + nx]]))
        cells = row[2 + nx:2 + nx + nu]
        if all(cells):
            controls.append(np.array([float(v) for v in cells]))
    return states, controls


def write_report(path: Path, fields: Dict[str, object]) -> None:
    lines = [f"{key}: {_cell(value)}" for key, value in fields.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_report(path: Path) -> Dict[str, str]:
    fields = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if ": " in line:
            key, value = line.split(": ", 1)
            fields[key] = value
        elif line.endswith(":"):
            fields[line[:-1]] = ""
    return fields


def copy_scenario(source: Union[str, Path, None], out_dir: Path) -> None:
    if source is None:
        return
    shutil.copyfile(source, out_dir / SCENARIO_FILE)


def prepare_dir(out_dir: Union[str, Path]) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir
