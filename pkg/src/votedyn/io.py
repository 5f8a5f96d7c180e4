"""Table formats and run configuration.

All tables are comma separated, UTF-8, LF line endings, with a header row.
Integers are written as integers and reals with 6 significant digits, so a
file written here survives parse-then-write byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, TextIO

import numpy as np

from .model import ListState, SiteParams
from .observations import ObservationSeries, hourly_grid
from .ode import SolveControls, Trajectory

CONFIG_ENV = "VOTEDYN_CONFIG"

TRAJECTORY_COLUMNS = ("story_id", "t_minutes", "votes", "fans_pool", "list_state", "page_position")
OBSERVATION_COLUMNS = ("story_id", "t_minutes", "votes", "s_submitter")
TRUTH_COLUMNS = ("story_id", "r", "s_submitter", "promoted", "t_promoted", "final_votes")
ENSEMBLE_COLUMNS = ("t_minutes", "mean_votes", "var_votes", "promoted_fraction")
FIT_COLUMNS = ("story_id", "s_submitter", "r_hat", "rms_votes", "rms_relative", "predicted_final",
               "predicted_promotion", "n_points", "degenerate")
BOUNDARY_COLUMNS = ("s", "r_star")


class FormatError(ValueError):
    pass


def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, ListState):
        return x.value
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        s = format(x, ".6g")
        return "0" if s == "-0" else s
    return str(x)


def format_table(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_table(path, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    text = format_table(columns, rows)
    if path is None or str(path) == "-":
        import sys
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise FormatError(f"{path}: empty file")
    return rows[0], rows[1:]


def _require(header: list[str], needed: Sequence[str], path) -> dict[str, int]:
    missing = [c for c in needed if c not in header]
    if missing:
        raise FormatError(f"{path}: missing column(s) {', '.join(missing)}")
    return {c: header.index(c) for c in header}


def _int(text: str, what: str, where: str) -> int:
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"{where}: {what} is not a number: {text!r}") from None
    if v != int(v):
        raise FormatError(f"{where}: {what} must be an integer, got {text!r}")
    return int(v)


def _float(text: str, what: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"{where}: {what} is not a number: {text!r}") from None


# -- observations ----------------------------------------------------------

def observation_rows(series: Iterable[ObservationSeries]):
    for obs in series:
        for t, v in zip(obs.t, obs.votes):
            yield obs.story_id, float(t), int(round(v)), obs.s_submitter


def write_observations(path, series: Iterable[ObservationSeries]) -> None:
    write_table(path, OBSERVATION_COLUMNS, observation_rows(series))


def read_observations(path) -> list[ObservationSeries]:
    """Parse an observation file, grouping rows by story in order of first appearance.

    Also accepts trajectory files; S is then taken as the fan pool at t = 0.
    """
    header, rows = read_table(path)
    col = _require(header, ("story_id", "t_minutes", "votes"), path)
    groups: dict[str, dict] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path} row {lineno}: expected {len(header)} fields, got {len(row)}")
        sid = row[col["story_id"]]
        where = f"{path} row {lineno} (story {sid})"
        g = groups.setdefault(sid, {"t": [], "v": [], "s": None, "rows": []})
        t = _float(row[col["t_minutes"]], "t_minutes", where)
        v = _int(row[col["votes"]], "votes", where)
        if v < 1:
            raise FormatError(f"{where}: votes must be >= 1")
        if g["t"] and t <= g["t"][-1]:
            raise FormatError(f"{where}: t_minutes not strictly increasing")
        if g["v"] and v < g["v"][-1]:
            raise FormatError(f"{where}: votes decrease ({g['v'][-1]} -> {v})")
        if "s_submitter" in col and row[col["s_submitter"]] != "":
            g["s"] = _int(row[col["s_submitter"]], "s_submitter", where)
        elif "fans_pool" in col and not g["t"] and t == 0:
            g["s"] = _int(row[col["fans_pool"]], "fans_pool", where)
        g["t"].append(t)
        g["v"].append(v)
    if not groups:
        raise FormatError(f"{path}: no data rows")
    return [ObservationSeries(sid, g["s"], np.array(g["t"]), np.array(g["v"], dtype=float))
            for sid, g in groups.items()]


# -- trajectories ----------------------------------------------------------

def trajectory_rows(story_id: str, traj: Trajectory):
    for t, n, s, lst, page in traj.rows():
        yield story_id, t, int(round(n)), s, lst, page


def write_trajectory(path, story_id: str, traj: Trajectory) -> None:
    write_table(path, TRAJECTORY_COLUMNS, trajectory_rows(story_id, traj))


def read_trajectory(path) -> list[tuple]:
    """Rows of a trajectory file as typed tuples, in file order."""
    header, rows = read_table(path)
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise FormatError(f"{path}: header must be {','.join(TRAJECTORY_COLUMNS)}")
    out = []
    for lineno, row in enumerate(rows, start=2):
        where = f"{path} row {lineno}"
        if len(row) != len(header):
            raise FormatError(f"{where}: expected {len(header)} fields")
        try:
            state = ListState(row[4])
        except ValueError:
            raise FormatError(f"{where}: unknown list_state {row[4]!r}") from None
        out.append((row[0], _float(row[1], "t_minutes", where), _int(row[2], "votes", where),
                    _float(row[3], "fans_pool", where), state, _float(row[5], "page_position", where)))
    return out


def resample(traj: Trajectory, story_id: str, cadence: float = 60.0, t_end: Optional[float] = None,
             integer_votes: bool = True) -> ObservationSeries:
    """Hourly (or ``cadence``) snapshots of a trajectory, like the site crawl."""
    t_end = float(traj.t[-1]) if t_end is None else t_end
    grid = hourly_grid(t_end, cadence)
    if grid.size == 0:
        raise ValueError(f"no observation times in (0, {t_end}] at cadence {cadence}")
    votes = traj.votes_at(grid)
    if integer_votes:
        votes = np.maximum(np.round(votes), 1.0)
    S = traj.story.S if traj.story is not None else int(round(traj.fans[0]))
    return ObservationSeries(story_id, S, grid, votes, promoted_observed=traj.promoted)


# -- configuration ---------------------------------------------------------

_ALIASES = {"lambda": "lam"}


@dataclass(frozen=True)
class RunConfig:
    site: SiteParams = field(default_factory=SiteParams)
    solve: SolveControls = field(default_factory=SolveControls)
    seed: int = 0
    mc_runs: int = 1000

    def with_overrides(self, values: dict[str, str]) -> "RunConfig":
        site_kw, solve_kw, top_kw = {}, {}, {}
        site_types = {f.name: f.type for f in dataclasses.fields(SiteParams)}
        solve_names = {f.name for f in dataclasses.fields(SolveControls)}
        for raw_key, text in values.items():
            key = _ALIASES.get(raw_key, raw_key)
            if key in site_types:
                site_kw[key] = int(text) if key == "h" else float(text)
            elif key in solve_names:
                solve_kw[key] = float(text)
            elif key in ("seed", "mc_runs"):
                top_kw[key] = int(text)
            else:
                raise ValueError(f"unknown config key {raw_key!r}")
        return dataclasses.replace(
            self,
            site=dataclasses.replace(self.site, **site_kw),
            solve=dataclasses.replace(self.solve, **solve_kw),
            **top_kw,
        )

    def items(self) -> list[tuple[str, Any]]:
        out = []
        for f in dataclasses.fields(SiteParams):
            out.append(("lambda" if f.name == "lam" else f.name, getattr(self.site, f.name)))
        for f in dataclasses.fields(SolveControls):
            out.append((f.name, getattr(self.solve, f.name)))
        out.append(("seed", self.seed))
        out.append(("mc_runs", self.mc_runs))
        return out

    def dumps(self) -> str:
        return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n" for k, v in self.items())


def parse_config(text: str, source: str = "<config>") -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value'")
        k, v = (p.strip() for p in line.split("=", 1))
        if not k or not v:
            raise ValueError(f"{source}:{lineno}: empty key or value")
        out[k] = v
    return out


def load_config(path: Optional[str] = None) -> RunConfig:
    """Defaults, overridden by ``path`` or else the file named in $VOTEDYN_CONFIG."""
    path = path or os.environ.get(CONFIG_ENV) or None
    cfg = RunConfig()
    if path:
        text = Path(path).read_text(encoding="utf-8")
        cfg = cfg.with_overrides(parse_config(text, str(path)))
    return cfg
