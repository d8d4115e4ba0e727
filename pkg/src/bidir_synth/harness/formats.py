"""Task JSON (public ARC layout) and results CSV helpers."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Sequence

from ..values import Example, Grid, Task, as_value


class TaskFormatError(ValueError):
    pass


def _raw(v):
    return v.tolist() if isinstance(v, Grid) else int(v)


def task_to_json(task: Task) -> dict:
    """ARC layout; multi-input tasks use an ``inputs`` list instead of ``input``."""

    def pair(ex: Example) -> dict:
        d = {}
        if len(ex.inputs) == 1:
            d["input"] = _raw(ex.inputs[0])
        else:
            d["inputs"] = [_raw(v) for v in ex.inputs]
        if ex.output is not None:
            d["output"] = _raw(ex.output)
        return d

    return {
        "id": task.id,
        "train": [pair(ex) for ex in task.train],
        "test": [pair(ex) for ex in task.test],
    }


def _check_grid_json(raw, where: str):
    if isinstance(raw, bool):
        raise TaskFormatError(f"{where}: booleans are not values")
    if isinstance(raw, int):
        return
    if not isinstance(raw, list) or not raw or not all(isinstance(r, list) for r in raw):
        raise TaskFormatError(f"{where}: expected a non-empty list of rows")
    widths = {len(r) for r in raw}
    if len(widths) != 1:
        raise TaskFormatError(f"{where}: ragged rows (lengths {sorted(widths)})")
    for r, row in enumerate(raw):
        for c, cell in enumerate(row):
            if isinstance(cell, bool) or not isinstance(cell, int) or not 0 <= cell <= 9:
                raise TaskFormatError(f"{where}[{r}][{c}]: color {cell!r} outside 0..9")


def task_from_json(data: dict, task_id: str | None = None, source: str = "<json>") -> Task:
    tid = task_id or data.get("id") or "task"

    def pairs(field: str, need_output: bool):
        items = data.get(field, [])
        if not isinstance(items, list):
            raise TaskFormatError(f"{source}: field {field!r} must be a list")
        out = []
        for i, item in enumerate(items):
            where = f"{source}: {field}[{i}]"
            if "input" in item:
                raw_inputs = [item["input"]]
                names = [f"{where}.input"]
            elif "inputs" in item:
                raw_inputs = list(item["inputs"])
                names = [f"{where}.inputs[{j}]" for j in range(len(raw_inputs))]
            else:
                raise TaskFormatError(f"{where}: missing 'input'")
            for raw, name in zip(raw_inputs, names):
                _check_grid_json(raw, name)
            if "output" in item:
                _check_grid_json(item["output"], f"{where}.output")
                output = as_value(item["output"])
            elif need_output:
                raise TaskFormatError(f"{where}: missing 'output'")
            else:
                output = None
            try:
                out.append(Example(tuple(as_value(r) for r in raw_inputs), output))
            except ValueError as e:
                raise TaskFormatError(f"{where}: {e}") from e
        return tuple(out)

    train = pairs("train", True)
    test = pairs("test", False)
    try:
        return Task(train, test, tid)
    except ValueError as e:
        raise TaskFormatError(f"{source}: {e}") from e


def load_arc_tasks(path) -> list[Task]:
    """Load one ARC JSON file or every ``*.json`` in a directory; ids come from file names."""
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    tasks = []
    for f in files:
        try:
            data = json.loads(f.read_text())
        except json.JSONDecodeError as e:
            raise TaskFormatError(f"{f}: invalid JSON ({e})") from e
        if not isinstance(data, dict):
            raise TaskFormatError(f"{f}: top level must be an object")
        tasks.append(task_from_json(data, task_id=f.stem, source=str(f)))
    return tasks


def save_arc_task(task: Task, path):
    d = task_to_json(task)
    d.pop("id")
    Path(path).write_text(json.dumps(d, separators=(",", ":")))


def format_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.6f}"
    return x


def export_results(table: dict, path) -> None:
    """Write ``{"header": [...], "rows": [[...], ...]}`` as CSV."""
    Path(path).write_text(format_csv(table["header"], table["rows"]))


def read_results(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return {"header": rows[0], "rows": rows[1:]}
