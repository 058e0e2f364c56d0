"""CSV inputs and JSON fixtures."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from rumtest.errors import InputError
from rumtest.geometry import Dataset, PatchStructure


def _read_rows(path, prefix: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not header or header[0] != "period":
        raise InputError(f"{path}: first column must be 'period'")
    cols = header[1:]
    expect = [f"{prefix}{k}" for k in range(1, len(cols) + 1)]
    if cols != expect:
        raise InputError(f"{path}: expected columns {['period'] + expect}, got {header}")
    for r in rows:
        if len(r) != len(header):
            raise InputError(f"{path}: row {r} has {len(r)} fields, expected {len(header)}")
    return header, rows


def _num(path, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InputError(f"{path}: not a number: {value!r}") from None


def _period(path, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise InputError(f"{path}: period labels must be integers, got {value!r}") from None


def read_prices(path) -> tuple[list[int], np.ndarray]:
    """``prices.csv`` -> (sorted period labels, T x L matrix)."""
    _, rows = _read_rows(path, "p")
    by_period: dict[int, list[float]] = {}
    for r in rows:
        t = _period(path, r[0])
        if t in by_period:
            raise InputError(f"{path}: duplicate period {t}")
        by_period[t] = [_num(path, v) for v in r[1:]]
    if not by_period:
        raise InputError(f"{path}: no periods")
    labels = sorted(by_period)
    return labels, np.array([by_period[t] for t in labels], dtype=float)


def read_choices(path, labels: list[int], L: int) -> list[np.ndarray]:
    """``choices.csv`` (one observed bundle per row) grouped by period."""
    _, rows = _read_rows(path, "q")
    pos = {t: k for k, t in enumerate(labels)}
    out: list[list[list[float]]] = [[] for _ in labels]
    for r in rows:
        t = _period(path, r[0])
        if t not in pos:
            raise InputError(f"{path}: period {t} has no prices")
        q = [_num(path, v) for v in r[1:]]
        if len(q) != L:
            raise InputError(f"{path}: bundle has {len(q)} goods, prices have {L}")
        out[pos[t]].append(q)
    return [np.array(b, dtype=float).reshape(-1, L) for b in out]


def read_patch_counts(path, labels: list[int]) -> list[dict[int, int]]:
    """``patch_counts.csv`` with header ``period,patch_index,count`` (0-based patches)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
            "period", "patch_index", "count"
        ]:
            raise InputError(f"{path}: header must be period,patch_index,count")
        pos = {t: k for k, t in enumerate(labels)}
        out: list[dict[int, int]] = [{} for _ in labels]
        for row in reader:
            t = _period(path, row["period"])
            if t not in pos:
                raise InputError(f"{path}: period {t} has no prices")
            try:
                i, c = int(row["patch_index"]), int(row["count"])
            except ValueError:
                raise InputError(f"{path}: bad row {row}") from None
            cnt = out[pos[t]]
            cnt[i] = cnt.get(i, 0) + c
    return out


def load_dataset(prices_path, choices_path=None, counts_path=None) -> Dataset:
    if (choices_path is None) == (counts_path is None):
        raise InputError("give exactly one of a choices file or a patch-counts file")
    labels, prices = read_prices(prices_path)
    if choices_path is not None:
        return Dataset(prices, bundles=read_choices(choices_path, labels, prices.shape[1]))
    return Dataset(prices, patch_counts=read_patch_counts(counts_path, labels))


def write_prices(path, prices) -> None:
    prices = np.atleast_2d(prices)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period"] + [f"p{k + 1}" for k in range(prices.shape[1])])
        for t, row in enumerate(prices):
            w.writerow([t + 1] + [repr(float(v)) for v in row])


def write_choices(path, bundles: list[np.ndarray]) -> None:
    L = next(b.shape[1] for b in bundles if len(b))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period"] + [f"q{k + 1}" for k in range(L)])
        for t, qs in enumerate(bundles):
            for q in qs:
                w.writerow([t + 1] + [repr(float(v)) for v in q])


def write_patch_counts(path, counts: list[np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "patch_index", "count"])
        for t, c in enumerate(counts):
            for i, n in enumerate(c):
                if n:
                    w.writerow([t + 1, i, int(n)])


def save_patches(path, ps: PatchStructure) -> None:
    Path(path).write_text(json.dumps(ps.to_dict(), indent=1))


def load_patches(path) -> PatchStructure:
    try:
        return PatchStructure.from_dict(json.loads(Path(path).read_text()))
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"{path}: not a patch structure file ({exc})") from None


def save_types(path, types) -> None:
    Path(path).write_text(json.dumps([list(t) for t in types]))


def load_types(path) -> list[tuple[int, ...]]:
    return [tuple(int(v) for v in t) for t in json.loads(Path(path).read_text())]
