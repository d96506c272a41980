"""Command-line front end.

    robust-screening solve --input instance.json
    robust-screening sweep --input instance.json --item 0 --bound lower --start 1e-4 --stop 0.5

Every command reads one JSON file and writes JSON (default) or CSV to stdout
or ``--output``.  Exit status: 0 success, 1 bad input, 2 failed verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from . import adversary, bundles, semi_separable, separable, verify
from .errors import ScreeningError
from .model import CollectionSpec, Instance, PartitionSpec

COMMANDS = ("solve", "price-law", "compare", "adversary", "verify", "bundle-solve", "sweep")


@dataclass(frozen=True)
class RunConfig:
    command: str
    input_path: str
    tol: float = 1e-10
    seed: int = 0
    grid: int = 200
    samples: int = 100_000
    format: str = "json"
    output: str | None = None
    xi_grid: int = 10_000
    item: int = 0
    bound: str = "lower"
    start: float | None = None
    stop: float | None = None
    points: int = 50

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ScreeningError(f"unknown command {self.command!r}")
        if not self.tol > 0:
            raise ScreeningError("--tol must be positive")
        if self.grid < 2:
            raise ScreeningError("--grid must be at least 2")
        if self.samples < 0:
            raise ScreeningError("--samples must be nonnegative")
        if self.format not in ("json", "csv"):
            raise ScreeningError("--format must be json or csv")


class VerificationFailed(Exception):
    def __init__(self, payload):
        super().__init__("verification failed")
        self.payload = payload


def _num(x: float) -> str:
    return format(float(x), ".12g")


def _floats(a) -> list[float]:
    return [float(x) for x in a]


def _table(header: list[str], rows) -> dict:
    return {"header": header, "rows": [list(r) for r in rows]}


# Each handler returns (json payload, csv table).


def _solve(cfg: RunConfig, inst: Instance):
    sol = semi_separable.solve_gamma_star(inst, min(cfg.tol, 1e-12))
    if sol.degenerate:
        wc_ratio, wc = 0.0, inst.upper.copy()
    else:
        wc_ratio, wc = semi_separable.worst_case_ratio(sol.gamma_star, inst)
    sep, split = separable.joint_ratio(inst)
    payload = {
        "gamma": sol.gamma_star,
        "active_set": sorted(sol.active_set),
        "degenerate": sol.degenerate,
        "iterations": sol.iterations,
        "phi_residual": sol.phi_residual,
        "order": list(sol.order),
        "worst_case_valuation": _floats(wc),
        "worst_case_ratio": wc_ratio,
        "separable": {
            "ratio": sep,
            "split": split,
            "item_ratios": _floats(separable.item_ratios(inst)),
        },
    }
    active = set(sol.active_set)
    rows = [
        [k, it.name, _num(it.lower), _num(it.upper), int(k in active), _num(wc[k]), _num(r)]
        for k, (it, r) in enumerate(zip(inst.items, separable.item_ratios(inst)))
    ]
    header = ["index", "name", "lower", "upper", "active", "worst_case_value", "separable_item_ratio"]
    return payload, _table(header, rows)


def _price_law(cfg: RunConfig, inst: Instance):
    sol = semi_separable.solve_gamma_star(inst, min(cfg.tol, 1e-12))
    law = semi_separable.price_law(sol.gamma_star, inst)
    body = law.to_dict(inst.names)
    payload = {"gamma": sol.gamma_star, "items": body["items"]}
    keys = list(body["items"][0].keys())
    rows = [[row[k] if isinstance(row[k], str) else _num(row[k]) for k in keys] for row in body["items"]]
    return payload, _table(keys, rows)


def _compare(cfg: RunConfig, inst: Instance):
    sol = semi_separable.solve_gamma_star(inst, min(cfg.tol, 1e-12))
    sep, split = separable.joint_ratio(inst)
    payload = {
        "separable_ratio": sep,
        "separable_split": split,
        "semi_separable_ratio": sol.gamma_star,
        "improvement": sol.gamma_star - sep,
        "gap": None,
        "two_item_closed_form": None,
    }
    if int(np.count_nonzero(inst.lower > 0)) == 1:
        payload["gap"] = semi_separable.gap_vs_separable(inst)
    if inst.n_items == 2:
        g, case = semi_separable.two_item_closed_form(inst)
        payload["two_item_closed_form"] = {"gamma": g, "case": case}
    rows = [
        ["separable_ratio", _num(sep)],
        ["semi_separable_ratio", _num(sol.gamma_star)],
        ["improvement", _num(sol.gamma_star - sep)],
    ]
    if payload["gap"] is not None:
        rows.append(["gap", _num(payload["gap"])])
    return payload, _table(["quantity", "value"], rows)


def _adversary(cfg: RunConfig, inst: Instance):
    eta = adversary.eta_star(inst, cfg.tol)
    if eta <= 0:
        raise ScreeningError("adversary needs at least one positive lower bound")
    dist = adversary.build(eta, inst)
    payload = dist.to_dict()
    payload["best_response_value"] = adversary.best_response_value(dist)
    payload["samples"] = cfg.samples
    payload["seed"] = cfg.seed
    # samples only go to the CSV form
    xi = adversary.sample_xi(dist, cfg.samples if cfg.format == "csv" else 0, cfg.seed)
    v = adversary.valuation_at(dist, xi).reshape(len(xi), inst.n_items)
    header = ["xi"] + [f"v_{j + 1}" for j in range(inst.n_items)]
    rows = ([_num(x)] + [_num(y) for y in row] for x, row in zip(xi, v))
    return payload, _table(header, rows)


def _verify(cfg: RunConfig, inst: Instance):
    rep = verify.saddle_certificate(inst, tol=cfg.tol, grid_points_per_dim=cfg.grid, xi_grid=cfg.xi_grid)
    payload = rep.to_dict()
    for k in ("max_ic_violation", "max_ir_violation"):
        if isinstance(payload[k], float) and math.isnan(payload[k]):
            payload[k] = None
    rows = [[k, payload[k] if isinstance(payload[k], str) else _num(payload[k])]
            for k in ("gamma_star", "grid_min_ratio", "best_response_value", "best_response_grid",
                      "max_ic_violation", "max_ir_violation", "grid_resolution", "verdict")
            if payload[k] is not None]
    table = _table(["quantity", "value"], rows)
    if not rep.passed:
        raise VerificationFailed((payload, table))
    return payload, table


def _bundle_solve(cfg: RunConfig, raw: dict):
    if "bundles" in raw:
        sol = bundles.solve_partition(PartitionSpec.from_dict(raw))
        cands = [(sol.partition, sol.gamma_star_B)]
    elif "subsets" in raw:
        sol, cands = bundles.best_partition(CollectionSpec.from_dict(raw))
    else:
        raise ScreeningError('bundle input needs a "bundles" or "subsets" list')
    best = sol.to_dict()
    best["guarantee"] = sol.gamma_star_B
    payload = {
        "best": best,
        "candidates": [{"partition": p.blocks, "gamma": g} for p, g in cands],
    }
    rows = [[json.dumps(p.blocks, separators=(",", ":")), _num(g)] for p, g in cands]
    return payload, _table(["partition", "gamma"], rows)


def _sweep(cfg: RunConfig, inst: Instance):
    j = cfg.item
    if not 0 <= j < inst.n_items:
        raise ScreeningError(f"--item {j} out of range")
    if cfg.bound not in ("lower", "upper"):
        raise ScreeningError("--bound must be lower or upper")
    if cfg.start is None or cfg.stop is None or cfg.start <= 0 or cfg.stop <= 0:
        raise ScreeningError("--start and --stop must be positive")
    if cfg.points < 2:
        raise ScreeningError("--points must be at least 2")
    bounds = [[it.lower, it.upper] for it in inst.items]
    col = 0 if cfg.bound == "lower" else 1
    rows = []
    for x in np.geomspace(cfg.start, cfg.stop, cfg.points):
        bounds[j][col] = float(x)
        point = Instance.from_bounds(bounds, inst.names)
        sep, _ = separable.joint_ratio(point)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            semi = semi_separable.solve_gamma_star(point, min(cfg.tol, 1e-12)).gamma_star
        rows.append({"parameter": float(x), "separable_ratio": sep, "semi_separable_ratio": semi})
    payload = {"item": j, "bound": cfg.bound, "rows": rows}
    keys = ["parameter", "separable_ratio", "semi_separable_ratio"]
    return payload, _table(keys, ([_num(r[k]) for k in keys] for r in rows))


HANDLERS = {
    "solve": _solve,
    "price-law": _price_law,
    "compare": _compare,
    "adversary": _adversary,
    "verify": _verify,
    "sweep": _sweep,
}


def _load(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScreeningError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScreeningError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScreeningError("input must be a JSON object")
    return raw


def _render(cfg: RunConfig, payload, table) -> str:
    if cfg.format == "json":
        return json.dumps(payload, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table["header"])
    w.writerows(table["rows"])
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output:
        with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    try:
        raw = _load(cfg.input_path)
        if cfg.command == "bundle-solve":
            payload, table = _bundle_solve(cfg, raw)
        else:
            payload, table = HANDLERS[cfg.command](cfg, Instance.from_dict(raw))
    except VerificationFailed as exc:
        _emit(cfg, _render(cfg, *exc.payload))
        return 2
    except (ScreeningError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(cfg, _render(cfg, payload, table))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, dest="input_path", metavar="PATH")
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--grid", type=int, default=200)
    common.add_argument("--samples", type=int, default=100_000)
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", metavar="PATH")

    parser = argparse.ArgumentParser(prog="robust-screening", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "optimal threshold mechanism and separate-selling baseline",
        "price-law": "randomized posted-price table of the optimal mechanism",
        "compare": "separate selling vs the optimal semi-separable ratio",
        "adversary": "worst-case ray distribution (JSON summary or CSV samples)",
        "verify": "saddle-point certificate; exit 2 when it fails",
        "bundle-solve": "partition or best partition of a bundle collection",
        "sweep": "vary one bound geometrically and tabulate both ratios",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "verify":
            p.add_argument("--xi-grid", type=int, default=10_000, dest="xi_grid")
        if name == "sweep":
            p.add_argument("--item", type=int, default=0)
            p.add_argument("--bound", choices=("lower", "upper"), default="lower")
            p.add_argument("--start", type=float, required=True)
            p.add_argument("--stop", type=float, required=True)
            p.add_argument("--points", type=int, default=50)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(**vars(args))
    except ScreeningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
