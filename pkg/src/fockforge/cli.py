"""Config-driven command-line entry point.

A run is described by a JSON config with a ``command`` field; artifacts are
written into the output directory deterministically (same config + seed give
byte-identical files).  Exit codes: 0 success, 1 verification failure,
2 config/parse error, 3 missing file, 4 exactness budget overflow.

Commands: graphs, psi, rmatrix, propagator, transform, ancestor, verify,
anomaly.  The FOCKFORGE_THREADS variable caps suite parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

from .fields import FE, FieldElem
from .fock import CorrelatorTable, WKFamily, jets_of, wk_element
from .frobenius import (
    FrobeniusPoint,
    canonical_data,
    check_r_ode,
    check_unitary,
    p1_frobenius,
    points_frobenius,
    solve_R,
    v_series_from_mu,
)
from .graphs import graphs_to_json
from .psi import intersection_table
from .quantize import (
    Propagator,
    abstract_ancestor,
    feynman_transform,
    genus1_superdet_jets,
    givental_propagator,
    propagator_crosscheck,
    quantum_det_poly,
    random_propagator,
    random_tame_table,
    vertex_sections,
)
from .series import MatSeries, scalar_exp_series

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_OVERFLOW = 4

COMMANDS = (
    "graphs",
    "psi",
    "rmatrix",
    "propagator",
    "transform",
    "ancestor",
    "verify",
    "anomaly",
)


@dataclass
class RunConfig:
    command: str
    options: Dict
    seed: int
    out_dir: Path
    fmt: str

    @staticmethod
    def load(path: str, seed: int, out_dir: str, fmt: str) -> "RunConfig":
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(path)
        data = json.loads(p.read_text())
        command = data.get("command")
        if command not in COMMANDS:
            raise ValueError(f"unknown command {command!r}")
        for key in ("g", "n", "g_max", "n_max", "bound", "cutoff", "z_order", "q0_order"):
            if key in data and not (isinstance(data[key], int) and data[key] >= 0):
                raise ValueError(f"option {key} must be a non-negative integer")
        return RunConfig(
            command=command,
            options=data,
            seed=data.get("seed", seed),
            out_dir=Path(out_dir),
            fmt=fmt,
        )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FOCKFORGE_THREADS", "1")))
    except ValueError:
        return 1


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def emit_table(table: CorrelatorTable, fmt: str, path: Path) -> Path:
    """Write a jet table: JSON round-trips losslessly, CSV is for reading."""
    if fmt == "json":
        _write(path.with_suffix(".json"), table.to_json() + "\n")
        return path.with_suffix(".json")
    if fmt == "csv":
        _write(path.with_suffix(".csv"), table.to_csv())
        return path.with_suffix(".csv")
    raise ValueError(f"unknown format {fmt!r}")


def _load_frobenius(options: Dict) -> FrobeniusPoint:
    name = options.get("frobenius")
    if name == "p1":
        return p1_frobenius()
    if isinstance(name, list):
        return points_frobenius([FE(Fraction(x)) for x in name])
    path = options.get("frobenius_file")
    if path:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(path)
        return FrobeniusPoint.from_json(p.read_text())
    raise ValueError("config needs 'frobenius' (p1 | [u...]) or 'frobenius_file'")


def _propagator_to_json(prop: Propagator) -> Dict:
    return {
        "colors": prop.ncolors,
        "cutoff": prop.cutoff,
        "entries": [
            {"a": list(a), "b": list(b), "value": v.to_json()}
            for (a, b), v in sorted(prop.entries.items())
        ],
    }


def _propagator_from_json(data: Dict) -> Propagator:
    prop = Propagator(ncolors=data["colors"], cutoff=data["cutoff"])
    for item in data["entries"]:
        prop.set(tuple(item["a"]), tuple(item["b"]), FieldElem.from_json(item["value"]))
    return prop


# ----------------------------------------------------------------- commands


def _cmd_graphs(cfg: RunConfig) -> int:
    g, n = cfg.options["g"], cfg.options["n"]
    _write(cfg.out_dir / "graphs.json", graphs_to_json(g, n) + "\n")
    return EXIT_OK


def _cmd_psi(cfg: RunConfig) -> int:
    bound = cfg.options.get("bound", 9)
    rows = intersection_table(bound)
    lines = ["genus,exponents,value"]
    for g, exps, val in rows:
        lines.append(f"{g},\"{' '.join(map(str, exps))}\",{val}")
    _write(cfg.out_dir / "psi.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def _mat_json(m) -> List[List]:
    return [[v.to_json() for v in row] for row in m]


def _cmd_rmatrix(cfg: RunConfig) -> int:
    point = _load_frobenius(cfg.options)
    order = cfg.options.get("z_order", 6)
    data = canonical_data(point)
    v = v_series_from_mu(point, data, order)
    r = solve_R(data.u, v, order)
    blob = {
        "u": [x.to_json() for x in data.u],
        "delta": [x.to_json() for x in data.delta],
        "sqrt_delta": [x.to_json() for x in data.sqrt_delta],
        "psi": _mat_json(data.psi),
        "r_coefficients": [_mat_json(r.coeff(k)) for k in range(order + 1)],
        "unitary": check_unitary(r),
        "ode_residual_zero": check_r_ode(data.u, v, r),
    }
    _write(cfg.out_dir / "rmatrix.json", json.dumps(blob, indent=2) + "\n")
    return EXIT_OK if blob["unitary"] and blob["ode_residual_zero"] else EXIT_VERIFY


def _cmd_propagator(cfg: RunConfig) -> int:
    cutoff = cfg.options.get("cutoff", 4)
    if "scalar_exponent" in cfg.options:
        a = FE(Fraction(cfg.options["scalar_exponent"]))
        r = scalar_exp_series(a, 2 * cutoff + 2)
    else:
        point = _load_frobenius(cfg.options)
        data = canonical_data(point)
        order = 2 * cutoff + 2
        v = v_series_from_mu(point, data, order)
        r = solve_R(data.u, v, order)
    prop = givental_propagator(r, cutoff)
    cross = propagator_crosscheck(r, cutoff)
    agree = prop.entries == cross.entries
    blob = _propagator_to_json(prop)
    blob["crosscheck_agrees"] = agree
    _write(cfg.out_dir / "propagator.json", json.dumps(blob, indent=2) + "\n")
    return EXIT_OK if agree else EXIT_VERIFY


def _cmd_transform(cfg: RunConfig) -> int:
    table_path = Path(cfg.options["table_file"])
    if not table_path.exists():
        raise FileNotFoundError(str(table_path))
    table = CorrelatorTable.from_json(table_path.read_text())
    prop_path = Path(cfg.options["propagator_file"])
    if not prop_path.exists():
        raise FileNotFoundError(str(prop_path))
    prop = _propagator_from_json(json.loads(prop_path.read_text()))
    out = feynman_transform(
        table,
        prop,
        g_max=cfg.options.get("g_max"),
        n_max=cfg.options.get("n_max"),
    )
    emit_table(out, cfg.fmt, cfg.out_dir / "transformed")
    return EXIT_OK


def _cmd_ancestor(cfg: RunConfig) -> int:
    point = _load_frobenius(cfg.options)
    g_max = cfg.options.get("g_max", 1)
    n_max = cfg.options.get("n_max", 1)
    elem = abstract_ancestor(
        point,
        g_max=g_max,
        n_max=n_max,
        q0_order=cfg.options.get("q0_order"),
        z_order=cfg.options.get("z_order"),
    )
    outputs = cfg.options.get("outputs", ["jets"])
    base = cfg.options.get("base_point")
    base_vec = (
        [FieldElem.from_json(v) for v in base] if base is not None else None
    )
    if "jets" in outputs:
        table = jets_of(elem, base=base_vec)
        emit_table(table, "json", cfg.out_dir / "ancestor_jets")
        emit_table(table, "csv", cfg.out_dir / "ancestor_jets")
    if "closed_form" in outputs:
        blob = {
            "d1": [x.to_json() for x in elem.d1],
            "genus1_dlog_at_base": [
                rf.evaluate(list(elem.base_point())).to_json()
                for rf in elem.genus1_dlog
            ],
            "entries": {
                f"{g}|" + ";".join(f"{l},{c}" for l, c in key):
                    elem.jet(g, key).evaluate(list(elem.base_point())).to_json()
                for (g, key) in sorted(elem.entries)
            },
        }
        _write(cfg.out_dir / "ancestor_closed_form.json", json.dumps(blob, indent=2) + "\n")
    return EXIT_OK


def _suite_cocycle(seed: int) -> bool:
    rng = random.Random(seed)
    ncolors = 1 if seed % 2 == 0 else 2
    g_max, n_final = 2, 1
    targets = [
        (g, n)
        for g in range(g_max + 1)
        for n in range(n_final + 1)
        if 2 * g - 2 + n > 0
    ]
    sections = vertex_sections(targets)
    big_n = max(n for _, n in sections)
    t = random_tame_table(rng, ncolors, g_max, big_n, q0_order=big_n, level_cap=3, density=0.35)
    d12 = random_propagator(rng, ncolors, cutoff=7, support=3)
    d23 = random_propagator(rng, ncolors, cutoff=7, support=3)
    lhs = feynman_transform(t, d12 + d23, g_max=g_max, n_max=n_final)
    mid = feynman_transform(t, d12, g_max=g_max, n_max=big_n, sections=sections)
    rhs = feynman_transform(mid, d23, g_max=g_max, n_max=n_final)
    keys = set(lhs.entries) | set(rhs.entries)
    return all(lhs.get(g, k) == rhs.get(g, k) for g, k in keys)


def _suite_antisymmetry(seed: int) -> bool:
    rng = random.Random(seed)
    g_max, n_final = 2, 1
    targets = [
        (g, n)
        for g in range(g_max + 1)
        for n in range(n_final + 1)
        if 2 * g - 2 + n > 0
    ]
    sections = vertex_sections(targets)
    big_n = max(n for _, n in sections)
    t = random_tame_table(rng, 1, g_max, big_n, q0_order=big_n, level_cap=3, density=0.3)
    d = random_propagator(rng, 1, cutoff=7, support=3)
    mid = feynman_transform(t, d, g_max=g_max, n_max=big_n, sections=sections)
    back = feynman_transform(mid, -d, g_max=g_max, n_max=n_final)
    keys = {k for k in t.entries if len(k[1]) <= n_final} | set(back.entries)
    return all(back.get(g, key) == t.get(g, key) for g, key in keys)


def _suite_propagator(seed: int) -> bool:
    rng = random.Random(seed)
    from .series import mat_from_rows

    dim = 2 if seed % 2 == 0 else 3
    cutoff = 5
    order = 2 * cutoff + 1
    us = rng.sample([0, 1, 2, 3, 5, 7, -1, -2], dim)
    coeffs = []
    from .series import mat_zero

    for k in range(order + 1):
        m = [[FE(0)] * dim for _ in range(dim)]
        for i in range(dim):
            for j in range(i, dim):
                val = FE(Fraction(rng.randint(-5, 5), rng.randint(1, 3)))
                if k % 2 == 0:
                    if i != j:
                        m[i][j] = val
                        m[j][i] = -val
                else:
                    m[i][j] = val
                    m[j][i] = val
        coeffs.append(mat_from_rows(m))
    v = MatSeries(coeffs)
    r = solve_R([FE(x) for x in us], v, order)
    return givental_propagator(r, cutoff).entries == propagator_crosscheck(r, cutoff).entries


SUITES = {
    "cocycle": _suite_cocycle,
    "antisymmetry": _suite_antisymmetry,
    "propagator": _suite_propagator,
}


def _cmd_verify(cfg: RunConfig) -> int:
    suite = cfg.options.get("suite", "cocycle")
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    count = cfg.options.get("count", 5)
    fn = SUITES[suite]
    seeds = [cfg.seed + k for k in range(count)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(fn, seeds))
    report = {
        "suite": suite,
        "seeds": seeds,
        "passed": sum(1 for r in results if r),
        "failed": [s for s, r in sorted(zip(seeds, results)) if not r],
    }
    _write(cfg.out_dir / "verify.json", json.dumps(report, indent=2) + "\n")
    return EXIT_OK if not report["failed"] else EXIT_VERIFY


def _cmd_anomaly(cfg: RunConfig) -> int:
    from .anomaly import verify_anomaly, verify_curvature_condition

    cases = [tuple(x) for x in cfg.options.get("cases", [[1, 2], [2, 1]])]
    texts = []
    ok = True
    for g, n in cases:
        cert = verify_anomaly(g, n)
        ok = ok and cert.ok
        texts.append(cert.text())
    curv = verify_curvature_condition()
    ok = ok and curv.ok
    texts.append(curv.text())
    _write(cfg.out_dir / "anomaly_certificates.txt", "\n".join(texts))
    return EXIT_OK if ok else EXIT_VERIFY


_RUNNERS = {
    "graphs": _cmd_graphs,
    "psi": _cmd_psi,
    "rmatrix": _cmd_rmatrix,
    "propagator": _cmd_propagator,
    "transform": _cmd_transform,
    "ancestor": _cmd_ancestor,
    "verify": _cmd_verify,
    "anomaly": _cmd_anomaly,
}


def run(cfg: RunConfig) -> int:
    return _RUNNERS[cfg.command](cfg)


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="fockforge")
    parser.add_argument("--config", required=True, help="path to a JSON run config")
    parser.add_argument("--seed", type=int, default=20240801)
    parser.add_argument("--out", default=".", help="artifact directory")
    parser.add_argument("--format", default="json", choices=["json", "csv"])
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config, args.seed, args.out, args.format)
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except FileNotFoundError as exc:
        print(f"missing file: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except OverflowError as exc:
        print(f"exactness budget overflow: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
