"""Command-line interface: test CSV datasets, run simulation suites, apply operators.

Everything is seed-controlled and emits plain CSV/JSON so results can be
consumed by any downstream tooling. Exit codes for ``test``: 0 = null not
rejected, 3 = rejected, other nonzero = error.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .estimation import Sample
from .functionals import ShapeSpec, functional_for_shape
from .grids import Grid, GridFunction, norm
from .inference import GammaRule, TestConfig, run_test
from .operators import ShapeOperator, apply as apply_op
from .simulation import (
    DEFAULT_GRID_BI,
    McCell,
    alternative_design,
    null_design,
    resolve_threads,
    results_to_csv,
    run_mc,
)

SHAPES = {
    "mon": "monotone",
    "con": "convex",
    "conc": "concave",
    "mon-con": "monotone_convex",
    "mon-conc": "monotone_concave",
}

UNI_BASES = [("cubic3", 3, 3), ("cubic5", 3, 5), ("cubic7", 3, 7)]
BI_BASES = [("quad0", 2, 0), ("quad1", 2, 1), ("cubic0", 3, 0), ("cubic1", 3, 1)]
SIZES = (500, 750, 1000)

SIZE_SUITES = {
    "size-mon-uni": ("uni1", "monotone", UNI_BASES),
    "size-mon-bi": ("bi1", "monotone", BI_BASES),
    "size-con-uni": ("uni1", "convex", UNI_BASES),
    "size-conc-bi": ("bi2", "concave", BI_BASES),
    "size-moncon-uni": ("uni1", "monotone_convex", UNI_BASES),
    "size-monconc-bi": ("bi2", "monotone_concave", BI_BASES),
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"shapetest: error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapetest",
        description="Bootstrap tests of shape restrictions for nonparametric regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test a shape restriction on a CSV dataset")
    t.add_argument("csv_path", help="CSV with columns y, z1[, z2], optional w1..wq")
    t.add_argument("--shape", choices=sorted(SHAPES), default="mon")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--basis", choices=["quadratic", "cubic"], default="cubic")
    t.add_argument("--knots", type=int, default=5, help="interior knots per axis")
    t.add_argument("--gamma-rule", default="logn", help="logn, invn or fixed:G")
    t.add_argument("--bootstrap", type=int, default=200, metavar="B")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--threads", type=int, default=None)
    t.add_argument("--z-range", default=None, metavar="LO,HI", help="keep rows with z in [LO, HI]")
    t.add_argument("--grid", type=int, default=None, metavar="N", help="reporting grid points per axis")
    t.add_argument("--output", default=None, help="also write the JSON report here")
    t.set_defaults(handler=cmd_test)

    s = sub.add_parser("simulate", help="run a Monte Carlo suite")
    s.add_argument("suite", choices=sorted(SIZE_SUITES) + ["power-curves"])
    s.add_argument("--reps", type=int, default=500)
    s.add_argument("--bootstrap", type=int, default=200, metavar="B")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--gamma-rule", default="logn", help="logn, invn, fixed:G or all")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=None)
    s.add_argument("--grid", type=int, default=None, metavar="N")
    s.add_argument("--family", default="uni1", help="design family for power-curves")
    s.add_argument("--shape", choices=sorted(SHAPES), default="mon", help="restriction for power-curves")
    s.add_argument("--n", type=int, default=500, help="sample size for power-curves")
    s.add_argument("--designs", default=None, help="comma list, e.g. D1,D3")
    s.add_argument("--bases", default=None, help="comma list, e.g. cubic5")
    s.add_argument("--sizes", default=None, help="comma list of sample sizes")
    s.add_argument("--deltas", default=None, help="comma list of power-curve deltas")
    s.add_argument("--timings", action="store_true", help="fill the runtime_ms column")
    s.add_argument("--output", default=None, help="CSV path (default: stdout)")
    s.set_defaults(handler=cmd_simulate)

    o = sub.add_parser("operators", help="apply a shape operator to gridded CSV values")
    o.add_argument("csv_path", help="CSV with columns z[,z2] and value, forming a rectangular grid")
    o.add_argument(
        "--op",
        choices=["rearrange", "gcm", "lcm", "rearrange-gcm", "rearrange-lcm"],
        default="rearrange",
    )
    o.add_argument("--output", default=None, help="CSV path (default: stdout)")
    o.set_defaults(handler=cmd_operators)
    return parser


def read_dataset(path):
    """Parse y, z1[, z2], w1..wq columns from a headed CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if "y" not in header or "z1" not in header:
        raise ValueError(f"{path}: need at least columns y and z1, got {header}")
    zcols = [c for c in header if c == "z1" or c == "z2"]
    if "z2" in header and len(zcols) != 2:
        raise ValueError(f"{path}: z columns must be z1[, z2]")
    wcols = sorted(
        (c for c in header if c.startswith("w") and c[1:].isdigit()),
        key=lambda c: int(c[1:]),
    )
    try:
        data = np.array([[float(cell) for cell in row] for row in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell: {exc}") from None
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    col = {name: data[:, i] for i, name in enumerate(header)}
    y = col["y"]
    z = np.column_stack([col[c] for c in zcols])
    w = np.column_stack([col[c] for c in wcols]) if wcols else None
    return y, z, w


def cmd_test(args) -> int:
    y, z, w = read_dataset(args.csv_path)
    if args.z_range:
        lo, hi = (float(part) for part in args.z_range.split(","))
        keep = np.all((z >= lo) & (z <= hi), axis=1)
        y, z = y[keep], z[keep]
        w = w[keep] if w is not None else None
    if y.size < 20:
        raise ValueError(f"only {y.size} usable rows; too few to fit the sieve")
    sample = Sample(y=y, z=z, w=w)
    dim = sample.dim
    shape = ShapeSpec(SHAPES[args.shape], dim)
    npts = args.grid or (DEFAULT_GRID_BI if dim == 2 else 88)
    axes = tuple(
        tuple(np.linspace(z[:, j].min(), z[:, j].max(), npts)) for j in range(dim)
    )
    config = TestConfig(
        functional=functional_for_shape(shape),
        gamma_op=shape.gamma_operator(),
        grid=Grid(axes=axes),
        alpha=args.alpha,
        gamma_rule=GammaRule.parse(args.gamma_rule),
        bootstrap_draws=args.bootstrap,
        seed=args.seed,
        basis_degree=3 if args.basis == "cubic" else 2,
        basis_knots=args.knots,
    )
    report = run_test(sample, config, threads=resolve_threads(args.threads))
    report.provenance["shape"] = args.shape
    report.provenance["basis"] = args.basis
    report.provenance["z_range"] = args.z_range
    report.provenance["input"] = args.csv_path
    text = report.to_json()
    print(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 3 if report.reject else 0


def _parse_list(text, cast):
    return None if text is None else [cast(part) for part in text.split(",") if part]


def suite_cells(args):
    """Expand a suite name (plus filters) into Monte Carlo cells."""
    if args.suite == "power-curves":
        restriction = SHAPES[args.shape]
        bases = BI_BASES if args.family.startswith("bi") else UNI_BASES
        bases = _filter(bases, _parse_list(args.bases, str), key=lambda b: b[0])
        deltas = _parse_list(args.deltas, float) or [float(d) for d in range(11)]
        cells = [
            McCell(
                design=alternative_design(args.family, d, n=args.n, restriction=restriction),
                restriction=restriction,
                basis_degree=deg,
                basis_knots=kn,
            )
            for (label, deg, kn) in bases
            for d in deltas
        ]
        return cells, True
    family, restriction, bases = SIZE_SUITES[args.suite]
    designs = _parse_list(args.designs, str) or ["D1", "D2", "D3"]
    bases = _filter(bases, _parse_list(args.bases, str), key=lambda b: b[0])
    sizes = _parse_list(args.sizes, int) or list(SIZES)
    cells = [
        McCell(
            design=null_design(family, label, n=n),
            restriction=restriction,
            basis_degree=deg,
            basis_knots=kn,
        )
        for label in designs
        for (blabel, deg, kn) in bases
        for n in sizes
    ]
    return cells, False


def _filter(items, wanted, key):
    if not wanted:
        return items
    chosen = [item for item in items if key(item) in wanted]
    if not chosen:
        raise ValueError(f"no match for filter {wanted}")
    return chosen


def cmd_simulate(args) -> int:
    cells, power = suite_cells(args)
    if args.gamma_rule == "all":
        rules = [GammaRule("logn"), GammaRule("invn"), GammaRule("fixed", 0.01)]
    else:
        rules = [GammaRule.parse(args.gamma_rule)]
    results = run_mc(
        cells,
        reps=args.reps,
        bootstrap_draws=args.bootstrap,
        alpha=args.alpha,
        gamma_rules=rules,
        grid_points=args.grid,
        seed=args.seed,
        threads=resolve_threads(args.threads),
    )
    text = results_to_csv(results, power=power, timings=args.timings)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def read_grid_function(path) -> GridFunction:
    """Parse a rectangular grid of values from CSV columns z[,z2], value."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(c) for c in row] for row in reader if row]
    if header[-1] != "value":
        raise ValueError(f"{path}: last column must be 'value', got {header}")
    coords = np.array([row[:-1] for row in rows])
    values = np.array([row[-1] for row in rows])
    d = coords.shape[1]
    axes = [np.unique(coords[:, j]) for j in range(d)]
    expected = int(np.prod([ax.size for ax in axes]))
    if expected != values.size:
        raise ValueError(f"{path}: points do not form a rectangular grid")
    order = np.lexsort(tuple(coords[:, j] for j in reversed(range(d))))
    sorted_coords = coords[order]
    grid = Grid(axes=tuple(tuple(ax) for ax in axes))
    if not np.allclose(sorted_coords, grid.points()):
        raise ValueError(f"{path}: points do not form a rectangular grid")
    return GridFunction(grid, values[order])


OPERATOR_BUILDERS = {
    "rearrange": ShapeOperator.rearrangement,
    "gcm": ShapeOperator.convex_minorant,
    "lcm": ShapeOperator.concave_majorant,
    "rearrange-gcm": lambda: ShapeOperator.compose(
        ShapeOperator.rearrangement(), ShapeOperator.convex_minorant()
    ),
    "rearrange-lcm": lambda: ShapeOperator.compose(
        ShapeOperator.rearrangement(), ShapeOperator.concave_majorant()
    ),
}


def cmd_operators(args) -> int:
    f = read_grid_function(args.csv_path)
    op = OPERATOR_BUILDERS[args.op]()
    transformed = apply_op(op, f)
    residual = norm(f - transformed, np.inf)
    pts = f.grid.points()
    lines = []
    header = (
        ["z"] if f.grid.dim == 1 else [f"z{j + 1}" for j in range(f.grid.dim)]
    ) + ["value", "transformed"]
    lines.append(",".join(header))
    for i in range(f.grid.size):
        coord = ",".join(f"{c:g}" for c in pts[i])
        lines.append(f"{coord},{f.values[i]:.10g},{transformed.values[i]:.10g}")
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"op={args.op} residual_sup={residual:.10g}")
    else:
        sys.stdout.write(text)
        print(f"op={args.op} residual_sup={residual:.10g}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
