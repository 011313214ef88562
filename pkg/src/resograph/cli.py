"""Command line front end.

Exit status: 0 success, 1 bad configuration or input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .embedded import Parity, RationalLengthSpec, embedded_multiplicity, loop_graph as rational_loop
from .errors import GraphError, NumericalError, ResographError
from .graph import FlowerGraph, MetricGraph, flowerize, unitarity_defect, validate
from .graphio import load_graph
from .models import FIXTURES, LoopParams, cross_graph, loop_graph
from .numerics import count_zeros, find_zeros, newton_root, track_pole
from .spectral import (exterior_is_regular, graph_family, secular_function, secular_matrix,
                       singularity_ratio, smatrix, smatrix_inverse)

COMMANDS = ("eigen", "resonances", "trajectory", "smatrix", "verify")
_LOOP_FIXTURE = re.compile(r"^(delta|delta-prime)-loop-(\d+)(-leads)?$")


class ConfigError(ResographError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    graph: str | None = None
    fixture: str | None = None
    box: tuple[float, float, float, float] | None = None
    lam: tuple[float, float] | None = None
    step: float | None = None
    tol: float = 1e-6
    out: str | None = None
    fmt: str = "csv"
    k: list[complex] = field(default_factory=list)
    predictor: str = "secant"
    rational: int | None = None
    l0: float = 1.0
    m: int = 1
    parity: str = "both"
    census: bool = False
    points: int = 50

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.tol <= 0:
            raise ConfigError("--tol must be positive")
        if self.step is not None and self.step <= 0:
            raise ConfigError("--step must be positive")
        if self.fmt not in ("csv", "json"):
            raise ConfigError("--format must be csv or json")
        if self.box is not None:
            re0, re1, im0, im1 = self.box
            if not (re1 > re0 and im1 > im0):
                raise ConfigError("--box needs re0 < re1 and im0 < im1")
        if self.graph and self.fixture:
            raise ConfigError("give either --graph or --fixture, not both")
        if self.l0 <= 0:
            raise ConfigError("--l0 must be positive")
        if self.points < 1:
            raise ConfigError("--points must be positive")


# -- inputs ---------------------------------------------------------------------------

def _workers() -> int:
    raw = os.environ.get("RESOGRAPH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RESOGRAPH_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("RESOGRAPH_THREADS must be at least 1")
    return n


def _pmap(func, items):
    items = list(items)
    workers = min(_workers(), max(len(items), 1))
    if workers == 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(func, items))


def _example_params(cfg: RunConfig):
    fx = FIXTURES.get(cfg.fixture)
    return fx.params if fx else None


def _lam_value(cfg: RunConfig, default=0.0) -> float:
    lam = cfg.lam[0] if cfg.lam else default
    if not 0 <= lam <= 1:
        raise ConfigError("lambda must lie in [0, 1] for example families")
    return lam


def resolve_graph(cfg: RunConfig) -> MetricGraph:
    """The metric graph named by --graph or --fixture (figure fixtures at lambda = --lambda a)."""
    if cfg.graph:
        g = load_graph(cfg.graph)
    elif cfg.fixture:
        m = _LOOP_FIXTURE.match(cfg.fixture)
        if m:
            kind = "delta" if m.group(1) == "delta" else "delta_prime_s"
            g = rational_loop(int(m.group(2)), kind, alpha=1.0, l0=cfg.l0, leads=1 if m.group(3) else 0)
        else:
            p = _example_params(cfg)
            if p is None:
                raise ConfigError(f"unknown fixture {cfg.fixture!r}")
            lam = _lam_value(cfg)
            if isinstance(p, LoopParams):
                if lam >= 1:
                    raise ConfigError("the loop degenerates at lambda = 1 (an edge has zero length)")
                g = loop_graph(p, lam)
            else:
                g = cross_graph(p, lam)
    else:
        raise ConfigError("one of --graph or --fixture is required")
    problems = validate(g)
    if problems:
        raise ConfigError("invalid graph: " + "; ".join(problems))
    return g


# -- commands -------------------------------------------------------------------------

def cmd_eigen(cfg: RunConfig):
    g = resolve_graph(cfg)
    fg = flowerize(g)
    n = cfg.rational if cfg.rational is not None else fg.N
    if not 1 <= n <= fg.N:
        raise ConfigError(f"--rational must lie in 1..{fg.N}")
    spec = RationalLengthSpec(cfg.l0, tuple(max(1, round(x / cfg.l0)) for x in fg.lengths[:n]))
    mismatch = np.abs(fg.lengths[:n] - spec.lengths())
    if np.any(mismatch > 1e-12 * max(1.0, cfg.l0)):
        raise ConfigError(f"the first {n} edge lengths are not integer multiples of l0 = {cfg.l0}")
    parities = [Parity.EVEN, Parity.ODD] if cfg.parity == "both" else [Parity(cfg.parity)]
    F = secular_function(fg, "compact" if fg.M == 0 else "full")
    rows = []
    for par in parities:
        k0 = spec.k0(cfg.m, par)
        rep = embedded_multiplicity(fg.U, n, par, k0=k0).as_dict()
        if cfg.census:
            r = 1e-6 * max(1.0, k0)
            rep["census"] = count_zeros(F, (k0 - r, k0 + r, -r, r), cfg.tol).count
        rows.append(rep)
    header = ["k0", "parity", "n", "rank", "multiplicity_lower_bound", "perturbed"]
    if cfg.census:
        header.append("census")
    return rows, header


def cmd_resonances(cfg: RunConfig):
    if cfg.box is None:
        raise ConfigError("resonances needs --box re0 re1 im0 im1")
    fg = flowerize(resolve_graph(cfg))
    F = secular_function(fg, "full")
    zeros = find_zeros(F, cfg.box, tol=cfg.tol)
    rows = [{"re_k": z.real, "im_k": z.imag, "multiplicity": m, "residual": abs(F(z))} for z, m in zeros]
    return rows, ["re_k", "im_k", "multiplicity", "residual"]


def _trajectory_inputs(cfg: RunConfig):
    if cfg.fixture in FIXTURES:
        fx = FIXTURES[cfg.fixture]
        family = fx.family()
        lam = cfg.lam or fx.lam_range
        step = cfg.step or fx.step
        if not all(0 <= x <= 1 for x in lam):
            raise ConfigError("lambda must lie in [0, 1] for example families")
        F = family.at(lam[0])
        starts = [newton_root(F, k) for k in cfg.k] if cfg.k else fx.starts()
        return family, starts, lam, step
    if cfg.graph or cfg.fixture:
        base = flowerize(resolve_graph(cfg))
        if not cfg.k:
            raise ConfigError("a graph trajectory needs a starting --k")
        lengths = base.lengths

        def builder(lam):
            # uniform dilation l_j (1 + lambda)
            return base.with_lengths(lengths * (1 + lam))
        family = graph_family(builder)
        lam = cfg.lam or (0.0, 0.1)
        F = family.at(lam[0])
        return family, [newton_root(F, k) for k in cfg.k], lam, cfg.step or 1e-3
    raise ConfigError("one of --graph or --fixture is required")


def cmd_trajectory(cfg: RunConfig):
    family, starts, lam, step = _trajectory_inputs(cfg)
    if cfg.predictor == "perturbative" and family.perturbative_step is None:
        raise ConfigError("the perturbative predictor needs an example fixture")

    def run(k0):
        return track_pole(family, k0, lam, step, predictor=cfg.predictor,
                          correct=cfg.predictor != "perturbative")
    trajs = _pmap(run, starts)
    rows = []
    multi = len(trajs) > 1
    for b, tr in enumerate(trajs):
        for l, re_k, im_k, res in tr.rows():
            row = {"lambda": l, "re_k": re_k, "im_k": im_k, "residual": res}
            if multi:
                row["branch"] = b
            rows.append(row)
    header = ["lambda", "re_k", "im_k", "residual"] + (["branch"] if multi else [])
    meta = [{"start": [tr.start.real, tr.start.imag], "touches": tr.touch_points(),
             "tie_breaks": tr.metadata["tie_breaks"], "halvings": tr.metadata["halvings"]}
            for tr in trajs]
    return rows, header, meta


def cmd_smatrix(cfg: RunConfig):
    fg = flowerize(resolve_graph(cfg))
    if fg.M < 1:
        raise ConfigError("the graph has no leads")
    re0, re1, im0, im1 = cfg.box if cfg.box else (0.5, 10.0, 0.0, 0.0)
    if cfg.box is None or im0 == im1:
        ks = np.linspace(re0, re1, cfg.points) + 1j * im0
    else:
        side = max(int(round(math.sqrt(cfg.points))), 1)
        X, Y = np.meshgrid(np.linspace(re0, re1, side), np.linspace(im0, im1, side))
        ks = (X + 1j * Y).ravel()
    S = smatrix(ks, fg)
    rows = []
    for k, Sk in zip(ks, S):
        for i in range(fg.M):
            for j in range(fg.M):
                rows.append({"re_k": k.real, "im_k": k.imag, "row": i, "col": j,
                             "re_s": Sk[i, j].real, "im_s": Sk[i, j].imag})
    return rows, ["re_k", "im_k", "row", "col", "re_s", "im_s"]


def verify_graph(fg: FlowerGraph, box, tol=1e-6, eps=1e-4) -> dict:
    """Equivalence, unitarity and pole-count checks for one graph."""
    report = {"N": fg.N, "M": fg.M, "coupling_unitarity_defect": unitarity_defect(fg.U)}
    report["coupling_unitary"] = report["coupling_unitarity_defect"] <= 1e-12
    if fg.M:
        ks = np.linspace(max(box[0], 0.1), box[1], 25)
        defect = max(unitarity_defect(s) for s in smatrix(ks, fg))
        report["smatrix_unitarity_defect"] = defect
        report["smatrix_unitary"] = defect <= 1e-10
        try:
            z_res = find_zeros(secular_function(fg, "full"), box, tol=tol)
            z_sinv = find_zeros(secular_function(fg, "sinv"), box, tol=tol)
            r1 = [singularity_ratio(lambda w: smatrix_inverse(w, fg), z) for z, _ in z_res]
            r2 = [singularity_ratio(lambda w: secular_matrix(w, fg), z) for z, _ in z_sinv]
        except NumericalError as exc:
            # typically an embedded eigenvalue inside the box, where S is undefined
            report["equivalence_error"] = str(exc)
            report["equivalent"] = False
        else:
            report["resolvent_zeros"] = sum(m for _, m in z_res)
            report["sinv_zeros"] = sum(m for _, m in z_sinv)
            report["equivalent"] = (report["resolvent_zeros"] == report["sinv_zeros"]
                                    and all(r < 1e-6 for r in r1 + r2))
    F0 = secular_function(fg, "full")
    scaled = fg.with_lengths(fg.lengths * (1 + eps))
    c0 = count_zeros(F0, box, tol).count
    c1 = count_zeros(secular_function(scaled, "full"), box, tol).count
    report["census_before"], report["census_after"] = c0, c1
    report["exterior_regular"] = bool(exterior_is_regular(complex((box[0] + box[1]) / 2), fg.blocks()[3]))
    report["pole_count_conserved"] = c0 == c1
    report["ok"] = all(v for key, v in report.items() if isinstance(v, bool))
    return report


def cmd_verify(cfg: RunConfig):
    fg = flowerize(resolve_graph(cfg))
    box = cfg.box or (0.5, 12.0, -1.5, 0.0)
    report = verify_graph(fg, box, cfg.tol)
    return report


# -- output ---------------------------------------------------------------------------

def _to_json(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _render(rows, header, fmt, meta=None) -> str:
    if fmt == "json":
        payload = {"rows": rows} if meta is None else {"rows": rows, "branches": meta}
        return json.dumps(payload, indent=2, default=_to_json) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    return buf.getvalue()


def run(cfg: RunConfig) -> tuple[str, bool]:
    """Execute one command; returns the rendered output and whether all checks passed."""
    if cfg.command == "eigen":
        rows, header = cmd_eigen(cfg)
        return _render(rows, header, cfg.fmt), True
    if cfg.command == "resonances":
        rows, header = cmd_resonances(cfg)
        return _render(rows, header, cfg.fmt), True
    if cfg.command == "trajectory":
        rows, header, meta = cmd_trajectory(cfg)
        return _render(rows, header, cfg.fmt, meta if cfg.fmt == "json" else None), True
    if cfg.command == "smatrix":
        rows, header = cmd_smatrix(cfg)
        return _render(rows, header, cfg.fmt), True
    report = cmd_verify(cfg)
    if cfg.fmt == "json":
        return json.dumps(report, indent=2, default=_to_json) + "\n", report["ok"]
    return _render([report], list(report), "csv"), report["ok"]


def _complex_arg(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="resograph", description="Resonances and embedded eigenvalues of quantum graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [("eigen", "embedded-eigenvalue rank report"),
                            ("resonances", "zeros of the secular determinant in a box"),
                            ("trajectory", "follow resonance poles along lambda"),
                            ("smatrix", "S-matrix on a grid of k"),
                            ("verify", "consistency checks for a graph")]:
        s = sub.add_parser(name, help=help_text)
        s.add_argument("--graph", help="graph definition file (JSON)")
        s.add_argument("--fixture", help="named example: " + ", ".join(FIXTURES)
                       + ", delta-loop-<n>[-leads], delta-prime-loop-<n>[-leads]")
        s.add_argument("--box", nargs=4, type=float, metavar=("RE0", "RE1", "IM0", "IM1"))
        s.add_argument("--lambda", dest="lam", nargs="+", type=float, metavar="X",
                       help="parameter range a b (a alone selects one value)")
        s.add_argument("--step", type=float)
        s.add_argument("--tol", type=float, default=1e-6)
        s.add_argument("--out", help="output path (default stdout)")
        s.add_argument("--format", dest="fmt", choices=["csv", "json"],
                       default="json" if name == "verify" else "csv")
        if name == "trajectory":
            s.add_argument("--k", type=_complex_arg, action="append", default=[],
                           help="starting pole, repeatable (e.g. 6.28-0.1j)")
            s.add_argument("--predictor", choices=["secant", "previous", "perturbative"], default="secant")
        if name == "eigen":
            s.add_argument("--rational", type=int, help="number of leading edges with lengths n_j * l0")
            s.add_argument("--l0", type=float, default=1.0)
            s.add_argument("--m", type=int, default=1, help="k0 = 2 m pi / l0 or (2m + 1) pi / l0")
            s.add_argument("--parity", choices=["even", "odd", "both"], default="both")
            s.add_argument("--census", action="store_true", help="also count zeros at k0")
        if name == "smatrix":
            s.add_argument("--points", type=int, default=50)
    return p


def config_from_args(ns) -> RunConfig:
    lam = None
    if ns.lam is not None:
        if len(ns.lam) > 2:
            raise ConfigError("--lambda takes one or two values")
        lam = tuple(ns.lam) if len(ns.lam) == 2 else (ns.lam[0], ns.lam[0])
    kw = dict(command=ns.command, graph=ns.graph, fixture=ns.fixture,
              box=tuple(ns.box) if ns.box else None, lam=lam, step=ns.step, tol=ns.tol,
              out=ns.out, fmt=ns.fmt)
    for name in ("k", "predictor", "rational", "l0", "m", "parity", "census", "points"):
        if hasattr(ns, name):
            kw[name] = getattr(ns, name)
    return RunConfig(**kw)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        text, ok = run(cfg)
    except (ConfigError, GraphError, ValueError, KeyError) as exc:
        print(f"resograph: configuration error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"resograph: numerical failure: {exc}", file=sys.stderr)
        return 2
    if cfg.out:
        try:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"resograph: cannot write {cfg.out}: {exc.strerror}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
