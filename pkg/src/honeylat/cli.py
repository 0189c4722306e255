"""honeylat command line.

Exit codes: 0 ok, 1 usage, 2 configuration, 3 numeric failure, 4 acceptance failure.
Every run writes its tables into --out together with manifest.json (inputs,
versions, timings, outputs).  Floats are printed with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, HoneylatError, InvalidArgument

COMMANDS = ("bands", "dirac", "slice", "nofold", "edge-sweep", "kpar-sweep",
            "effective-1d", "v11-scan", "verify")


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


class Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.t0 = time.perf_counter()
        self.timings = {}

    def csv(self, name, header, rows):
        p = self.out / name
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([fmt(v) for v in r])
        self.files.append(name)
        return p

    def json(self, name, obj):
        p = self.out / name
        # json floats round-trip exactly; that is the 17-digit guarantee here
        p.write_text(json.dumps(jsonable(obj), indent=1))
        self.files.append(name)
        return p

    def lap(self, key):
        self.timings[key] = time.perf_counter() - self.t0

    def manifest(self, status="ok", extra=None):
        import scipy
        a = {k: v for k, v in vars(self.args).items() if k != "func"}
        m = {"command": self.args.command, "args": a, "status": status, "outputs": self.files,
             "timings_s": {**self.timings, "total": time.perf_counter() - self.t0},
             "versions": {"honeylat": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                          "python": platform.python_version()},
             "threads": self.args.threads}
        if extra:
            m.update(extra)
        (self.out / "manifest.json").write_text(json.dumps(jsonable(m), indent=1))


# ---------------------------------------------------------------- helpers

def threads_from(args):
    env = os.environ.get("HONEYLAT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"HONEYLAT_THREADS={env!r} is not an integer")
        if n < 1:
            raise ConfigError("HONEYLAT_THREADS must be >= 1")
        return n
    return max(1, int(args.threads))


def potentials(args):
    from .geometry import make_lattice
    from .potential import builtin_potentials, load_potential
    lat = make_lattice(1.0)
    V, W = builtin_potentials(lat)
    if args.potential != "builtin":
        if not os.path.exists(args.potential):
            raise ConfigError(f"potential file {args.potential} not found")
        V = load_potential(args.potential)
    if getattr(args, "wpotential", None):
        W = load_potential(args.wpotential)
    if W.lattice.a != V.lattice.a:
        W = type(W)(V.lattice, dict(W.coeffs))
    return V, W


def edge_of(args):
    from .geometry import edge_frame, parse_edge
    a1, b1 = parse_edge(args.edge)
    return edge_frame(a1, b1)


def floats(s, name):
    try:
        return [float(x) for x in str(s).split(",") if x.strip()]
    except ValueError:
        raise InvalidArgument(f"{name}: cannot parse {s!r} as a comma list of numbers")


def grid(spec, name):
    """'a:b:n' (inclusive linspace) or 'x,y,z'."""
    if ":" in str(spec):
        try:
            a, b, n = str(spec).split(":")
            return list(np.linspace(float(a), float(b), int(n)))
        except ValueError:
            raise InvalidArgument(f"{name}: expected a:b:n, got {spec!r}")
    return floats(spec, name)


def wall_of(args):
    from .potential import make_wall, make_wall_flat
    if args.wall == "tanh":
        return make_wall("tanh", args.kappa_inf, args.width)
    if args.wall == "natural":
        return make_wall_flat(args.amplitude, args.kappa_inf, args.width)
    raise InvalidArgument(f"unknown wall {args.wall!r}")


# ---------------------------------------------------------------- commands

def cmd_bands(args, run):
    from .bloch import band_surface, bands_at
    V, _ = potentials(args)
    V = V.scaled(args.eps)
    lat = V.lattice
    if args.grid:
        rows = band_surface(V, args.nk, args.M, args.n_bands, threads=threads_from(args))
        run.csv("bands_grid.csv", ["k1_frac", "k2_frac", "band", "E"], rows)
        return
    G, K = np.zeros(2), lat.K
    Mp = lat.k1 / 2
    path = [("G", G), ("K", K), ("M", Mp), ("G", G)]
    rows, s = [], 0.0
    for (_, a), (_, b) in zip(path[:-1], path[1:]):
        for u in np.linspace(0, 1, args.nk, endpoint=False):
            k = a + u * (b - a)
            E = bands_at(V, k, args.M, args.n_bands)
            for j, e in enumerate(E):
                rows.append((s + u * np.linalg.norm(b - a), k[0], k[1], j + 1, e))
        s += np.linalg.norm(b - a)
    run.csv("bands_path.csv", ["s", "kx", "ky", "band", "E"], rows)


def cmd_dirac(args, run):
    from .bloch import find_dirac_point, lambda_sharp, theta_sharp
    V, W = potentials(args)
    dp = find_dirac_point(V, args.M, eps=args.eps)
    sl, lam, slopes = lambda_sharp(dp)
    th = theta_sharp(dp, W)
    run.json("dirac.json", {"eps": args.eps, "M": args.M, "E_star": dp.E_star, "b_star": dp.b_star,
                            "lambda_sharp_abs": sl, "lambda_sharp_fourier": abs(lam),
                            "cone_slopes": slopes, "cone_anisotropy": dp.cone["anisotropy"],
                            "theta_sharp": th, "E_tilde": dp.E_tilde, "gap_to_next": dp.gap_to_next,
                            "spectrum_K": dp.spectrum_K[:8]})


def cmd_slice(args, run):
    from .slice import dispersion_slice
    V, _ = potentials(args)
    e = edge_of(args)
    lam = np.linspace(-0.5, 0.5, args.n_lambda)
    curves = dispersion_slice(V.scaled(args.eps), e, lam, args.n_bands, args.M, threads_from(args))
    rows = [(l, c.b, E) for c in curves for l, E in zip(c.lambdas, c.energies)]
    run.csv("slice.csv", ["lambda", "b", "E"], rows)


def cmd_nofold(args, run):
    from .bloch import find_dirac_point
    from .slice import no_fold_check
    V, _ = potentials(args)
    e = edge_of(args)
    dp = find_dirac_point(V, args.M, eps=args.eps)
    rep = no_fold_check(V.scaled(args.eps), e, dp, a_param=args.a_param, M=args.M,
                        threads=threads_from(args))
    d = rep.to_dict()
    d["witness"] = d.get("witness_lambda")
    d.update({"eps": args.eps, "edge": [e.a1, e.b1]})
    run.json("nofold.json", d)
    print(json.dumps({"pass": rep.passed, "witness": rep.witness_lambda}))


def _edge_cfg(args, e):
    from .edge import SupercellConfig
    return SupercellConfig(edge=e, N=args.N, M1=args.M, M2=args.M2, eps=args.eps,
                           delta=args.delta, wall=wall_of(args), method=args.method,
                           k_par=args.kpar)


def cmd_edge_sweep(args, run):
    from .edge import sweep_delta
    V, W = potentials(args)
    e = edge_of(args)
    deltas = grid(args.deltas, "--deltas") if args.deltas else [args.delta]
    sw = sweep_delta(V, W, e, args.eps, deltas, _edge_cfg(args, e), n_eigs=args.n_eigs,
                     threads=threads_from(args))
    run.csv("edge_sweep.csv", ["axis_value", "E", "is_localized", "ipr", "decay_rate"], sw.rows())
    run.json("edge_sweep_meta.json", {"E_ref": sw.E_ref, **sw.meta})


def cmd_kpar_sweep(args, run):
    from .edge import sweep_kpar
    V, W = potentials(args)
    e = edge_of(args)
    ks = grid(args.kpars, "--kpars") if args.kpars else [e.kpar_at_K]
    sw = sweep_kpar(V, W, e, args.eps, args.delta, ks, _edge_cfg(args, e), n_eigs=args.n_eigs,
                    threads=threads_from(args))
    run.csv("kpar_sweep.csv", ["axis_value", "E", "is_localized", "ipr", "decay_rate"], sw.rows())
    run.json("kpar_sweep_meta.json", {"E_ref": sw.E_ref, **sw.meta})


def cmd_effective_1d(args, run):
    from . import effective as ef
    w = wall_of(args)
    if args.model == "dirac":
        D = ef.DiracOperator1D(vF=args.vF, theta=args.theta, wall=w, L=args.L, n=args.n)
        sp = ef.dirac_spectrum(D, args.n_eigs)
        run.csv("dirac_spectrum.csv", ["theta_or_param", "eig_index", "E"],
                [(args.theta, i, E) for i, E in enumerate(sp.energies)])
        v = sp.vectors[:, sp.zero_index]
        n = len(D.grid)
        run.csv("dirac_mode.csv", ["zeta", "re_plus", "im_plus", "re_minus", "im_minus"],
                [(z, a.real, a.imag, b.real, b.imag) for z, a, b in zip(D.grid, v[:n], v[n:])])
        run.json("dirac_summary.json", {"E0": sp.E0, "mode_error": ef.mode_error(D, sp)})
        return
    from .bloch import find_dirac_point
    from .geometry import edge_frame
    V, _ = potentials(args)
    e = edge_of(args) if args.edge else edge_frame(1, 0)
    m = ef.effective_mass(V.scaled(args.eps), e.frak_K2, M=args.M)
    H = ef.effective_schrodinger(m, w)
    if args.model == "schrodinger":
        b = ef.bound_states(H)
        run.csv("schrodinger_spectrum.csv", ["theta_or_param", "eig_index", "E"],
                [(0.0, i, E) for i, E in enumerate(b)])
        run.json("schrodinger_summary.json", {"m_eff": m, "bound_states": b, "wall": w.label})
        return
    A, wn = ef.natural_amplitude(H)
    th = np.linspace(0, 1, args.n_theta)
    from .potential import make_wall
    tr = ef.protection_homotopy(make_wall("tanh", args.kappa_inf, args.width), wn, th, m)
    rows = []
    for t, E0, bs in zip(tr.thetas, tr.dirac_E0, tr.schrodinger):
        rows.append((t, 0, E0))
        rows += [(t, i + 1, E) for i, E in enumerate(bs)]
    run.csv("homotopy_spectra.csv", ["theta_or_param", "eig_index", "E"], rows)
    run.json("homotopy_summary.json", {"m_eff": m, "amplitude": A, "theta_star": tr.theta_star,
                                       "max_dirac_E0": float(np.max(np.abs(tr.dirac_E0))),
                                       "note": "eig_index 0 is the Dirac zero mode, >= 1 the Schroedinger bound states"})


def cmd_v11_scan(args, run):
    from .potential import dog_bump, gaussian_bump, v11_scan
    spec = gaussian_bump(args.s, args.structure) if args.bump == "gaussian" else dog_bump(structure=args.structure)
    rows = v11_scan(spec, grid(args.a_values, "--a-values"))
    sgn = np.sign([r[1] for r in rows])
    flip = [0] + [int(sgn[i] != sgn[i - 1]) for i in range(1, len(rows))]
    run.csv("v11_scan.csv", ["a", "V11_poisson", "V11_quadrature", "sign_flip"],
            [(a, p, q, f) for (a, p, q), f in zip(rows, flip)])


def cmd_verify(args, run):
    root = Path(__file__).resolve().parents[2]
    test = root / "tests" / "test_acceptance.py"
    if not test.exists():
        raise ConfigError(f"acceptance suite not found at {test}")
    cmd = [sys.executable, "-m", "pytest", "-q", "-s", str(test)]
    if args.only:
        cmd += ["-k", args.only]
    t = time.perf_counter()
    r = subprocess.run(cmd, cwd=root)
    run.json("verify.json", {"returncode": r.returncode, "seconds": time.perf_counter() - t, "command": cmd})
    if r.returncode != 0:
        raise SystemExit(4)


HANDLERS = {"bands": cmd_bands, "dirac": cmd_dirac, "slice": cmd_slice, "nofold": cmd_nofold,
            "edge-sweep": cmd_edge_sweep, "kpar-sweep": cmd_kpar_sweep,
            "effective-1d": cmd_effective_1d, "v11-scan": cmd_v11_scan, "verify": cmd_verify}


def build_parser():
    common = Parser(add_help=False)
    common.add_argument("--potential", default="builtin", help="builtin or a JSON coefficient file")
    common.add_argument("--wpotential", default=None, help="JSON file for W (default builtin)")
    common.add_argument("--eps", type=float, default=10.0)
    common.add_argument("--delta", type=float, default=0.1)
    common.add_argument("--edge", default="zigzag", help="zigzag, armchair or a1,b1")
    common.add_argument("--kpar", type=float, default=None)
    common.add_argument("--M", type=int, default=8)
    common.add_argument("--N", type=int, default=64)
    common.add_argument("--out", default="honeylat_out")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0)

    p = Parser(prog="honeylat", description="honeycomb band structures, Dirac points and edge states")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=Parser)
    s = sub.add_parser("bands", parents=[common])
    s.add_argument("--nk", type=int, default=40)
    s.add_argument("--n-bands", type=int, default=6)
    s.add_argument("--grid", action="store_true", help="full k1,k2 grid instead of the G-K-M-G path")
    sub.add_parser("dirac", parents=[common])
    s = sub.add_parser("slice", parents=[common])
    s.add_argument("--n-lambda", type=int, default=513)
    s.add_argument("--n-bands", type=int, default=3)
    s = sub.add_parser("nofold", parents=[common])
    s.add_argument("--a-param", type=float, default=0.01)
    for name in ("edge-sweep", "kpar-sweep"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("--M2", type=int, default=4)
        s.add_argument("--method", choices=("planewave", "fd"), default="planewave")
        s.add_argument("--n-eigs", type=int, default=8)
        s.add_argument("--wall", choices=("tanh", "natural"), default="tanh")
        s.add_argument("--kappa-inf", type=float, default=1.0)
        s.add_argument("--width", type=float, default=1.0)
        s.add_argument("--amplitude", type=float, default=-1.0)
        if name == "edge-sweep":
            s.add_argument("--deltas", default=None, help="a:b:n or comma list")
        else:
            s.add_argument("--kpars", default=None, help="a:b:n or comma list")
    s = sub.add_parser("effective-1d", parents=[common])
    s.add_argument("--model", choices=("dirac", "schrodinger", "homotopy"), default="dirac")
    s.add_argument("--vF", type=float, default=1.0)
    s.add_argument("--theta", type=float, default=1.0)
    s.add_argument("--L", type=float, default=40.0)
    s.add_argument("--n", type=int, default=513)
    s.add_argument("--n-eigs", type=int, default=8)
    s.add_argument("--n-theta", type=int, default=11)
    s.add_argument("--wall", choices=("tanh", "natural"), default="tanh")
    s.add_argument("--kappa-inf", type=float, default=1.0)
    s.add_argument("--width", type=float, default=1.0)
    s.add_argument("--amplitude", type=float, default=-1.0)
    s = sub.add_parser("v11-scan", parents=[common])
    s.add_argument("--structure", choices=("honeycomb", "triangular"), default="honeycomb")
    s.add_argument("--bump", choices=("gaussian", "dog"), default="gaussian")
    s.add_argument("--s", type=float, default=0.15)
    s.add_argument("--a-values", default="0.5:2.0:31")
    s = sub.add_parser("verify", parents=[common])
    s.add_argument("--only", default=None, help="pytest -k expression")
    return p


def main(argv=None):
    p = build_parser()
    args = p.parse_args(argv)
    if args.command is None:
        p.print_usage(sys.stderr)
        return 1
    run = None
    try:
        args.threads = threads_from(args)
        run = Run(args)
        HANDLERS[args.command](args, run)
        run.lap(args.command)
        run.manifest()
        return 0
    except SystemExit as exc:
        if run is not None:
            run.manifest(status=f"exit {exc.code}")
        return int(exc.code or 0)
    except HoneylatError as exc:
        print(f"honeylat {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        if run is not None:
            run.manifest(status="error", extra={"error": f"{type(exc).__name__}: {exc}"})
        return exc.exit_code
    except (np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"honeylat {args.command}: numeric failure: {exc}", file=sys.stderr)
        if run is not None:
            run.manifest(status="error", extra={"error": repr(exc)})
        return 3


if __name__ == "__main__":
    sys.exit(main())
