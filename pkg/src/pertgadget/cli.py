"""Command-line front end.

Exit status: 0 success or passed check, 1 failed check, 2 usage or input
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

from . import gadgets, perturbation, vqa
from .gadgets import GadgetError, GadgetModel, RecipeSpec
from .linalg import ConvergenceError, DimensionError, lowest_eigenpairs, to_operator
from .pauli import PauliError, PauliParseError, format_pauli_sum, parse_pauli_sum

log = logging.getLogger("pertgadget")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# io helpers

def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(path: str | None, payload) -> None:
    text = payload if isinstance(payload, str) else json.dumps(payload, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


def _require_file(path: str | None, what: str) -> Path:
    if path is None:
        raise UsageError(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} {path!r} does not exist")
    return p


def _require_out_dir(path: str | None) -> None:
    if path is not None and path != "-":
        parent = Path(path).parent
        if not parent.is_dir():
            raise UsageError(f"output directory {str(parent)!r} does not exist")


def _load_gadget(path: str | None) -> GadgetModel:
    return GadgetModel.loads(_require_file(path, "--gadget").read_text())


def _load_hamiltonian(path: str | None):
    return parse_pauli_sum(_require_file(path, "--in").read_text())


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` -> geometrically spaced values; or a comma list."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            start, stop, n = float(start), float(stop), int(count)
            if n < 2 or start <= 0 or stop <= start:
                raise ValueError
            return perturbation.geometric_grid(start, stop, n)
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected start:stop:count") from None


def _int_pair(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(",")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'layer,position', got {text!r}") from None


# --------------------------------------------------------------------------
# subcommands

def cmd_gadgetize(args) -> int:
    h = _load_hamiltonian(args.input)
    _require_out_dir(args.out)
    if args.kind == gadgets.THREE_LOCAL:
        g = gadgets.build_three_local(h)
    elif args.kind == gadgets.K_LOCAL:
        if args.k_prime is None:
            raise UsageError("--k-prime is required for kind k-local")
        g = gadgets.build_k_local(h, args.k_prime)
    elif args.kind == gadgets.RECIPE:
        spec = RecipeSpec.from_json(json.loads(_require_file(args.recipe, "--recipe").read_text()))
        g = gadgets.build_from_recipe(h, spec)
    else:
        g = gadgets.build_measurement_gadget(h)
    _emit(args.out, g.dumps() + "\n")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if (args.gadget is None) == (args.input is None):
        raise UsageError("give exactly one of --gadget or --in")
    _require_out_dir(args.out)
    if args.gadget is not None:
        g = _load_gadget(args.gadget)
        if args.lam is None:
            raise UsageError("--lambda is required with --gadget")
        h, n = g.hamiltonian(args.lam), g.total_qubits
    else:
        h = _load_hamiltonian(args.input)
        n = h.n_qubits
    spec = lowest_eigenpairs(to_operator(h, n), args.levels)
    out = spec.to_json()
    if not args.vectors:
        out.pop("vectors")
    _emit(args.out, out)
    return EXIT_OK


def cmd_effective(args) -> int:
    g = _load_gadget(args.gadget)
    _require_out_dir(args.out)
    dec = perturbation.effective_hamiltonian(g, args.lam)
    out = dec.to_json()
    if args.absolute:
        out["shifted"] = False
        out["energies"] = perturbation.absolute_energies(g, dec).tolist()
        out["b_fit"] = dec.b_fit + g.ground_energy_unperturbed
    _emit(args.out, out)
    return EXIT_OK


def _write_report(report: perturbation.ScalingReport, out: str | None, csv_dir: str | None) -> None:
    _emit(out, report.to_json())
    if csv_dir is not None:
        for name in report.quantities:
            atomic_write(Path(csv_dir) / f"{report.check}_{name}.csv", report.to_csv(name))


def cmd_verify(args) -> int:
    g = _load_gadget(args.gadget)
    _require_out_dir(args.out)
    if args.csv_dir is not None and not Path(args.csv_dir).is_dir():
        raise UsageError(f"--csv-dir {args.csv_dir!r} is not a directory")
    fn = {
        "theorem1": perturbation.verify_theorem1,
        "corollary1": perturbation.verify_corollary1,
        "theorem3": perturbation.verify_theorem3,
    }[args.check]
    try:
        report = fn(g, args.grid, override=args.override_lambda_max)
    except perturbation.DegenerateGroundError as exc:
        log.error("%s", exc)
        return EXIT_FAIL
    _write_report(report, args.out, args.csv_dir)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_xi(args) -> int:
    _require_out_dir(args.out)
    ks = range(args.k, args.k + 1) if args.k_max is None else range(args.k, args.k_max + 1)
    rows = []
    for k in ks:
        row = {"k": k, "xi": perturbation.xi_constant(k)}
        if args.orders:
            row["orders"] = [{"order": list(p), "weights": list(w)}
                             for p, w in perturbation.xi_order_weights(k)]
        rows.append(row)
    _emit(args.out, {"xi": rows})
    return EXIT_OK


def cmd_bloch(args) -> int:
    _require_out_dir(args.out)
    if args.gadget is None:
        if args.order is None:
            raise UsageError("--order is required without --gadget")
        out = {"order": args.order, "series": args.series,
               "indices": [list(t) for t in perturbation.staircase_indices(args.order, args.series)]}
        _emit(args.out, out)
        return EXIT_OK
    g = _load_gadget(args.gadget)
    order = g.order if args.order is None else args.order
    out: dict = {"order": order}
    if order > 1:
        out["shift_polynomial"] = {str(m): a for m, a in
                                   perturbation.shift_polynomial(g, min(order, g.order) - 1).items()}
    if args.grid is not None:
        report = perturbation.verify_bloch(g, args.grid, order, override=args.override_lambda_max)
        out["consistency"] = report.to_json()
        _emit(args.out, out)
        return EXIT_OK if report.passed else EXIT_FAIL
    _emit(args.out, out)
    return EXIT_OK


def cmd_groups(args) -> int:
    g = _load_gadget(args.gadget)
    _require_out_dir(args.out)
    groups = gadgets.measurement_groups(g)
    _emit(args.out, {"groups": [{"name": name, "terms": format_pauli_sum(h, header=False).splitlines()}
                                for name, h in groups]})
    return EXIT_OK


def _apply_config(args, keys: Sequence[str]) -> None:
    if args.config is None:
        return
    data = json.loads(_require_file(args.config, "--config").read_text())
    unknown = set(data) - set(keys)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, value in data.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def cmd_variance(args) -> int:
    _apply_config(args, ["seed", "layers", "samples", "lam", "selector"])
    if args.seed is None:
        raise UsageError("--seed is required")
    if (args.gadget is None) == (args.input is None):
        raise UsageError("give exactly one of --gadget or --in")
    _require_out_dir(args.out)
    if args.gadget is not None:
        g = _load_gadget(args.gadget)
        lam = g.lambda_max if args.lam is None else args.lam
        h, n = g.hamiltonian(lam), g.total_qubits
    else:
        h = _load_hamiltonian(args.input)
        n = h.n_qubits
    layers = n if args.layers is None else args.layers
    samples = 200 if args.samples is None else args.samples
    summary = vqa.gradient_variance(h, n, layers, samples, args.seed, args.selector)
    _emit(args.out, summary.to_json())
    if args.csv is not None:
        atomic_write(args.csv, summary.to_csv())
    return EXIT_OK


def cmd_train(args) -> int:
    _apply_config(args, ["seed", "lam", "layers", "seeds", "learning_rate", "iterations", "ordering"])
    if args.seed is None:
        raise UsageError("--seed is required")
    if args.lam is None:
        raise UsageError("--lambda is required")
    g = _load_gadget(args.gadget)
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise UsageError(f"--out-dir {args.out_dir!r} is not a directory")
    ordering = args.ordering or ("interleave" if g.kind == gadgets.THREE_LOCAL else "natural")
    order = gadgets.interleave_order(g) if ordering == "interleave" else None
    layers = 10 if args.layers is None else args.layers
    seeds = [args.seed + i for i in range(1 if args.seeds is None else args.seeds)]
    lr = 0.05 if args.learning_rate is None else args.learning_rate
    iters = 300 if args.iterations is None else args.iterations
    ansatze = [vqa.build_ansatz(g.total_qubits, layers, s, order) for s in seeds]
    configs = [vqa.TrainConfig(lr, iters, args.lam, s) for s in seeds]
    trajs = vqa.train_many(g, ansatze, configs, jobs=args.jobs)
    for t in trajs:
        atomic_write(out_dir / f"trajectory_seed{t.config.seed}.csv", t.to_csv())
    atomic_write(out_dir / "summary.json", vqa.summary_json(trajs) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pertgadget", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gadgetize", help="build a gadget model from a Hamiltonian file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--kind", choices=gadgets.KINDS, default=gadgets.THREE_LOCAL)
    s.add_argument("--k-prime", type=int)
    s.add_argument("--recipe")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gadgetize)

    s = sub.add_parser("spectrum", help="lowest eigenvalues of a Hamiltonian or gadget")
    s.add_argument("--gadget")
    s.add_argument("--in", dest="input")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--levels", type=int, default=4)
    s.add_argument("--vectors", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("effective", help="fit the effective Hamiltonian at one lambda")
    s.add_argument("--gadget", required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--shifted", action="store_true", default=True)
    mode.add_argument("--absolute", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_effective)

    s = sub.add_parser("verify", help="scaling checks over a lambda grid")
    s.add_argument("check", choices=["theorem1", "corollary1", "theorem3"])
    s.add_argument("--gadget", required=True)
    s.add_argument("--grid", type=parse_grid, required=True)
    s.add_argument("--override-lambda-max", action="store_true")
    s.add_argument("--out")
    s.add_argument("--csv-dir")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("xi", help="energy-penalty constant of a cyclic register")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--k-max", type=int)
    s.add_argument("--orders", action="store_true", help="list every application order")
    s.add_argument("--out")
    s.set_defaults(func=cmd_xi)

    s = sub.add_parser("bloch", help="staircase indices, shift polynomial, Bloch consistency")
    s.add_argument("--gadget")
    s.add_argument("--order", type=int)
    s.add_argument("--series", choices=["A", "U"], default="A")
    s.add_argument("--grid", type=parse_grid)
    s.add_argument("--override-lambda-max", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_bloch)

    s = sub.add_parser("groups", help="qubitwise-commuting measurement groups")
    s.add_argument("--gadget", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_groups)

    s = sub.add_parser("variance", help="gradient variance over random circuits")
    s.add_argument("--gadget")
    s.add_argument("--in", dest="input")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--layers", type=int)
    s.add_argument("--samples", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--selector", type=_int_pair)
    s.add_argument("--config")
    s.add_argument("--csv")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_variance)

    s = sub.add_parser("train", help="gradient descent on the gadget cost")
    s.add_argument("--gadget", required=True)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--layers", type=int)
    s.add_argument("--seeds", type=int, help="number of runs, seeded seed, seed+1, ...")
    s.add_argument("--seed", type=int)
    s.add_argument("--learning-rate", type=float)
    s.add_argument("--iterations", type=int)
    s.add_argument("--ordering", choices=["interleave", "natural"])
    s.add_argument("--config")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_train)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, PauliParseError, PauliError, GadgetError, FileNotFoundError,
            json.JSONDecodeError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (perturbation.GapError, ConvergenceError, DimensionError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
