"""Command-line entry point: ``stochnls <command> [--config PATH] [flags]``.

Commands write their outputs plus a ``manifest.json`` echoing the resolved
configuration into ``--out``.  Passing that manifest back as ``--config``
reproduces the same files byte for byte.

Exit codes: 0 success, 1 a checked criterion failed, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import COMMANDS, ConfigError, RunConfig, load_config

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class Outputs:
    """Collects written files for the manifest."""

    def __init__(self, root: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.names: list = []

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.names.append(name)
        return path


def _finish(command: str, cfg: RunConfig, out: Outputs) -> None:
    from .numerics.reporting import manifest

    config = cfg.to_dict()
    lattice = config.pop("lattice")
    config["lattice"] = lattice
    out.write("manifest.json", manifest(command, config, None, cfg.seed, out.names + ["manifest.json"]))


# -- commands ---------------------------------------------------------------------


def cmd_expand(cfg: RunConfig, out: Outputs) -> int:
    from .functional_algebra import pretty, to_json
    from .perturbation import expand, pretty_solution

    sol = expand(cfg.kappa, cfg.order)
    for k, f in enumerate(sol.coefficients):
        out.write(f"F_{k}.json", json.dumps({"k": k, "kappa": cfg.kappa, "pretty": pretty(f, unicode=False),
                                             "terms": to_json(f)}, indent=1, sort_keys=True) + "\n")
    out.write("expansion.txt", pretty_solution(sol))
    print(pretty_solution(sol), end="")
    return EXIT_OK


def cmd_expect(cfg: RunConfig, out: Outputs) -> int:
    from .functional_algebra import pretty
    from .numerics.reporting import csv_text
    from .perturbation import expand, expectation

    sol = expand(cfg.kappa, cfg.order)
    rows = []
    for k in range(cfg.order + 1):
        e = expectation(sol, k)
        rows.append([k, pretty(e, unicode=False) if e else "0", int(not e)])
    out.write("expectation.csv", csv_text(["order", "value", "is_zero"], rows))
    for k, v, z in rows:
        print(f"E[psi] up to order {k}: {v}")
    return EXIT_OK if all(r[2] for r in rows) else EXIT_FAIL


def cmd_correlate(cfg: RunConfig, out: Outputs) -> int:
    from .deformation import diagrams_to_json
    from .numerics.evaluate import evaluate_diagram, standard_bindings
    from .numerics.kernels import CausalOps, coeff_C
    from .numerics.lattice import default_test_pairs
    from .numerics.reporting import csv_text
    from .perturbation import expand, m_point

    sol = expand(cfg.kappa, cfg.order)
    diagrams = m_point(sol, cfg.points, cfg.order)
    out.write("diagrams.json", diagrams_to_json(diagrams) + "\n")
    out.write("diagrams.txt", "".join(d.describe() + "\n" for d in diagrams))
    for i, d in enumerate(diagrams):
        out.write(f"dot/diagram_{i}.dot", d.to_dot(f"diagram_{i}"))
    for d in diagrams:
        print(d.describe())
    if cfg.points != 2 or cfg.lattice.d != 1:
        return EXIT_OK
    spec = cfg.lattice
    ops = CausalOps(spec)
    bindings = standard_bindings(coeff_C(spec, cfg.extension))
    rows = []
    for f1, f2 in default_test_pairs(spec):
        total = 0j
        for i, d in enumerate(diagrams):
            try:
                v = evaluate_diagram(d, spec, [f1, f2], bindings, ops)
            except ValueError:
                # non-forest diagrams (loops) have no message-passing evaluation
                rows.append([f"{f1.name},{f2.name}", i, d.lambda_power, "nan", "nan"])
                continue
            total += cfg.lam ** d.lambda_power * v
            rows.append([f"{f1.name},{f2.name}", i, d.lambda_power, repr(v.real), repr(v.imag)])
        rows.append([f"{f1.name},{f2.name}", "total", "", repr(total.real), repr(total.imag)])
    out.write("correlate.csv", csv_text(["pair", "diagram", "lambda_power", "value_re", "value_im"], rows))
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, out: Outputs) -> int:
    from .diagrams import admissible_trees, subcritical_report, tree_dot

    rep = subcritical_report(cfg.dim, kappa=cfg.kappa, k_max=cfg.k_max, enumerate_up_to=min(cfg.k_max, 8))
    out.write("divergence_report.csv", rep.to_csv())
    out.write("verdict.json", json.dumps(rep.verdict(), indent=2, sort_keys=True) + "\n")
    for k in range(min(cfg.dot_max, cfg.k_max) + 1):
        for i, t in enumerate(admissible_trees(cfg.kappa, k)):
            out.write(f"dot/k{k}_{i}.dot", tree_dot(t, f"k{k}_{i}"))
    v = rep.verdict()
    print(f"d={v['d']} kappa={v['kappa']}: coefficient {v['coefficient']}, subcritical={v['subcritical']}, "
          f"max divergent order {v['max_divergent_order']}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, out: Outputs) -> int:
    from .numerics.evaluate import evaluate_sum, standard_bindings
    from .numerics.kernels import QKernel, coeff_C
    from .numerics.lattice import default_test_pairs
    from .numerics.montecarlo import pair_key, simulate_linear, simulate_slopes
    from .numerics.reporting import csv_text, decay_csv, estimates_csv, scaling_csv
    from .numerics.scaling import standard_decay_rows, standard_scaling_estimates
    from .perturbation import expand, two_point

    spec = cfg.lattice
    pairs = default_test_pairs(spec)
    if "linear" in cfg.modes:
        est = simulate_linear(spec, cfg.n_real, pairs, seed=cfg.seed)
        out.write("linear_estimates.csv", estimates_csv(est))
        q = QKernel(spec)
        rows = []
        for f1, f2 in pairs:
            target = q.pair(f1, np.conj(f2.values))
            key = f"cov:{f1.name},{f2.name}"
            rows.append([key, repr(target.real), repr(target.imag), repr(est[key].zscore(target))])
        out.write("linear_targets.csv", csv_text(["observable", "target_re", "target_im", "zscore"], rows))
    if "first_order" in cfg.modes:
        lams = sorted({cfg.lam, 0.02, 0.05})
        mc = simulate_slopes(spec, lams, cfg.n_real, pairs, seed=cfg.seed, extension=cfg.extension)
        diagrams = [d for d in two_point(expand(1, 1), 1) if d.lambda_power == 1]
        bindings = standard_bindings(coeff_C(spec, cfg.extension))
        est, rows = {}, []
        for f1, f2 in pairs:
            key = pair_key(f1, f2)
            target = evaluate_sum(diagrams, spec, [f1, f2], bindings)
            for lam in lams:
                est[f"value:{key}:{lam!r}"] = mc[key]["value"][lam]
                est[f"slope:{key}:{lam!r}"] = mc[key]["slope"][lam]
                est[f"mean:{f1.name}:{lam!r}"] = mc[key]["mean"][lam]
                z = mc[key]["slope"][lam].zscore(target)
                rows.append([f"slope:{key}:{lam!r}", repr(target.real), repr(target.imag), repr(z)])
        out.write("first_order_estimates.csv", estimates_csv(est))
        out.write("first_order_targets.csv", csv_text(["observable", "target_re", "target_im", "zscore"], rows))
    if "scaling" in cfg.modes:
        out.write("scaling.csv", scaling_csv(standard_scaling_estimates()))
    if "decay" in cfg.modes:
        out.write("decay.csv", decay_csv(standard_decay_rows()))
    for name in out.names:
        print(f"wrote {out.root / name}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Outputs) -> int:
    from .acceptance import CRITERION_KEYS, format_line, run_criterion, CRITERIA
    from .numerics.reporting import csv_text

    keys = cfg.criteria or CRITERION_KEYS
    unknown = [k for k in keys if k not in CRITERION_KEYS]
    if unknown:
        raise ConfigError(f"criteria: unknown entries {unknown}; allowed: {', '.join(CRITERION_KEYS)}")
    results = []
    for c in CRITERIA:
        if c.key in keys:
            r = run_criterion(c)
            print(format_line(r), flush=True)
            results.append(r)
    rows = [[r.key, "PASS" if r.ok else "FAIL", r.detail] for r in results]
    out.write("verify.csv", csv_text(["criterion", "status", "detail"], rows))
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


HANDLERS = {
    "expand": cmd_expand, "expect": cmd_expect, "correlate": cmd_correlate,
    "analyze": cmd_analyze, "simulate": cmd_simulate, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochnls", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "expand": "perturbative coefficients F_0..F_K (JSON and text)",
        "expect": "expectation value of the deformed solution per order",
        "correlate": "correlation diagrams and their lattice values",
        "analyze": "power counting report and tree DOT files",
        "simulate": "Monte Carlo, scaling and decay numerics",
        "verify": "run the acceptance suite",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="YAML or JSON config file (or a run manifest)")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--order", type=int, help="perturbative order K")
        p.add_argument("--kappa", type=int)
        p.add_argument("--dim", type=float, help="spatial dimension for power counting")
        p.add_argument("--lambda", dest="lam", type=float, help="coupling constant")
        p.add_argument("--realizations", type=int, help="Monte Carlo sample count")
        if name == "verify":
            p.add_argument("--criteria", nargs="+", help="subset of criteria to run")
        if name == "simulate":
            p.add_argument("--modes", nargs="+", help="linear, first_order, scaling, decay")
    return parser


def _overrides(args) -> dict:
    dim = args.dim
    if dim is not None and float(dim).is_integer():
        dim = int(dim)
    out = {"seed": args.seed, "out": args.out, "order": args.order, "kappa": args.kappa, "dim": dim,
           "lambda": args.lam, "n_real": args.realizations}
    for extra in ("criteria", "modes"):
        if getattr(args, extra, None) is not None:
            out[extra] = getattr(args, extra)
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, _overrides(args))
        out = Outputs(cfg.out)
        code = HANDLERS[args.command](cfg, out)
        _finish(args.command, cfg, out)
    except ConfigError as exc:
        for msg in exc.messages:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
