"""Command-line front end: ``cs-limits {bounds,rd,simulate,phase,verify}``.

Exit codes: 0 success/pass, 1 property violation, 2 usage error,
3 budget exceeded.  Rates are in nats unless ``--bits`` is given, which
only changes what is printed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional

from . import bounds
from .decoders import verify_event_bounds, verify_superposition_containment
from .exceptions import BudgetExceededError, ConvergenceError, OutOfRegimeError
from .harness import ExperimentConfig, phase_diagram, run_experiment, verify_fano
from .model import Channel, SignalClass, SignalKind, sample_matrix, sample_signal
from .rng import trial_seed
from .spectral import sigma_g_min, verify_concentration

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3

BOUND_COLUMNS = ["theorem_id", "direction", "regime", "snr_threshold", "m_threshold", "m_exact",
                 "m_floor", "vacuous", "out_of_regime", "notes"]


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# output helpers

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def render(rows: list, columns: list, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: _jsonable(r.get(c)) for c in columns} for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _nats(x, bits: bool):
    if x is None:
        return None
    return x / math.log(2) if bits else x


# --------------------------------------------------------------------------
# bounds

def _report_row(rep: bounds.BoundReport) -> dict:
    return {c: getattr(rep, c) for c in BOUND_COLUMNS}


def cmd_bounds(args) -> int:
    n, beta = args.n, args.beta
    if args.k is None and args.alpha is None:
        raise UsageError("give --k or --alpha")
    k = args.k if args.k is not None else max(1, round(args.alpha * n))
    alpha = args.alpha if args.alpha is not None else k / n
    if not 1 <= k < n:
        raise UsageError("need 1 <= k < n")
    snr = args.snr if args.snr is not None else math.log(n)
    channel = Channel.OUTPUT if args.channel == "output" else Channel.INPUT
    regime = None if args.regime == "auto" else args.regime
    rows = []

    def add(fn, theorem_id, direction, floor=None):
        try:
            rep = fn()
        except OutOfRegimeError as exc:
            rep = bounds.BoundReport(theorem_id, direction, bounds.regime_of(alpha),
                                     m_threshold=floor, m_floor=floor, out_of_regime=True,
                                     notes=str(exc))
        except ConvergenceError as exc:
            rep = bounds.BoundReport(theorem_id, direction, bounds.regime_of(alpha), notes=str(exc))
        for r in rep if isinstance(rep, tuple) else (rep,):
            rows.append(_report_row(r))

    if channel is Channel.OUTPUT:
        add(lambda: bounds.necessary_thresholds_output(n, k, beta, snr), "output-necessity", "Necessary")
        add(lambda: bounds.sufficient_thresholds_output(n, k, beta, regime), "output-sufficiency",
            "Sufficient", floor=2 * k + 1)
        if args.sigma_g_min is not None:
            add(lambda: bounds.sufficient_thresholds_deterministic(args.sigma_g_min, args.lambda_min, n, beta, k),
                "deterministic-sufficiency", "Sufficient")
    else:
        add(lambda: bounds.necessary_threshold_input(n, alpha, beta, snr), "input-necessity", "Necessary")
    if args.d0 is not None:
        if channel is Channel.OUTPUT:
            add(lambda: bounds.approx_support_sufficient(n, k, beta, args.d0), "approx-support-sufficiency",
                "Sufficient")
        model = ("Output" if channel is Channel.OUTPUT else "Input") + "Binary"
        add(lambda: bounds.bayes_thresholds(model, n, alpha, beta, snr, args.d0), "bayes", "Necessary")
        if channel is Channel.OUTPUT:
            add(lambda: bounds.bayes_explicit_corollary(n, alpha, beta, args.d0), "bayes-explicit", "Necessary")
    emit(render(rows, BOUND_COLUMNS, args.format), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# rd

def cmd_rd(args) -> int:
    rows = []
    unit = "bits" if args.bits else "nats"
    for d0 in args.d0:
        if args.source == "binary":
            rate = bounds.rd_binary_hamming(args.alpha, d0)
        else:
            rate = bounds.rd_mixture_gaussian(args.alpha, args.sigma0sq, args.sigma1sq, d0)
        rows.append(dict(source=args.source, alpha=args.alpha, d0=d0, rate=_nats(rate, args.bits), unit=unit))
    emit(render(rows, ["source", "alpha", "d0", "rate", "unit"], args.format), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate / phase

def _load_config(path) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_json(path)
    except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
        raise UsageError(f"bad config {path}: {exc}") from exc


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    result = run_experiment(config, args.threads)
    emit(result.to_json() if args.format == "json" else result.to_csv(), args.out)
    return EXIT_OK


def cmd_phase(args) -> int:
    config = _load_config(args.config)
    try:
        table = phase_diagram(config, args.threads)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    from .harness import ExperimentResult
    result = ExperimentResult(config, [table[key] for key in sorted(table)])
    emit(result.to_json() if args.format == "json" else result.to_csv(), args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# verify

VERIFY_COLUMNS = {
    "superposition": ["lemma", "n", "k", "m", "snr", "trials", "sigma_g_min", "e1_hits", "atomic_hits",
                      "violations", "union_bound", "vacuous", "pass"],
    "concentration": ["lemma", "n", "k", "m", "epsilon", "trials", "eta", "sigma_tail_freq", "delta1",
                      "norm_tail_freq", "delta2", "sigma_simulated", "vacuous", "pass"],
    "e1e2": ["lemma", "n", "k", "m", "snr", "trials", "sigma_g_min", "e1_freq", "p_e1_ub", "e2_freq",
             "p_e2_ub", "vacuous", "pass"],
    "fano": ["lemma", "n", "k", "m", "snr", "trials", "errors", "p_emp", "ci_lo", "ci_hi", "fano_lb",
             "vacuous", "pass"],
}


def _instance(args, m):
    G = sample_matrix(m, args.n, rng_seed=trial_seed(args.seed, 0))
    x0 = sample_signal(SignalClass(args.n, args.k, args.beta, SignalKind.EXACTLY_K), trial_seed(args.seed, 1))
    return G, x0


def cmd_verify(args) -> int:
    lemma = args.lemma
    base = dict(lemma=lemma, n=args.n, k=args.k, trials=args.trials, vacuous=args.trials == 0)
    rows = []
    ok = True
    if lemma in ("superposition", "e1e2"):
        m = args.m if args.m is not None else 2 * args.k + 1
        G, x0 = _instance(args, m)
        snr = args.snr
        if snr is None:
            sg = sigma_g_min(G, args.k)
            # put the atomic-event threshold at one noise standard deviation
            snr = 16.0 / (sg * args.beta) ** 2 if sg > 0 else 1.0
        if lemma == "superposition":
            rep = verify_superposition_containment(G, x0, args.k, args.beta, args.trials, trial_seed(args.seed, 2), snr)
            ok = rep.violations == 0
            rows.append(dict(base, m=m, snr=snr, sigma_g_min=rep.sigma_g_min, e1_hits=rep.e1_hits,
                             atomic_hits=rep.atomic_hits, violations=rep.violations,
                             union_bound=rep.union_bound, **{"pass": ok}))
        else:
            chk = verify_event_bounds(G, x0, args.k, args.beta, args.trials, trial_seed(args.seed, 2), snr)
            ok = chk.passes()
            rows.append(dict(base, m=m, snr=snr, sigma_g_min=chk.sigma_g_min, e1_freq=chk.e1_freq,
                             p_e1_ub=chk.p_e1_ub, e2_freq=chk.e2_freq, p_e2_ub=chk.p_e2_ub, **{"pass": ok}))
    elif lemma == "concentration":
        m = args.m if args.m is not None else 2 * args.n
        chk = verify_concentration(args.n, m, args.k, args.epsilon, args.trials, trial_seed(args.seed, 3))
        ok = chk.passes()
        rows.append(dict(base, m=m, epsilon=args.epsilon, eta=chk.eta, sigma_tail_freq=chk.sigma_tail_freq,
                         delta1=chk.delta1, norm_tail_freq=chk.norm_tail_freq, delta2=chk.delta2,
                         sigma_simulated=chk.sigma_simulated, **{"pass": ok}))
    else:
        if args.trials == 0:
            rows.append(dict(base, **{"pass": True}))
        else:
            ms = [args.m] if args.m is not None else [2 * args.k + 1]
            snrs = [args.snr] if args.snr is not None else [1.0, 5.0, 20.0]
            config = ExperimentConfig(n=[args.n], k=[args.k], m=ms, snr=snrs, trials_per_cell=args.trials,
                                      signal_source={"type": "BayesPrior", "kind": "BinaryDelta", "beta": args.beta},
                                      master_seed=args.seed)
            chk = verify_fano(config, args.threads)
            ok = chk.passes
            for r in chk.rows:
                rows.append(dict(base, m=r.m, snr=r.snr, errors=r.errors, p_emp=r.p_emp, ci_lo=r.ci_lo,
                                 ci_hi=r.ci_hi, fano_lb=r.fano_lb, **{"pass": ok}))
    emit(render(rows, VERIFY_COLUMNS[lemma], args.format), args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


# --------------------------------------------------------------------------
# parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.add_argument("--bits", action="store_true", help="print rates in bits (display only)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cs-limits",
                                     description="Sparse-recovery bounds, decoders and Monte-Carlo checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="evaluate necessary and sufficient thresholds")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--snr", type=float, help="defaults to ln(n)")
    p.add_argument("--d0", type=float)
    ch = p.add_mutually_exclusive_group()
    ch.add_argument("--channel", choices=["output", "input"], default="output")
    ch.add_argument("--input-noise", dest="channel", action="store_const", const="input")
    ch.add_argument("--output-noise", dest="channel", action="store_const", const="output")
    p.add_argument("--regime", choices=["auto", "linear", "sublinear"], default="auto")
    p.add_argument("--sigma-g-min", type=float, dest="sigma_g_min")
    p.add_argument("--lambda-min", type=float, dest="lambda_min", default=1.0)
    _common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("rd", help="rate-distortion function values")
    p.add_argument("--source", choices=["binary", "gaussian"], default="binary")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d0", type=float, nargs="+", required=True)
    p.add_argument("--sigma0sq", type=float, default=0.0)
    p.add_argument("--sigma1sq", type=float, default=1.0)
    _common(p)
    p.set_defaults(func=cmd_rd)

    for name, fn, helptext in (("simulate", cmd_simulate, "run a Monte-Carlo sweep"),
                               ("phase", cmd_phase, "run a 2-D (m, snr) phase diagram")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--threads", type=int, help="worker threads (default $CS_LIMITS_THREADS)")
        _common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("verify", help="Monte-Carlo check of a structural lemma")
    p.add_argument("--lemma", choices=sorted(VERIFY_COLUMNS), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--m", type=int)
    p.add_argument("--snr", type=float)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    _common(p)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (UsageError, OutOfRegimeError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
