"""Command-line front end: ``gen``, ``train``, ``eval``, ``diag`` and ``bench``.

Every command reads a JSON experiment config (``--config``) and writes into
its ``out`` directory. Exit codes: 0 success, 2 invalid config, 3 dense size
cap refusal, 4 divergence abort.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import io
from .chain import (
    DenseDistribution,
    DenseKernel,
    NonErgodicError,
    SizeCapError,
    StateSpace,
    check_dense,
    stationary_of,
)
from .learning import DivergenceError, grad_loglik_estimate, restart_stationary, sgd_train
from .models import (
    GibbsKernel,
    PairwiseModel,
    ReferenceModel,
    dense_gibbs_kernel,
    exact_distribution,
    fit_reference,
    gibbs_step_many,
    random_model,
)
from .restart import (
    DoeblinChain,
    approximation_gap,
    contraction_check,
    mixing_curve,
    sample_stationary,
    stationary_dense,
)
from .seeding import derive_rng

logger = logging.getLogger("doeblinmc")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIZE_CAP = 3
EXIT_DIVERGED = 4

CONFIG_HELP = """\
config fields (JSON):
  model      {topology: chain|grid|custom, V, K, rows, cols, edges}
  teacher    {theta: flat list | null, theta_scale: Gaussian scale, q: VxK restart law | null}
  reference  {kind: fit|uniform, alpha: smoothing for kind=fit}
  epsilon    restart probability in (0, 1]
  train      {particles, step_size, decay, iterations, batch_size, eval_every,
              workers, block_size, epsilon_schedule: [[iteration, epsilon], ...]}
  data       {n_train, n_heldout, train_path, heldout_path}
  diag       {base: model|flip, epsilons, t_max, pairs, start_state}
  bench      {gibbs_steps, sizes, particles, repeats}
  out        output directory
  seed       unsigned 64-bit root seed
  label      free-text task label copied into metadata
"""


# ---------------------------------------------------------------- helpers


def _teacher(cfg):
    space, edges = cfg.model.build()
    if cfg.teacher.theta is not None:
        return PairwiseModel(space, edges, cfg.teacher.theta)
    return random_model(space, edges, derive_rng(cfg.seed, "teacher"), cfg.teacher.theta_scale)


def _student_reference(cfg, space, train_rows):
    if cfg.reference.kind == "uniform":
        return ReferenceModel.uniform(space)
    return fit_reference(train_rows, space, cfg.reference.alpha)


def _resolve_reference(cfg, model, explicit, model_path):
    if explicit:
        return io.load_reference(explicit)
    sibling = os.path.join(os.path.dirname(model_path), "reference.json")
    if os.path.exists(sibling):
        return io.load_reference(sibling)
    return _student_reference(cfg, model.space, io.read_dataset(cfg.train_path, model.space))


# ---------------------------------------------------------------- commands


def cmd_gen(cfg):
    """Sample train/held-out rows exactly from the teacher's restart stationary law."""
    teacher = _teacher(cfg)
    space = teacher.space
    ref = ReferenceModel(space, cfg.teacher.q) if cfg.teacher.q is not None else ReferenceModel.uniform(space)
    chain = DoeblinChain(GibbsKernel(teacher), ref, cfg.epsilon)
    train = sample_stationary(chain, derive_rng(cfg.seed, "gen", 0), cfg.data.n_train)
    heldout = sample_stationary(chain, derive_rng(cfg.seed, "gen", 1), cfg.data.n_heldout)
    io.write_dataset(cfg.train_path, train)
    io.write_dataset(cfg.heldout_path, heldout)
    io.save_model(cfg.path("teacher.json"), teacher)
    io.save_reference(cfg.path("teacher_reference.json"), ref)
    io.write_json(
        cfg.path("gen_meta.json"),
        {"label": cfg.label, "synthetic": True, "epsilon": cfg.epsilon, "seed": cfg.seed,
         "n_train": cfg.data.n_train, "n_heldout": cfg.data.n_heldout},
    )
    return {"train": cfg.train_path, "heldout": cfg.heldout_path}


def cmd_train(cfg):
    """Fit a zero-initialized model by SGD on the restart-chain likelihood."""
    space, edges = cfg.model.build()
    train = io.read_dataset(cfg.train_path, space)
    heldout = io.read_dataset(cfg.heldout_path, space) if os.path.exists(cfg.heldout_path) else None
    ref = _student_reference(cfg, space, train)
    io.save_reference(cfg.path("reference.json"), ref)
    init = PairwiseModel.zeros(space, edges)
    io.save_model(cfg.path("initial_model.json"), init)
    try:
        model, log = sgd_train(train, init, ref, cfg.train_config(), heldout=heldout)
    except DivergenceError as exc:
        io.write_jsonl(cfg.path("train_log.jsonl"), exc.log)
        raise
    io.save_model(cfg.path("model.json"), model)
    io.write_jsonl(cfg.path("train_log.jsonl"), log)
    return log[-1]


def cmd_eval(cfg, model_path=None, data_path=None, reference_path=None):
    """Mean exact log-likelihoods of a dataset under a model file."""
    model_path = model_path or cfg.path("model.json")
    model = io.load_model(model_path)
    check_dense(model.space)
    data = io.read_dataset(data_path or cfg.heldout_path, model.space)
    ref = _resolve_reference(cfg, model, reference_path, model_path)
    idx = model.space.index(data)
    pi_eps = restart_stationary(model, ref, cfg.epsilon)
    p_model = exact_distribution(model)
    row = {
        "rows": len(data),
        "epsilon": float(cfg.epsilon),
        "mean_log_pi_eps": float(np.mean(np.log(pi_eps.probs[idx]))),
        "mean_log_reference": float(np.mean(ref.logpmf(data))),
        "mean_log_model": float(np.mean(np.log(p_model.probs[idx]))),
    }
    io.write_table(cfg.path("metrics.tsv"), list(row), [list(row.values())])
    return row


def _diag_base(cfg, model_path, reference_path):
    if cfg.diag.base == "flip":
        space = StateSpace.flat(2)
        return DenseKernel(space, [[0.0, 1.0], [1.0, 0.0]]), DenseDistribution.point_mass(space, 0)
    model_path = model_path or cfg.path("model.json")
    model = io.load_model(model_path)
    check_dense(model.space)
    ref = _resolve_reference(cfg, model, reference_path, model_path)
    return dense_gibbs_kernel(model), ref.to_dense()


def cmd_diag(cfg, model_path=None, reference_path=None):
    """Mixing curves, approximation gaps and a contraction audit as TSV tables."""
    base, ref = _diag_base(cfg, model_path, reference_path)
    space = base.space
    start = DenseDistribution.point_mass(space, cfg.diag.start_state)

    curve_rows = []
    for eps in cfg.diag.epsilons:
        curve = mixing_curve(base, ref, eps, start, cfg.diag.t_max)
        v0 = curve[0][1]
        curve_rows.extend([float(eps), t, tv, (1.0 - eps) ** t * v0] for t, tv in curve)
    io.write_table(cfg.path("mixing_curve.tsv"), ["epsilon", "t", "tv", "envelope"], curve_rows)

    gap_rows = []
    try:
        for rec in approximation_gap(base, ref, cfg.diag.epsilons):
            gap_rows.append([rec.epsilon, rec.gap, rec.bound, "ok"])
    except NonErgodicError:
        gap_rows = [[float(e), float("nan"), float("nan"), "non-ergodic"] for e in cfg.diag.epsilons]
    io.write_table(cfg.path("approx_gap.tsv"), ["epsilon", "gap", "bound", "status"], gap_rows)

    rng = derive_rng(cfg.seed, "diag-pairs")
    audit_rows = []
    violations = 0
    for eps in cfg.diag.epsilons:
        for i in range(cfg.diag.pairs):
            mu = DenseDistribution.normalized(space, rng.dirichlet(np.ones(space.N)))
            nu = DenseDistribution.normalized(space, rng.dirichlet(np.ones(space.N)))
            lhs, rhs = contraction_check(base, ref, eps, mu, nu)
            bad = lhs > rhs + 1e-12
            violations += bad
            audit_rows.append([float(eps), i, lhs, rhs, int(bad)])
    io.write_table(
        cfg.path("contraction_audit.tsv"), ["epsilon", "pair", "lhs", "rhs", "violation"], audit_rows
    )

    stationary = [
        [float(e)] + stationary_dense(base, ref, e).probs.tolist() for e in cfg.diag.epsilons
    ]
    io.write_table(
        cfg.path("stationary.tsv"),
        ["epsilon"] + [f"p{j}" for j in range(space.N)],
        stationary,
    )
    return {"violations": int(violations), "gap": gap_rows}


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def cmd_bench(cfg):
    """Timing report for Gibbs stepping, stationary solves and gradient estimation."""
    b = cfg.bench
    teacher = _teacher(cfg)
    rng = derive_rng(cfg.seed, "bench", 0)
    xs = np.zeros((1, teacher.space.V), dtype=np.int64)

    def gibbs():
        x = xs
        for _ in range(b.gibbs_steps):
            x = gibbs_step_many(teacher, x, rng)[0]

    t_gibbs = _median_time(gibbs, b.repeats)
    solves = []
    for n in b.sizes:
        krng = derive_rng(cfg.seed, "bench-kernel", n)
        rows = krng.random((n, n)) + 1e-3
        kernel = DenseKernel(StateSpace.flat(n), rows / rows.sum(axis=1, keepdims=True))
        solves.append({"N": n, "median_seconds": _median_time(lambda: stationary_of(kernel), b.repeats)})
    ref = ReferenceModel.uniform(teacher.space)
    grads = []
    for m in b.particles:
        grng = derive_rng(cfg.seed, "bench-grad", m)
        secs = _median_time(
            lambda: grad_loglik_estimate(teacher, ref, cfg.epsilon, xs[0], m, grng), b.repeats
        )
        grads.append({"M": m, "median_seconds": secs, "particles_per_second": m / secs})
    report = {
        "config_hash": io.config_hash(cfg),
        "gibbs": {
            "steps": b.gibbs_steps,
            "median_seconds": t_gibbs,
            "steps_per_second": b.gibbs_steps / t_gibbs,
        },
        "stationary_solve": solves,
        "gradient_estimate": grads,
        "repeats": b.repeats,
    }
    io.write_json(cfg.path("bench.json"), report)
    return report


# ---------------------------------------------------------------- argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="doeblinmc",
        description="Restart-chain experiments on pairwise MRFs.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "gen": "sample a synthetic dataset from a teacher model",
        "train": "fit a model by SGD on the restart-chain likelihood",
        "eval": "exact mean log-likelihoods of a dataset",
        "diag": "mixing, approximation-gap and contraction tables",
        "bench": "timing report",
    }
    for name, text in helps.items():
        p = sub.add_parser(
            name, help=text, description=text, epilog=CONFIG_HELP,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, help="override the root seed")
        p.add_argument("--epsilon", type=float, help="override the restart probability")
        p.add_argument("--out", help="override the output directory")
        if name in ("eval", "diag"):
            p.add_argument("--model", help="model file (default: <out>/model.json)")
            p.add_argument("--reference", help="reference file (default: reference.json beside the model)")
        if name == "eval":
            p.add_argument("--data", help="dataset file (default: the held-out path)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        raw = io.read_json(args.config)
        if isinstance(raw, dict):
            if args.seed is not None:
                raw["seed"] = args.seed
            if args.epsilon is not None:
                raw["epsilon"] = args.epsilon
            if args.out is not None:
                raw["out"] = args.out
        cfg = io.config_from_dict(raw)
        os.makedirs(cfg.out, exist_ok=True)
        io.save_config(cfg.path(f"{args.command}_config.json"), cfg)
        if args.command == "gen":
            result = cmd_gen(cfg)
        elif args.command == "train":
            result = cmd_train(cfg)
        elif args.command == "eval":
            result = cmd_eval(cfg, args.model, args.data, args.reference)
        elif args.command == "diag":
            result = cmd_diag(cfg, args.model, args.reference)
        else:
            result = cmd_bench(cfg)
    except SizeCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE_CAP
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (io.ConfigError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(result, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
