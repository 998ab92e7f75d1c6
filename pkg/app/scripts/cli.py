"""
Command-line entry point

    python -m app.scripts.cli generate --kind thresholds --n 100 --out thresholds.json
    python -m app.scripts.cli run --config run.json [--seed N] [--practical-constants] [--check-invariants]
    python -m app.scripts.cli sweep --config sweep.json [--workers N] [--out DIR]
    python -m app.scripts.cli duel --instance inst.json --oracle '{"kind": "realizable", "h_star": 0}' \\
                                   --candidates 0,5 --eta-tilde 0.01 --delta 0.1
    python -m app.scripts.cli oracle mstar --instance inst.json
    python -m app.scripts.cli oracle crosscheck --r 0.4,0.3,0 --kappa 0.05
    python -m app.scripts.cli oracle trace --config run.json
    python -m app.scripts.cli report --results results/results.csv

Exit codes: 0 success, 1 usage/config error, 2 invariant violation.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from app.models.hypothesis import InstanceError, Marginal
from app.models.labels import OracleError
from app.scripts.sweep import run_sweep
from app.services.analysis_service import analysis_service
from app.services.instance_service import UNARY_ENCODINGS, instance_service
from app.services.learner_service import InvariantViolation, learner_service
from app.services.oracle_service import oracle_service
from app.services.report_service import report_service
from app.services.storage_service import ConfigError, storage_service
from app.services.tournament_service import TournamentError, tournament_service
from app.utils.config import config
from app.utils.rng_utils import make_rng


logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2


def _configure_logging():
    logging.basicConfig(
        level=getattr(logging, config.LOG_LEVEL),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    # Per-iteration learner output only at DEBUG
    if config.LOG_LEVEL != 'DEBUG':
        logging.getLogger('app.services.hypothesis_service').setLevel(logging.WARNING)
        logging.getLogger('app.services.tournament_service').setLevel(logging.WARNING)
        logging.getLogger('app.services.storage_service').setLevel(logging.WARNING)


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(',') if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(',') if v.strip()]


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_generate(args) -> int:
    if args.kind == 'thresholds':
        instance = instance_service.gen_thresholds(args.n)
    elif args.kind == 'unary_binary':
        instance = instance_service.gen_unary_binary(args.N, args.unary)
    elif args.kind == 'figure1':
        instance = instance_service.gen_figure1().instance
    elif args.kind == 'random':
        instance = instance_service.gen_random(args.n_hypotheses, args.n_points, args.density, args.seed)
    else:
        if not args.setcover:
            raise ConfigError("--setcover FILE is required for --kind setcover")
        reduction = instance_service.gen_setcover_reduction(storage_service.load_setcover(args.setcover))
        instance = reduction.instance
        print(f"eta = epsilon = {reduction.eta:.6g}, delta = {reduction.delta:.6g}")

    storage_service.save_instance(instance, args.out)
    print(f"Wrote {instance.name}: |H|={instance.hclass.n_hypotheses} |X|={instance.hclass.domain_size} -> {args.out}")
    return EXIT_OK


def _load_run(args):
    run_config = storage_service.load_run_config(args.config)
    base_dir = Path(args.config).parent
    instance = storage_service.resolve_instance(run_config.instance, base_dir)
    model = oracle_service.from_spec(run_config.oracle, instance)
    params = storage_service.build_params(run_config.params, True if args.practical_constants else None)
    seed = args.seed if args.seed is not None else run_config.seed
    return run_config, instance, model, params, seed


def cmd_run(args) -> int:
    run_config, instance, model, params, seed = _load_run(args)

    record = learner_service.run(
        instance, params, model, make_rng(seed),
        initial_weights=run_config.initial_weights,
        check_invariants=args.check_invariants or run_config.check_invariants,
    )

    summary = {'instance': instance.name, 'seed': seed, 'oracle': run_config.oracle}
    summary.update(report_service.success(instance, model, record.final_hypothesis, params.epsilon))

    phi = None
    h_star = model.params.get('h_star')
    if h_star is not None:
        phi = analysis_service.potential_trace(instance, record, int(h_star)).phi

    out = args.out or run_config.output or str(Path(config.OUTPUT_DIR) / 'run.json')
    paths = storage_service.write_run_record(record, out, summary, phi)

    print("\n" + "=" * 60)
    print("RUN SUMMARY")
    print("=" * 60)
    print(f"Instance: {instance.name} (|H|={instance.hclass.n_hypotheses}, |X|={instance.hclass.domain_size})")
    print(f"Mode: {params.mode}  practical: {params.practical}  seed: {seed}")
    print(f"Stage one: {record.stage1_queries} queries ({record.stop_reason}), |C|={len(record.centers)}")
    print(f"Stage two: {record.stage2_queries} queries in {len(record.duels)} duels")
    print(f"h_hat = h{record.final_hypothesis}  true error {summary['true_error']:.6g} "
          f"(best {summary['best_error']:.6g})")
    print(f"Success: {'YES' if summary['success'] else 'NO'}")
    if record.flags:
        print(f"Flags: {', '.join(record.flags)}")
    print(f"Log: {paths['summary']}  trace: {paths['trace']}")
    print("=" * 60 + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    run_sweep(
        args.config,
        workers=args.workers,
        output_dir=args.out,
        practical=True if args.practical_constants else None,
        check_invariants=args.check_invariants,
    )
    return EXIT_OK


def cmd_duel(args) -> int:
    instance = storage_service.resolve_instance(
        json.loads(args.instance) if args.instance.lstrip().startswith('{') else args.instance
    )
    model = oracle_service.from_spec(json.loads(args.oracle), instance)
    result = tournament_service.tournament(
        instance.hclass, instance.marginal, model, _ints(args.candidates),
        args.eta_tilde, args.delta, make_rng(args.seed), duel_constant=args.duel_constant,
    )

    print(f"Samples per duel: {result.samples_per_duel}")
    for duel in result.duels:
        print(f"  h{duel.h} vs h{duel.h2}: mistakes {duel.mistakes_h}/{duel.mistakes_h2} -> h{duel.eliminated} out")
    print(f"Winner: h{result.winner} ({result.queries} queries)")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.what == 'mstar':
        if not args.instance:
            raise ConfigError("--instance is required for 'oracle mstar'")
        instance = storage_service.load_instance(args.instance)
        value = analysis_service.mstar_realizable_exact(instance.hclass, instance.marginal)
        print(f"m* (realizable identification) = {value}")
        return EXIT_OK

    if args.what == 'crosscheck':
        if not args.r:
            raise ConfigError("--r is required for 'oracle crosscheck'")
        r_bar = np.asarray(_floats(args.r))
        marginal = Marginal(_floats(args.masses)) if args.masses else Marginal.uniform(r_bar.size)
        plan = learner_service.solve_query_distribution(r_bar, marginal, args.kappa)
        margin = analysis_service.solver_crosscheck(r_bar, marginal, args.kappa, args.trials, make_rng(args.seed))
        print(f"Support: {list(plan.support)}  objective: {plan.objective:.12g}")
        print(f"Margin over {args.trials} random distributions: {margin:.3e}")
        return EXIT_OK

    if not args.config:
        raise ConfigError("--config is required for 'oracle trace'")
    run_config, instance, model, params, seed = _load_run(args)
    record = learner_service.run(instance, params, model, make_rng(seed), initial_weights=run_config.initial_weights)
    h_star = args.h_star
    if h_star is None:
        h_star = model.params.get('h_star', oracle_service.best_hypothesis(model, instance.hclass, instance.marginal).best)
    trace = analysis_service.potential_trace(instance, record, int(h_star))

    print(f"Potential trace for h{trace.h_star} (tracking h{trace.tracked}{', substituted' if trace.substituted else ''})")
    print(f"phi0 = {trace.phi0:.6f}")
    print(f"{'iter':>6} {'in_S':>5} {'phi':>12} {'delta':>10} {'psi':>10} {'lambda(h*)':>12}")
    for i, row in enumerate(record.trace):
        print(f"{row.iteration:>6} {str(trace.in_s[i]):>5} {trace.phi[i]:>12.6f} "
              f"{trace.delta[i]:>10.6f} {trace.psi[i + 1]:>10.6f} {trace.posterior[i]:>12.6g}")
    print(f"max |delta| = {trace.max_abs_delta:.6f} (alpha = {trace.alpha}); "
          f"{trace.steps_above_alpha} steps above alpha")
    return EXIT_OK


def cmd_report(args) -> int:
    results = storage_service.read_table(args.results)
    aggregate = report_service.aggregate(results)
    ratios = report_service.growth_ratios(aggregate)

    print("\n" + "=" * 60)
    print("AGGREGATE")
    print("=" * 60)
    print(aggregate.to_string(index=False) if not aggregate.empty else "(no runs)")

    if not ratios.empty:
        print("\nMEDIAN-QUERY GROWTH AS EPSILON SHRINKS")
        print("-" * 60)
        print(ratios.to_string(index=False))

    span = report_service.time_span(results)
    if span is not None:
        print(f"\nRuns started over {span:.1f}s")
    print("=" * 60 + "\n")
    return EXIT_OK


# ----------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; 2 is reserved for invariant violations."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='app.scripts.cli', description='Competitive active learning simulator')
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='write an instance file')
    gen.add_argument('--kind', required=True, choices=['thresholds', 'unary_binary', 'figure1', 'random', 'setcover'])
    gen.add_argument('--n', type=int, default=100, help='threshold grid size')
    gen.add_argument('--N', type=int, default=256, help='unary/binary size (power of two)')
    gen.add_argument('--unary', choices=UNARY_ENCODINGS, default='thermometer', help='unary block encoding')
    gen.add_argument('--n-hypotheses', type=int, default=10)
    gen.add_argument('--n-points', type=int, default=8)
    gen.add_argument('--density', type=float, default=0.5)
    gen.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    gen.add_argument('--setcover', help='set-cover file (one subset per line)')
    gen.add_argument('--out', required=True)
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser('run', help='single learner run')
    run.add_argument('--config', required=True)
    run.add_argument('--seed', type=int)
    run.add_argument('--out')
    run.add_argument('--practical-constants', action='store_true')
    run.add_argument('--check-invariants', action='store_true')
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser('sweep', help='grid of seeded runs')
    sweep.add_argument('--config', required=True)
    sweep.add_argument('--workers', type=int)
    sweep.add_argument('--out')
    sweep.add_argument('--practical-constants', action='store_true')
    sweep.add_argument('--check-invariants', action='store_true')
    sweep.set_defaults(func=cmd_sweep)

    duel = sub.add_parser('duel', help='standalone stage-two tournament')
    duel.add_argument('--instance', required=True, help='instance file or generator JSON')
    duel.add_argument('--oracle', required=True, help='oracle spec JSON')
    duel.add_argument('--candidates', required=True, help='comma-separated hypothesis indices')
    duel.add_argument('--eta-tilde', type=float, required=True)
    duel.add_argument('--delta', type=float, default=0.1)
    duel.add_argument('--duel-constant', type=float, default=config.DUEL_CONSTANT)
    duel.add_argument('--seed', type=int, default=config.DEFAULT_SEED)
    duel.set_defaults(func=cmd_duel)

    oracle = sub.add_parser('oracle', help='analysis oracles')
    oracle.add_argument('what', choices=['mstar', 'crosscheck', 'trace'])
    oracle.add_argument('--instance')
    oracle.add_argument('--config')
    oracle.add_argument('--r', help='comma-separated uncertainty values')
    oracle.add_argument('--masses', help='comma-separated marginal (uniform by default)')
    oracle.add_argument('--kappa', type=float, default=0.0)
    oracle.add_argument('--trials', type=int, default=1000)
    oracle.add_argument('--h-star', type=int)
    oracle.add_argument('--seed', type=int)
    oracle.add_argument('--practical-constants', action='store_true')
    oracle.set_defaults(func=cmd_oracle)

    report = sub.add_parser('report', help='aggregate a results CSV')
    report.add_argument('--results', required=True)
    report.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    _configure_logging()
    args = build_parser().parse_args(argv)

    if args.command == 'oracle' and args.what == 'crosscheck' and args.seed is None:
        args.seed = config.DEFAULT_SEED

    try:
        return args.func(args)

    except InvariantViolation as e:
        logger.error(f"Invariant violation: {e}")
        print(f"\n❌ Invariant violation: {e}")
        return EXIT_INVARIANT

    except (ConfigError, InstanceError, OracleError, TournamentError, ValueError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"\n❌ {e}")
        return EXIT_USAGE

    except KeyboardInterrupt:
        print("\n⚠️  Interrupted by user")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
