"""
Command line

    mpctune tune|baseline|assess|simulate --config <path> [--theta <path>]
            [--out <dir>] [--seeds a,b,c] [--dump-trajectories]

Every command writes its artifacts below the output directory together with
a manifest carrying the resolved config and the seeds. The exit code is 0 when
every requested seed completed, 1 when some seed failed and 2 for unusable
input.

All trajectory CSVs (simulate, baseline and dumped replicates) share one
header, harness.TRAJECTORY_COLUMNS:

    k,t,F,cA_true,cB_true,TR_true,TK_true,cB_meas,TR_meas,feasible

It carries the full true plant state, so cA_true and TK_true appear next to
the measured outputs even though neither enters the objective or constraint.

"""
import argparse
import json
import logging
import math
import os
import sys

import numpy as np
import pandas as pd

from mpctune import harness
from mpctune.config import ConfigError, load_config, resolve_output_dir
from mpctune.optimizer import run

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

EXIT_OK = 0
EXIT_SEED_FAILED = 1
EXIT_USAGE = 2

COMMANDS = ('tune', 'baseline', 'assess', 'simulate')


class ThetaFileError(ValueError):
    """A tuning vector file is missing or malformed."""


def jsonable(value):
    """
    Plain JSON types for numpy values; non-finite floats become null.

    """
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None

    return value


def dumps(value):
    return json.dumps(jsonable(value), sort_keys=True, allow_nan=False)


def write_json(value, path):
    with open(path, 'w', newline='\n') as json_file:
        json_file.write(json.dumps(jsonable(value), sort_keys=True, indent=2, allow_nan=False))
        json_file.write('\n')
    logger.info('Wrote %s', path)


def write_csv(frame, path):
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    logger.info('Wrote %s', path)


def load_theta(path):
    """
    Read a tuning vector: a JSON object with a 'theta' list or a bare list.

    Raises
    ------
    ThetaFileError
        If the file is unreadable or does not hold 15 finite numbers.

    """
    try:
        with open(path, 'r') as theta_file:
            content = json.load(theta_file)
    except (OSError, ValueError) as err:
        raise ThetaFileError('Cannot read theta file {}: {}'.format(path, err))

    if isinstance(content, dict):
        content = content.get('theta')

    if not isinstance(content, list) or len(content) != harness.N_THETA:
        raise ThetaFileError('Theta file {} must hold a list of {} numbers'.format(
            path, harness.N_THETA))

    try:
        theta = np.array(content, dtype=float)
    except (TypeError, ValueError):
        raise ThetaFileError('Theta file {} holds non-numeric values'.format(path))

    if not np.all(np.isfinite(theta)):
        raise ThetaFileError('Theta file {} holds non-finite values'.format(path))

    return theta


def parse_seeds(text):
    try:
        seeds = [int(part) for part in text.split(',') if part.strip() != '']
    except ValueError:
        raise argparse.ArgumentTypeError('seeds must be comma separated integers: {!r}'.format(text))
    if not seeds or any(seed < 0 for seed in seeds):
        raise argparse.ArgumentTypeError('seeds must be non-negative integers: {!r}'.format(text))

    return seeds


def build_parser():
    parser = argparse.ArgumentParser(
        prog='mpctune',
        description='Closed-loop MPC tuning with constrained Bayesian optimization.')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    subparsers = parser.add_subparsers(dest='command', required=True)

    for command in COMMANDS:
        sub = subparsers.add_parser(command)
        sub.add_argument('--config', required=True, help='experiment config (JSON)')
        sub.add_argument('--theta', help='tuning vector file (JSON)')
        sub.add_argument('--out', help='output directory')
        sub.add_argument('--seeds', type=parse_seeds, help='comma separated seeds')
        sub.add_argument('--dump-trajectories', action='store_true',
                         help='write one CSV per closed-loop replicate')

    return parser


def modelling_assumptions(config):
    return {
        'Vin_equals_VR': config['simulation']['Vin'] == config['plant']['VR'],
        'Vin': config['simulation']['Vin'],
        'cB_scaling': config['scaling']['cB'],
        'cA0': config['plant']['cA0'],
        'constraint_on': 'true reactor temperature',
    }


def write_manifest(command, config, seeds, completed, artifacts, out_dir):
    write_json({
        'command': command,
        'config': config,
        'seeds': seeds,
        'completed_seeds': completed,
        'failed_seeds': [seed for seed in seeds if seed not in completed],
        'assumptions': modelling_assumptions(config),
        'artifacts': sorted(artifacts),
    }, os.path.join(out_dir, 'manifest_{}.json'.format(command)))


def best_so_far_frame(report):
    history = np.array(
        [np.nan if value is None else value for value in report['best_feasible_history']],
        dtype=float)
    # no feasible observation yet
    history[~np.isfinite(history)] = np.nan

    return pd.DataFrame({
        'iteration': np.arange(history.shape[0]),
        'best_feasible_objective': history,
        'best_feasible_production': -history,
    })


def tune_summary_frame(curves):
    """
    Per-iteration statistics of the best feasible production across seeds.

    Iterations before a seed's first feasible observation are left out of
    that iteration's statistics.

    """
    table = pd.DataFrame(curves)
    stats = pd.DataFrame({
        'iteration': np.arange(table.shape[0]),
        'mean': table.mean(axis=1),
        'std': table.std(axis=1, ddof=0),
        'min': table.min(axis=1),
        'max': table.max(axis=1),
        'n_seeds': table.count(axis=1),
    })

    return stats.reset_index(drop=True)


def cmd_tune(config, out_dir, seeds, dump_trajectories):
    """
    Run the tuning loop once per seed.

    """
    trajectory_dir = None
    if dump_trajectories:
        trajectory_dir = os.path.join(out_dir, 'trajectories')
        os.makedirs(trajectory_dir, exist_ok=True)

    bo_config = harness.bo_settings(config)
    evaluator = harness.make_evaluator(config, trajectory_dir)

    completed, artifacts, curves = [], [], {}

    for seed in seeds:
        log_path = os.path.join(out_dir, 'tune_seed{}.jsonl'.format(seed))
        logger.info('Tuning seed %d', seed)

        try:
            with open(log_path, 'w', newline='\n') as log_file:

                def write_record(record):
                    log_file.write(dumps(record) + '\n')
                    log_file.flush()

                _, report = run(bo_config, evaluator, seed, on_iteration=write_record)
        except Exception:
            logger.exception('Tuning seed %d failed', seed)
            continue

        best_path = os.path.join(out_dir, 'best_theta_seed{}.json'.format(seed))
        write_json({
            'seed': seed,
            'theta': report['theta_star'],
            'report': report,
            'config': config,
        }, best_path)

        curve = best_so_far_frame(report)
        curve_path = os.path.join(out_dir, 'best_so_far_seed{}.csv'.format(seed))
        write_csv(curve, curve_path)

        curves[seed] = curve['best_feasible_production'].values
        completed.append(seed)
        artifacts.extend([log_path, best_path, curve_path])

    if curves:
        summary_path = os.path.join(out_dir, 'tune_summary.csv')
        write_csv(tune_summary_frame(curves), summary_path)
        artifacts.append(summary_path)

    write_manifest('tune', config, seeds, completed, artifacts, out_dir)

    return completed


def cmd_baseline(config, out_dir, seeds):
    """
    Open-loop identification baseline per seed.

    """
    noise = harness.noise_spec(config)
    completed, artifacts = [], []

    for seed in seeds:
        try:
            baseline = harness.baseline_openloop_id(noise, seed, config)
        except Exception:
            logger.exception('Baseline seed %d failed', seed)
            continue

        result = baseline['result']
        json_path = os.path.join(out_dir, 'baseline_seed{}.json'.format(seed))
        write_json({
            'seed': seed,
            'theta': baseline['theta'],
            'coeffs': baseline['coeffs'],
            'report': baseline['report'],
            'production': result['production'],
            'per_step_feasible': result['per_step_feasible'],
            'config': config,
        }, json_path)

        csv_path = os.path.join(out_dir, 'baseline_trajectory_seed{}.csv'.format(seed))
        write_csv(harness.trajectory_frame(result), csv_path)

        completed.append(seed)
        artifacts.extend([json_path, csv_path])

    write_manifest('baseline', config, seeds, completed, artifacts, out_dir)

    return completed


def cmd_assess(config, theta, out_dir, seeds):
    """
    Monte-Carlo assessment of a tuning vector per seed.

    """
    noise = harness.noise_spec(config)
    completed, artifacts = [], []

    for seed in seeds:
        try:
            report = harness.monte_carlo_assess(
                theta, config['assess']['n_runs'], noise, seed, config)
        except Exception:
            logger.exception('Assessment seed %d failed', seed)
            continue

        json_path = os.path.join(out_dir, 'assess_seed{}.json'.format(seed))
        write_json(dict(report, seed=seed, config=config), json_path)

        violation = report['per_step_violation_freq']
        csv_path = os.path.join(out_dir, 'assess_violation_seed{}.csv'.format(seed))
        write_csv(pd.DataFrame({
            'k': np.arange(1, len(violation) + 1),
            'violation_freq': violation,
        }), csv_path)

        completed.append(seed)
        artifacts.extend([json_path, csv_path])

    write_manifest('assess', config, seeds, completed, artifacts, out_dir)

    return completed


def cmd_simulate(config, theta, out_dir, seeds):
    """
    One closed-loop trajectory per seed.

    """
    noise = harness.noise_spec(config)
    completed, artifacts = [], []

    for seed in seeds:
        rng = np.random.default_rng([seed, harness.SIMULATE_TAG])
        try:
            result = harness.run_closed_loop(theta, noise, rng, config)
        except Exception:
            logger.exception('Simulation seed %d failed', seed)
            continue

        csv_path = os.path.join(out_dir, 'simulate_seed{}.csv'.format(seed))
        write_csv(harness.trajectory_frame(result), csv_path)

        completed.append(seed)
        artifacts.append(csv_path)

    write_manifest('simulate', config, seeds, completed, artifacts, out_dir)

    return completed


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)

    try:
        config = load_config(args.config)
        if args.dump_trajectories:
            config['dump_trajectories'] = True

        theta = None
        if args.command in ('assess', 'simulate'):
            if args.theta is None:
                raise ThetaFileError('{} needs --theta'.format(args.command))
            theta = load_theta(args.theta)
    except (ConfigError, ThetaFileError) as err:
        logger.error('%s', err)
        print('mpctune: error: {}'.format(err), file=sys.stderr)
        return EXIT_USAGE

    seeds = args.seeds if args.seeds is not None else config['seeds']
    config['seeds'] = seeds

    out_dir = resolve_output_dir(config, args.out)
    os.makedirs(out_dir, exist_ok=True)

    if args.command == 'tune':
        completed = cmd_tune(config, out_dir, seeds, config['dump_trajectories'])
    elif args.command == 'baseline':
        completed = cmd_baseline(config, out_dir, seeds)
    elif args.command == 'assess':
        completed = cmd_assess(config, theta, out_dir, seeds)
    else:
        completed = cmd_simulate(config, theta, out_dir, seeds)

    if len(completed) != len(seeds):
        logger.error('%d of %d seeds failed', len(seeds) - len(completed), len(seeds))
        return EXIT_SEED_FAILED

    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
