"""
Run the full benchmark study.

For each scenario in options.py: the open-loop identification baseline, the
replicate tuning runs, and Monte-Carlo assessments of the tuned and the
baseline controllers. Figure data lands under base_path/results/<scenario>.

"""
import os
import json
import logging
import configparser

import numpy as np

from options import OPTIONS
from mpctune.cli import LOG_FORMAT, cmd_assess, cmd_baseline, cmd_tune, write_json
from mpctune.config import default_config, merge, validate_config

CONFIG = configparser.ConfigParser()
CONFIG.read(os.path.join(os.path.dirname(__file__), 'script_config.ini'))
BASE_PATH = CONFIG['file_locations']['base_path']

RESULTS = os.path.join(BASE_PATH, 'results')


def load_json(path):
    """
    Load a JSON artifact.

    """
    with open(path, 'r') as source:
        return json.load(source)


def select_tuned_theta(folder, seeds):
    """
    Recommendation of the seed with the median best feasible production.

    """
    candidates = []

    for seed in seeds:
        path = os.path.join(folder, 'best_theta_seed{}.json'.format(seed))
        if not os.path.exists(path):
            continue
        best = load_json(path)
        objective = best['report']['best_feasible']
        if objective is None:
            continue
        candidates.append((-objective, seed, best['theta']))

    if not candidates:
        return None, None

    candidates.sort()
    _, seed, theta = candidates[len(candidates) // 2]

    return seed, np.array(theta)


if __name__ == '__main__':

    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)

    for option in OPTIONS:

        print('Working on {}'.format(option['name']))

        config = merge(default_config(), option['overrides'])
        validate_config(config)

        folder = os.path.join(RESULTS, option['name'])
        if not os.path.exists(folder):
            os.makedirs(folder)

        seeds = config['seeds']

        print('Running open-loop identification baseline')
        cmd_baseline(config, folder, seeds[:1])

        print('Running {} tuning replicates'.format(len(seeds)))
        cmd_tune(config, folder, seeds, dump_trajectories=False)

        seed, tuned_theta = select_tuned_theta(folder, seeds)
        if tuned_theta is None:
            print('No tuning run found a feasible controller')
            continue

        print('Assessing tuned controller from seed {}'.format(seed))
        tuned_folder = os.path.join(folder, 'assess_tuned')
        os.makedirs(tuned_folder, exist_ok=True)
        write_json({'seed': seed, 'theta': tuned_theta}, os.path.join(tuned_folder, 'theta.json'))
        cmd_assess(config, tuned_theta, tuned_folder, seeds[:1])

        print('Assessing baseline controller')
        baseline = load_json(os.path.join(folder, 'baseline_seed{}.json'.format(seeds[0])))
        baseline_folder = os.path.join(folder, 'assess_baseline')
        os.makedirs(baseline_folder, exist_ok=True)
        cmd_assess(config, np.array(baseline['theta']), baseline_folder, seeds[:1])

    print('Completed model run')
