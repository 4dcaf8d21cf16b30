"""
Options consisting of the benchmark scenarios.

Each option overrides the package defaults for one experiment: the noise-free
study and the noisy study with sigma_B = 0.2 mol/L and sigma_R = 10 degC.

BENCHMARK_CA0 is the feed concentration of A used throughout the benchmark
runs; the plant model has no default for it. Under BENCHMARK_PENALTY_WEIGHT
a few tenths of a degree above the temperature bound cost more than one
step's production.

"""
BENCHMARK_CA0 = 5.1

# temperature penalty of the benchmark runs, in scaled units
BENCHMARK_PENALTY_WEIGHT = 1e5

N_SEEDS = 100


def generate_scenario_options(seeds=None):
    """
    Generate one config override per scenario.

    Parameters
    ----------
    seeds : list of int, optional
        Seeds of the replicate tuning runs, range(N_SEEDS) by default.

    Returns
    -------
    output : list of dicts
        Options with a 'name' and the config 'overrides'.

    """
    seeds = list(range(N_SEEDS)) if seeds is None else list(seeds)

    output = []

    for scenario in ['noise_free', 'noisy']:
        output.append({
            'name': scenario,
            'overrides': {
                'scenario': scenario,
                'seeds': seeds,
                'plant': {'cA0': BENCHMARK_CA0},
                'mpc': {'penalty_weight': BENCHMARK_PENALTY_WEIGHT},
                'noise': {'sigma_B': 0.2, 'sigma_R': 10.0},
                'bo': {'budget': 40, 'n_init': 5, 'M': 1},
                'assess': {'n_runs': 100},
            },
        })

    return output


OPTIONS = generate_scenario_options()
