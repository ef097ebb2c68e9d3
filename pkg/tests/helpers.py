"""Instance builders shared by the test modules."""

import numpy as np

from comptrade.feasibility import check_feasible, check_zf_feasible
from comptrade.model import (ChannelSet, ClusterConfig, EnergyInputs, ProblemInstance,
                             QosTargets, SolverError)

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def toy(p_max=(100.0, 100.0), harvest=(0.2, 1.0), buy=(1.0, 1.0), sell=(0.1, 0.1),
        gamma=1.0, h=(1.0, 0.5)):
    """Two single-antenna BSs serving one MT."""
    return ProblemInstance(
        ClusterConfig(2, 1, 1, 1.0, p_max, [0.0, 0.0]),
        EnergyInputs(harvest, buy, sell),
        ChannelSet(np.array(h, dtype=complex)[:, None], 1),
        QosTargets([gamma], [1.0]))


def complex_normal(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_instance(rng, n_bs=None, n_ant=None, n_mt=None, equal_price=False,
                    p_max=None):
    """Unit-scale random instance; the shape is drawn when not given."""
    n = n_bs or int(rng.choice([2, 3]))
    m = n_ant or int(rng.choice([1, 2, 4]))
    k = n_mt or int(rng.integers(1, m * n + 1))
    if equal_price:
        buy = np.full(n, rng.uniform(0.5, 2.0))
        sell = buy
    else:
        buy = rng.uniform(0.5, 2.0, n)
        sell = buy * rng.uniform(0.05, 0.9, n)
    return ProblemInstance(
        ClusterConfig(n, m, k, float(rng.uniform(0.2, 1.0)),
                      rng.uniform(2.0, 30.0, n) if p_max is None else p_max,
                      rng.uniform(0.0, 2.0, n)),
        EnergyInputs(rng.uniform(0.0, 10.0, n), buy, sell),
        ChannelSet(complex_normal(rng, (m * n, k)), m),
        QosTargets(rng.uniform(0.5, 3.0, k), rng.uniform(0.5, 1.5, k)))


def feasible_instance(rng, zf=True, **kwargs):
    """Redraw until both feasibility checks pass (the ZF one when ``zf``)."""
    while True:
        inst = random_instance(rng, **kwargs)
        try:
            if check_feasible(inst).feasible and (not zf or check_zf_feasible(inst).feasible):
                return inst
        except SolverError:
            pass
