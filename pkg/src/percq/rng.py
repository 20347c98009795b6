"""Counter-based random streams keyed by ``(master_seed, trial, stream)``.

Every uniform variate is a pure function of its key and draw index, so a
Monte Carlo trial produces the same draws whichever thread runs it and in
whatever order.  The construction is SplitMix64: a trial key is derived by
mixing the seed with the trial counter, and draw ``j`` is the SplitMix64
output for state ``key + (j + 1) * GAMMA``.

The numba functions below and :class:`TrialStream` implement the same
arithmetic; the test suite pins them against each other.
"""

from __future__ import annotations

import numba as nb
import numpy as np

SCHEME = "splitmix64-ctr/v1"

# Sub-streams of a single trial.
STREAM_LINKS = 0
STREAM_SWAPS = 1
STREAM_PAIRS = 2

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_N_STREAMS = 4


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def trial_key(master_seed: int, trial: int, stream: int = STREAM_LINKS) -> int:
    counter = trial * _N_STREAMS + stream + 1
    return _mix((_mix(master_seed & _MASK) + counter * _GAMMA) & _MASK)


def uniform(key: int, index: int) -> float:
    return (_mix((key + (index + 1) * _GAMMA) & _MASK) >> 11) * 2.0**-53


class TrialStream:
    """Sequential view of one ``(master_seed, trial, stream)`` key.

    Exposes ``random()`` so it can stand in wherever a random stream is
    expected, e.g. :func:`percq.qstate.attempt_conversion`.
    """

    def __init__(self, master_seed: int, trial: int, stream: int = STREAM_LINKS):
        self.key = trial_key(master_seed, trial, stream)
        self.index = 0

    def random(self) -> float:
        u = uniform(self.key, self.index)
        self.index += 1
        return u


_U_GAMMA = np.uint64(_GAMMA)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U_ONE = np.uint64(1)
_U_NSTREAMS = np.uint64(_N_STREAMS)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0**-53


@nb.njit(cache=True, inline="always")
def nb_mix(z):
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


@nb.njit(cache=True, inline="always")
def nb_trial_key(seed, trial, stream):
    counter = np.uint64(trial) * _U_NSTREAMS + np.uint64(stream) + _U_ONE
    return nb_mix(nb_mix(seed) + counter * _U_GAMMA)


@nb.njit(cache=True, inline="always")
def nb_uniform(key, index):
    return np.float64(nb_mix(key + (np.uint64(index) + _U_ONE) * _U_GAMMA) >> _S11) * _INV53


def seed_u64(master_seed: int) -> np.uint64:
    return np.uint64(master_seed & _MASK)
