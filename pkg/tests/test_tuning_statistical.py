"""Seeded repetition studies for the scale-balance tuners.

Heavy (minutes, not seconds): full-default cross-validation on n=200
instances, repeated ten times. Deterministic given the frozen seeds.
"""

import time

import numpy as np
import pytest

from clusterreg import CvConfig, EmConfig, tune_c_cv, tune_c_kdeleted

from conftest import two_group_data

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("threads", [2])
def test_homoscedastic_truth_keeps_c_high_and_conk_tracks_conc(threads):
    """Equal group variances push the chosen c up (toward homoscedasticity);
    the k-deleted shortcut lands within a factor of ten of the CV choice."""
    high = 0
    same_decade = 0
    for rep in range(10):
        data, _, _ = two_group_data(n=200, seed=300 + rep, variances=(1.0, 1.0))
        conc = tune_c_cv(data, 2, None, CvConfig(seed=rep), EmConfig(seed=rep), threads=threads)
        conk = tune_c_kdeleted(data, 2, None, 40, EmConfig(seed=rep), threads=threads)
        high += conc.chosen_c >= 0.3
        same_decade += abs(np.log10(conc.chosen_c) - np.log10(conk.chosen_c)) <= 1.0
    assert high >= 8
    assert same_decade >= 7


def test_heteroscedastic_truth_pushes_c_down():
    """A 1:25 variance ratio needs loose bounds: the chosen c goes small."""
    low = 0
    for rep in range(10):
        data, _, _ = two_group_data(n=200, seed=600 + rep, variances=(0.2, 5.0))
        conc = tune_c_cv(data, 2, None, CvConfig(seed=rep), EmConfig(seed=rep), threads=2)
        low += conc.chosen_c <= 0.2
    assert low >= 8


def test_kdeleted_tuning_at_least_twice_as_fast_as_cv():
    for rep in range(2):
        data, _, _ = two_group_data(
            n=200, intercepts=(4.0, 9.0, 16.0), variances=(1.0, 1.0, 1.0),
            weights=(0.2, 0.3, 0.5), seed=900 + rep, n_regressors=3,
        )
        t0 = time.perf_counter()
        tune_c_cv(data, 3, None, CvConfig(seed=rep), EmConfig(seed=rep))
        t_cv = time.perf_counter() - t0
        t0 = time.perf_counter()
        tune_c_kdeleted(data, 3, None, 40, EmConfig(seed=rep))
        t_kdel = time.perf_counter() - t0
        assert t_kdel * 2.0 <= t_cv
