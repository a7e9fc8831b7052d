"""Statistical attack on LWE/RLWE with sparse binary secrets."""

from .attack import AttackReport, SearchConfig, greedy_cool, run_attack
from .instance import (LweInstance, LweParams, RlweInstance, Secret, gen_lwe,
                       gen_rlwe, gen_secret, verify_secret)
from .modmath import Rng, center, mat_mul_mod
from .reduction import (ReducedDataset, ReductionConfig, dataset_factory,
                        lll_reduce, polish, reduce_once)
from .rlwe import run_rlwe_attack
from .stattest import TestConfig, f_q, iota, min_samples

__version__ = "0.1.0"

__all__ = [
    "AttackReport", "LweInstance", "LweParams", "ReducedDataset",
    "ReductionConfig", "RlweInstance", "Rng", "SearchConfig", "Secret",
    "TestConfig", "center", "dataset_factory", "f_q", "gen_lwe", "gen_rlwe",
    "gen_secret", "greedy_cool", "iota", "lll_reduce", "mat_mul_mod",
    "min_samples", "polish", "reduce_once", "run_attack", "run_rlwe_attack",
    "verify_secret",
]
