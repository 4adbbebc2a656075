"""Bundled synthetic datasets so the simulation pipeline runs out of the box.

Values are drawn from log-normal distributions chosen to resemble exchange
wallets and card-sized payment requests at an October-2019 price level:

* UTXO values: median ``UTXO_MEDIAN_SAT`` satoshi, log-sigma ``UTXO_SIGMA``.
* Payment values: median ``PAYMENT_MEDIAN_SAT`` satoshi, log-sigma
  ``PAYMENT_SIGMA``.

Both generators are fully determined by their seed, so the bundled datasets
are reproducible constants of the repository. User-supplied CSV datasets go
through :mod:`coinlever.io` instead.
"""

from __future__ import annotations

import math
import random
from functools import lru_cache

from .model import PaymentRequest, Utxo

UTXO_MEDIAN_SAT = 150_000
UTXO_SIGMA = 1.8
PAYMENT_MEDIAN_SAT = 600_000
PAYMENT_SIGMA = 1.2
FLOOR_SAT = 1_000

DEFAULT_UTXO_COUNT = 10_000
DEFAULT_PAYMENT_COUNT = 2_000
UTXO_DATASET_SEED = 20191001
PAYMENT_DATASET_SEED = 20191002


def _lognormal_values(rng: random.Random, n: int, median: int, sigma: float) -> list[int]:
    mu = math.log(median)
    return [max(FLOOR_SAT, round(rng.lognormvariate(mu, sigma))) for _ in range(n)]


def synthetic_utxo_dataset(
    count: int = DEFAULT_UTXO_COUNT, seed: int = UTXO_DATASET_SEED
) -> tuple[Utxo, ...]:
    rng = random.Random(seed)
    values = _lognormal_values(rng, count, UTXO_MEDIAN_SAT, UTXO_SIGMA)
    return tuple(Utxo(f"u{i:05d}", v) for i, v in enumerate(values))


def synthetic_payment_dataset(
    count: int = DEFAULT_PAYMENT_COUNT, seed: int = PAYMENT_DATASET_SEED
) -> tuple[PaymentRequest, ...]:
    rng = random.Random(seed)
    values = _lognormal_values(rng, count, PAYMENT_MEDIAN_SAT, PAYMENT_SIGMA)
    return tuple(PaymentRequest(f"p{i:04d}", v, i) for i, v in enumerate(values))


@lru_cache(maxsize=1)
def bundled_utxo_dataset() -> tuple[Utxo, ...]:
    return synthetic_utxo_dataset()


@lru_cache(maxsize=1)
def bundled_payment_dataset() -> tuple[PaymentRequest, ...]:
    return synthetic_payment_dataset()
