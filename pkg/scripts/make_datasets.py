#!/usr/bin/env python3
"""Materialize the bundled synthetic datasets as CSV files.

Writes utxos.csv and payments.csv in the chosen directory, suitable for the
CLI's --utxos/--payments flags or for external tooling.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from coinlever.datasets import (
    DEFAULT_PAYMENT_COUNT,
    DEFAULT_UTXO_COUNT,
    PAYMENT_DATASET_SEED,
    UTXO_DATASET_SEED,
    synthetic_payment_dataset,
    synthetic_utxo_dataset,
)
from coinlever.io import write_payments, write_utxos


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="data", help="output directory")
    parser.add_argument("--utxos", type=int, default=DEFAULT_UTXO_COUNT)
    parser.add_argument("--payments", type=int, default=DEFAULT_PAYMENT_COUNT)
    parser.add_argument("--utxo-seed", type=int, default=UTXO_DATASET_SEED)
    parser.add_argument("--payment-seed", type=int, default=PAYMENT_DATASET_SEED)
    args = parser.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    utxo_path = out / "utxos.csv"
    payment_path = out / "payments.csv"
    write_utxos(utxo_path, synthetic_utxo_dataset(args.utxos, args.utxo_seed))
    write_payments(
        payment_path, synthetic_payment_dataset(args.payments, args.payment_seed)
    )
    print(f"wrote {utxo_path} ({args.utxos} rows) and {payment_path} ({args.payments} rows)")


if __name__ == "__main__":
    main()
