"""Tests for CSV contracts, JSON round trips, and summary tables."""

from __future__ import annotations

import json
from fractions import Fraction

import pytest

from coinlever.datasets import synthetic_payment_dataset, synthetic_utxo_dataset
from coinlever.io import (
    DuplicateId,
    DuplicateRank,
    NonPositiveValue,
    ParseError,
    SUMMARY_COLUMNS,
    cell_dict,
    cell_from_dict,
    emit_report,
    fixed_str,
    fraction_str,
    load_payments,
    load_report,
    load_utxos,
    report_dict,
    report_from_dict,
    summary_csv,
    summary_markdown,
    write_payments,
    write_utxos,
)
from coinlever.simulation import Mode, ScenarioConfig, run_cell, run_scenario

DESK = dict(
    utxo_pool_size=100,
    payment_pool_size=24,
    iterations_per_sample=2,
    repetitions=2,
    budget_ms=30_000,
    node_budget=6_000,
)


def desk_cell():
    return run_cell(ScenarioConfig(gamma=200, batch_size=2, rng_seed=5, **DESK))


class TestCsvLoaders:
    def test_utxo_round_trip(self, tmp_path):
        dataset = synthetic_utxo_dataset(25, 3)
        path = tmp_path / "utxos.csv"
        write_utxos(path, dataset)
        assert load_utxos(path) == dataset

    def test_payment_round_trip(self, tmp_path):
        dataset = synthetic_payment_dataset(25, 3)
        path = tmp_path / "payments.csv"
        write_payments(path, dataset)
        assert load_payments(path) == dataset

    def test_singleton(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("id,value_sat\nabc,1234\n")
        assert load_utxos(path) == (load_utxos(path)[0],)
        assert load_utxos(path)[0].value == 1234

    def test_missing_header(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("abc,1234\n")
        with pytest.raises(ParseError):
            load_utxos(path)

    def test_zero_value_rejected(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("id,value_sat\nabc,0\n")
        with pytest.raises(NonPositiveValue):
            load_utxos(path)

    def test_bad_integer_carries_line(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("id,value_sat\na,10\nb,x\n")
        with pytest.raises(ParseError) as exc:
            load_utxos(path)
        assert exc.value.line == 3

    def test_duplicate_utxo_id(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("id,value_sat\na,10\na,11\n")
        with pytest.raises(DuplicateId):
            load_utxos(path)

    def test_payments_rank_defaults_to_row_order(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("id,value_sat\na,10\nb,11\nc,12\n")
        assert [p.urgency_rank for p in load_payments(path)] == [0, 1, 2]

    def test_payments_explicit_ranks(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("id,value_sat,urgency_rank\na,10,5\nb,11,2\n")
        assert [p.urgency_rank for p in load_payments(path)] == [5, 2]

    def test_duplicate_rank(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("id,value_sat,urgency_rank\na,10,1\nb,11,1\n")
        with pytest.raises(DuplicateRank):
            load_payments(path)

    def test_field_count_mismatch(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("id,value_sat\na,10,extra\n")
        with pytest.raises(ParseError):
            load_utxos(path)


class TestFormatting:
    def test_fraction_str_integer(self):
        assert fraction_str(Fraction(7)) == "7"

    def test_fraction_str_decimal(self):
        assert fraction_str(Fraction("0.54")) == "0.54"
        assert fraction_str(Fraction("-1.25")) == "-1.25"

    def test_fraction_str_nonterminating(self):
        assert fraction_str(Fraction(1, 3)) == "1/3"
        assert Fraction(fraction_str(Fraction(22, 7))) == Fraction(22, 7)

    def test_fixed_str(self):
        assert fixed_str(Fraction("0.2448901"), 6) == "0.244890"
        assert fixed_str(Fraction(1, 3), 4) == "0.3333"
        assert fixed_str(Fraction(-1, 3), 4) == "-0.3333"
        assert fixed_str(Fraction(5), 2) == "5.00"


class TestJsonRoundTrip:
    def test_report_round_trip_is_identity(self):
        config = ScenarioConfig(gamma=60, batch_size=2, rng_seed=3, **DESK)
        report = run_scenario(config, Mode.LEVERAGE)
        assert report_from_dict(report_dict(report)) == report

    def test_cell_round_trip_via_file(self, tmp_path):
        cell = desk_cell()
        path = tmp_path / "report.json"
        emit_report([cell], "json", path)
        (loaded,) = load_report(path)
        assert loaded == cell

    def test_json_money_fields_never_floats(self, tmp_path):
        cell = desk_cell()
        path = tmp_path / "report.json"
        emit_report([cell], "json", path)
        payload = json.loads(path.read_text())

        def walk(node):
            if isinstance(node, float):
                raise AssertionError(f"float leaked into JSON: {node}")
            if isinstance(node, dict):
                for v in node.values():
                    walk(v)
            if isinstance(node, list):
                for v in node:
                    walk(v)

        walk(payload)

    def test_round_trip_through_dict_for_beta_styles(self):
        cell = desk_cell()
        assert cell_from_dict(cell_dict(cell)) == cell


class TestSummaries:
    def test_empty_report_headers_only(self):
        assert summary_csv([]) == ",".join(SUMMARY_COLUMNS) + "\n"

    def test_one_cell_two_rows(self):
        cell = desk_cell()
        lines = summary_csv([cell]).strip().splitlines()
        assert lines[0] == ",".join(SUMMARY_COLUMNS)
        assert len(lines) == 3
        no_lev, lev = lines[1].split(","), lines[2].split(",")
        assert no_lev[3] == "no-leverage" and lev[3] == "leverage"
        assert no_lev[0] == "200" and no_lev[1] == "2"
        # Savings columns only on the leverage row.
        assert no_lev[9] == "" and no_lev[10] == ""

    def test_csv_shape_is_pinned(self):
        cell = desk_cell()
        for line in summary_csv([cell]).strip().splitlines()[1:]:
            assert len(line.split(",")) == len(SUMMARY_COLUMNS)

    def test_markdown_has_three_tables(self):
        text = summary_markdown([desk_cell()])
        assert "### Results without leverage" in text
        assert "### Results with leverage" in text
        assert "### Savings per payment request" in text
        assert text.count("| gamma |") == 3

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report([], "xml", tmp_path / "x")
