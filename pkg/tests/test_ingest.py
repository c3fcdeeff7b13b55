import io
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_record, random_records
from taskatlas.core import Channel, IncomeGroup, Margin
from taskatlas.ingest import (
    IngestError,
    deduplicate,
    load_country_registry,
    load_covariates,
    load_employment,
    parse_labels,
    read_labels,
)
from taskatlas.reweight import Sex

VALID_LINE = json.dumps(
    {
        "task_id": "t1",
        "country": "AAA",
        "exposure_level": 2,
        "dominant_channel": "rule_based_workflow",
        "substitution_path": True,
        "augmentation_path": True,
        "margin": "both",
        "ai_materiality": False,
        "dominant_ai_function": "none",
        "short_rationale": "r",
        "substitution_summary": "",
        "augmentation_summary": "",
    }
)


class TestParseLabels:
    def test_clean_jsonl(self):
        stream = io.StringIO("\n".join([VALID_LINE] * 3) + "\n")
        rows, report = parse_labels(stream, "jsonl")
        assert report.rows_read == 3
        assert report.rows_rejected == 0
        assert len(rows) == 3

    def test_truncated_line_rejected_with_line_number(self):
        stream = io.StringIO(VALID_LINE + "\n" + VALID_LINE[: len(VALID_LINE) // 2] + "\n" + VALID_LINE + "\n")
        rows, report = parse_labels(stream, "jsonl")
        assert len(rows) == 2
        assert report.rows_rejected == 1
        assert report.violations[0][0] == 2

    def test_rows_read_balance(self):
        stream = io.StringIO(VALID_LINE + "\nnot json\n\n" + VALID_LINE + "\n")
        _, report = parse_labels(stream, "jsonl")
        assert report.rows_read == report.rows_accepted + report.rows_rejected == 3

    def test_order_preserved(self):
        lines = []
        for i in range(5):
            obj = json.loads(VALID_LINE)
            obj["task_id"] = f"t{i}"
            lines.append(json.dumps(obj))
        rows, _ = parse_labels(io.StringIO("\n".join(lines)), "jsonl")
        assert [r[1]["task_id"] for r in rows] == [f"t{i}" for i in range(5)]

    def test_unknown_format(self):
        with pytest.raises(IngestError):
            parse_labels(io.StringIO(""), "parquet")

    def test_csv_round(self):
        csv_text = (
            "task_id,country,exposure_level,dominant_channel,substitution_path,augmentation_path,"
            "margin,ai_materiality,dominant_ai_function,short_rationale,substitution_summary,augmentation_summary\n"
            't1,AAA,2,rule_based_workflow,true,true,both,false,none,r,,\n'
        )
        rows, report = parse_labels(io.StringIO(csv_text), "csv")
        assert report.rows_accepted == 1
        assert rows[0][1]["margin"] == "both"

    def test_comment_lines_skipped(self):
        stream = io.StringIO("# tool: something\n" + VALID_LINE + "\n")
        rows, report = parse_labels(stream, "jsonl")
        assert report.rows_read == 1
        assert len(rows) == 1

    def test_rows_read_equals_independent_line_count(self):
        # the shipped fixture file, counted with plain text tools
        path = Path(__file__).parent / "fixtures" / "labels.jsonl"
        text = path.read_text(encoding="utf-8")
        expected = sum(1 for line in text.splitlines() if line.strip() and not line.startswith("#"))
        _, report = parse_labels(io.StringIO(text), "jsonl")
        assert report.rows_read == expected


class TestReadLabels:
    def test_parse_serialize_parse_fixed_point(self, tmp_path):
        path = tmp_path / "labels.jsonl"
        path.write_text(VALID_LINE + "\n", encoding="utf-8")
        dataset, report = read_labels(str(path))
        assert report.rows_accepted == 1
        serialized = dataset.to_jsonl()
        dataset2, _ = read_labels(io.StringIO(serialized))
        assert dataset2.records == dataset.records
        assert dataset2.to_jsonl() == serialized

    def test_schema_violation_counted(self, tmp_path):
        bad = json.loads(VALID_LINE)
        bad["margin"] = "augment"
        bad["augmentation_path"] = False
        path = tmp_path / "labels.jsonl"
        path.write_text(VALID_LINE + "\n" + json.dumps(bad) + "\n", encoding="utf-8")
        dataset, report = read_labels(str(path))
        assert report.rows_read == 2
        assert report.rows_rejected == 1  # margin-path contradiction
        assert len(dataset) == 1


class TestDeduplicate:
    def test_identical_rows_collapse_unchanged(self):
        record = make_record("t1")
        dataset = deduplicate([record, record])
        assert len(dataset) == 1
        assert dataset.records[("AAA", "t1")] == record

    def test_mode_wins(self):
        records = [
            make_record("t1", exposure=2),
            make_record("t1", exposure=2),
            make_record("t1", exposure=3),
        ]
        assert deduplicate(records).records[("AAA", "t1")].exposure == 2

    def test_exposure_tie_breaks_low(self):
        records = [make_record("t1", exposure=2), make_record("t1", exposure=3)]
        assert deduplicate(records).records[("AAA", "t1")].exposure == 2

    def test_enum_tie_breaks_lexicographic(self):
        records = [
            make_record("t1", channel=Channel.RULE_BASED_WORKFLOW),
            make_record("t1", channel=Channel.INFERENCE_SCORING),
        ]
        assert deduplicate(records).records[("AAA", "t1")].channel is Channel.INFERENCE_SCORING

    def test_merged_record_remains_consistent(self):
        records = [
            make_record("t1", exposure=2, margin=Margin.SUBSTITUTE),
            make_record("t1", exposure=2, margin=Margin.SUBSTITUTE),
            make_record("t1", exposure=1, margin=Margin.AUGMENT),
        ]
        merged = deduplicate(records).records[("AAA", "t1")]
        assert merged.margin_raw is Margin.SUBSTITUTE
        assert merged.substitution_path is True

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000))
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        records = random_records(rng, 30, country="AAA")
        # duplicate a few task ids with fresh draws
        records += random_records(rng, 10, country="AAA")
        shuffled = list(records)
        rng.shuffle(shuffled)
        assert deduplicate(records).records == deduplicate(shuffled).records


class TestRegistry:
    def test_load(self, tmp_path):
        path = tmp_path / "registry.csv"
        path.write_text(
            "iso3,name,income_group,region\n"
            "AAA,Alandia,low,Sub-Saharan Africa\n"
            "BBB,Borduria,high,Europe & Central Asia\n"
            "CCC,Villanueva,,Latin America & Caribbean\n",
            encoding="utf-8",
        )
        registry = load_country_registry(str(path))
        assert len(registry) == 3
        assert registry["AAA"].income_group is IncomeGroup.LOW
        assert registry["CCC"].income_group is IncomeGroup.UNCLASSIFIED

    def test_duplicate_iso3_rejected(self, tmp_path):
        path = tmp_path / "registry.csv"
        path.write_text("iso3,name,income_group,region\nAAA,A,low,X\nAAA,A2,high,X\n", encoding="utf-8")
        with pytest.raises(IngestError, match="duplicate iso3"):
            load_country_registry(str(path))

    def test_unknown_income_group_rejected(self, tmp_path):
        path = tmp_path / "registry.csv"
        path.write_text("iso3,name,income_group,region\nAAA,A,middling,X\n", encoding="utf-8")
        with pytest.raises(IngestError, match="unknown income group"):
            load_country_registry(str(path))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "registry.csv"
        path.write_text("iso3,name,income_group,region\n", encoding="utf-8")
        assert load_country_registry(str(path)) == {}


class TestCovariates:
    def test_latest_in_window_wins(self, tmp_path):
        path = tmp_path / "cov.csv"
        path.write_text(
            "iso3,variable,year,value\n"
            "AAA,internet_users,2019,40\n"
            "AAA,internet_users,2022,55\n",
            encoding="utf-8",
        )
        rows = load_covariates(str(path))
        assert rows["AAA"].internet_users == 55

    def test_outside_window_missing(self, tmp_path):
        path = tmp_path / "cov.csv"
        path.write_text("iso3,variable,year,value\nAAA,internet_users,2016,40\n", encoding="utf-8")
        assert "AAA" not in load_covariates(str(path))

    def test_fixed_year_exact(self, tmp_path):
        path = tmp_path / "cov.csv"
        path.write_text(
            "iso3,variable,year,value\nAAA,human_capital,2018,2.1\nAAA,human_capital,2019,2.4\n",
            encoding="utf-8",
        )
        assert load_covariates(str(path))["AAA"].human_capital == 2.4

    def test_bounds_enforced(self, tmp_path):
        path = tmp_path / "cov.csv"
        path.write_text("iso3,variable,year,value\nAAA,internet_users,2022,140\n", encoding="utf-8")
        with pytest.raises(IngestError, match="outside declared bounds"):
            load_covariates(str(path))

    def test_complete_case_hand_count(self, tmp_path):
        path = tmp_path / "cov.csv"
        path.write_text(
            "iso3,variable,year,value\n"
            "AAA,log_gdp_pc,2024,8.0\nAAA,internet_users,2021,50\n"
            "BBB,log_gdp_pc,2024,10.5\n"
            "CCC,internet_users,2020,30\n",
            encoding="utf-8",
        )
        rows = load_covariates(str(path))
        complete_on_both = [
            iso3 for iso3, row in rows.items() if row.log_gdp_pc is not None and row.internet_users is not None
        ]
        assert complete_on_both == ["AAA"]


class TestEmployment:
    def test_clean_fixture_accepted(self, tmp_path):
        lines = ["iso3,year,sex,cell_id,count"]
        for g in range(1, 10):
            lines.append(f"AAA,2023,total,isco{g},10{g}")
        path = tmp_path / "emp.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        table = load_employment(str(path))
        assert len(table.rows) == 9
        assert table.rows[0].sex is Sex.TOTAL

    def test_negative_count_rejected(self, tmp_path):
        path = tmp_path / "emp.csv"
        path.write_text("iso3,year,sex,cell_id,count\nAAA,2023,total,isco1,-4\n", encoding="utf-8")
        with pytest.raises(IngestError, match="negative"):
            load_employment(str(path))

    def test_duplicate_cell_rejected(self, tmp_path):
        path = tmp_path / "emp.csv"
        path.write_text(
            "iso3,year,sex,cell_id,count\nAAA,2023,total,isco1,4\nAAA,2023,total,isco1,5\n",
            encoding="utf-8",
        )
        with pytest.raises(IngestError, match="duplicate"):
            load_employment(str(path))
