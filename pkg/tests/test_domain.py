import pytest
from hypothesis import given
from hypothesis import strategies as st

from litloop.domain import (
    CellValue,
    PaperRecord,
    PropertyDef,
    ResearchInterest,
    SearchRequest,
    normalize_doi,
    normalize_title,
)
from litloop.errors import EmptyTitle, InvalidInterest, MalformedDoi


class TestNormalizeDoi:
    def test_strips_resolver_prefix_and_lowercases(self):
        assert normalize_doi("https://doi.org/10.1000/ABC") == "10.1000/abc"

    def test_already_normalized(self):
        assert normalize_doi("10.1/x") == "10.1/x"

    @pytest.mark.parametrize("raw", ["not-a-doi", "", "10./x", "11.1/x", "10.1000"])
    def test_malformed(self, raw):
        with pytest.raises(MalformedDoi):
            normalize_doi(raw)

    @pytest.mark.parametrize("raw", [
        "doi:10.5555/12345678",
        "http://dx.doi.org/10.5555/12345678",
        "  10.5555/12345678  ",
        "doi:https://doi.org/10.5555/12345678",
    ])
    def test_prefix_variants(self, raw):
        assert normalize_doi(raw) == "10.5555/12345678"

    @given(st.from_regex(r"10\.[0-9]{1,6}/[a-zA-Z0-9.\-_;()]{1,30}", fullmatch=True))
    def test_idempotent(self, doi):
        once = normalize_doi(doi)
        assert normalize_doi(once) == once


class TestNormalizeTitle:
    def test_collapses_punctuation(self):
        assert normalize_title("A Survey:  of KGs!") == "a survey of kgs"

    def test_short(self):
        assert normalize_title("KG") == "kg"

    def test_only_punctuation(self):
        with pytest.raises(EmptyTitle):
            normalize_title("—!!—")

    @given(st.text(min_size=1))
    def test_idempotent_when_valid(self, raw):
        try:
            key = normalize_title(raw)
        except EmptyTitle:
            return
        assert normalize_title(key) == key

    @given(st.from_regex(r"[a-zA-Z0-9 ]{1,40}[a-z]", fullmatch=True))
    def test_case_insensitive(self, raw):
        assert normalize_title(raw.upper()) == normalize_title(raw.lower())


class TestTypes:
    def test_record_requires_title(self):
        with pytest.raises(ValueError):
            PaperRecord(record_id="r", title="  ", provenance=(("c", "n"),))

    def test_record_requires_provenance(self):
        with pytest.raises(ValueError):
            PaperRecord(record_id="r", title="T")

    def test_search_request_year_range(self):
        with pytest.raises(ValueError):
            SearchRequest(query="q", connector_ids=("a",), year_range=(2022, 2020))

    def test_search_request_max_results(self):
        with pytest.raises(ValueError):
            SearchRequest(query="q", connector_ids=("a",), max_results=0)

    def test_interest_must_be_nonempty(self):
        with pytest.raises(InvalidInterest):
            ResearchInterest(text="   ")

    def test_property_kind_checked(self):
        with pytest.raises(ValueError):
            PropertyDef(name="x", expected_kind="integer")

    def test_cell_value_variants(self):
        found = CellValue.found("x")
        missing = CellValue.not_found()
        assert found.is_found and not missing.is_found
        with pytest.raises(ValueError):
            CellValue.found("")
