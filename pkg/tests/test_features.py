import datetime as dt

import pytest

from referral_forge.corpus import ReferralRequest
from referral_forge.features import (
    extract_semantic,
    featurize,
    linguistic_properties,
)

# Every example snippet from the two attribute tables; the schema must
# detect each one. This is the testable floor for the pattern sets.
SNIPPET_EXPECTATIONS = [
    ("I was laid off last week.", "mentions_layoff"),
    ("I might get PIP'd soon.", "mentions_pip"),
    ("Discussing [FIRM_NAME].", "mentions_company"),
    ("Seeking software engineering roles.", "mentions_job_title"),
    ("10+ years of experience in tech.", "years_of_experience"),
    ("My TC is $ 150k.", "mentions_salary"),
    ("Looking for better work-life balance.", "reason_for_search"),
    ("Worked as a consultant at X.", "past_experience"),
    ("Skilled in Python and SQL.", "mentions_skills"),
    ("Need this job ASAP!", "urgency"),
    ("Thank you for the advice.", "gratitude"),
    ("Could you please help?", "politeness"),
    ("Hey everyone, need help!", "familiarity"),
    ("I'm struggling, please help!", "desperation"),
    ("We need to work together.", "inclusive_exclusive_pronouns"),
    ("Love my current job!", "contentment"),
    ("Practicing mock interviews.", "readiness"),
    ("Have strong experience in data science.", "evidentiality"),
    ("Happy to assist in return.", "reciprocity"),
    ("Led teams for 10 years.", "high_status"),
    ("This job would change my life.", "gain_loss_framing"),
]


class TestExtractSemantic:
    @pytest.mark.parametrize("snippet,attribute", SNIPPET_EXPECTATIONS)
    def test_table_snippets_detected(self, snippet, attribute, schema):
        flags = extract_semantic(snippet, schema)
        assert flags[attribute] == 1, f"{attribute} missed {snippet!r}"

    def test_empty_text_all_zero(self, schema):
        flags = extract_semantic("", schema)
        assert set(flags.values()) == {0}

    def test_whitespace_and_case_invariant(self, schema):
        a = extract_semantic("  thank YOU for everything  ", schema)
        b = extract_semantic("Thank you for everything", schema)
        assert a == b

    def test_schema_has_21_attributes(self, schema):
        assert len(schema.attribute_names) == 21
        platform = [a for a in schema.attributes if a.source == "platform"]
        literature = [a for a in schema.attributes if a.source == "literature"]
        assert len(platform) == 9
        assert len(literature) == 12


class TestLinguisticProperties:
    def test_all_distinct_tokens(self, dictionary):
        stats = linguistic_properties("a b c", dictionary)
        assert stats.type_token_ratio == 1.0
        assert stats.word_count == 3

    def test_repeated_token_ratio(self, dictionary):
        stats = linguistic_properties("the the the", dictionary)
        assert stats.type_token_ratio == pytest.approx(1 / 3)

    def test_empty_text_convention(self, dictionary):
        stats = linguistic_properties("", dictionary)
        assert stats.type_token_ratio == 1.0
        assert stats.word_count == 0
        assert stats.readability_score == 0.0
        assert stats.spelling_errors == 0

    def test_flesch_hand_computation(self, dictionary):
        # 12 monosyllabic words over 2 sentences:
        # 206.835 - 1.015 * (12/2) - 84.6 * (12/12) = 116.145
        text = "The cat sat on the mat. The dog ran to the park."
        stats = linguistic_properties(text, dictionary)
        assert stats.word_count == 12
        assert stats.readability_score == pytest.approx(116.145, abs=1e-9)

    def test_mask_tokens_not_spelling_errors(self, dictionary):
        stats = linguistic_properties("I am a [ROLE] in [LOCATION]", dictionary)
        assert stats.spelling_errors == 0

    def test_unknown_token_counts_as_error(self, dictionary):
        stats = linguistic_properties("I am a qzxqzx", dictionary)
        assert stats.spelling_errors == 1


class TestFeaturize:
    def _request(self, title, body):
        return ReferralRequest(
            id="r", date=dt.date(2024, 1, 1), masked_title=title, masked_body=body, label=False
        )

    def test_salary_snippet(self, schema, dictionary):
        vec = featurize(self._request("Question", "My TC is $ 150k."), schema, dictionary)
        assert vec.flags["mentions_salary"] == 1

    def test_deterministic(self, schema, dictionary):
        request = self._request("Need a referral", "Thank you. I am a [ROLE].")
        a = featurize(request, schema, dictionary)
        b = featurize(request, schema, dictionary)
        assert a == b
        assert (a.as_array() == b.as_array()).all()

    def test_vector_length_21_flags_4_numerics(self, schema, dictionary):
        vec = featurize(self._request("t", "b"), schema, dictionary)
        assert len(vec.flags) == 21
        assert vec.as_array().shape == (25,)

    def test_title_and_body_both_scanned(self, schema, dictionary):
        vec = featurize(self._request("Thank you all", "no markers here"), schema, dictionary)
        assert vec.flags["gratitude"] == 1
