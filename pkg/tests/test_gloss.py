"""Gloss selection, re-parsing, and cycle-consistency evaluation."""

import json
import random

import pytest

from didyoumean.dsl import (
    DialogueExample,
    FunctionSpec,
    GrammarSpec,
    RuleSpec,
    compile_surface,
)
from didyoumean.errors import EmptyBeam, EmptyCorpus, MissingGlossModel
from didyoumean.gloss import (
    best_gloss,
    cycle_consistency_eval,
    reparse,
    write_gloss_audit,
)
from didyoumean.model import BeamHypothesis, SequenceModel, parse_input


@pytest.fixture(scope="module")
def cases(corpus, test_records):
    """(example, predicted tokens) pairs from the seeded test split."""
    test = corpus.split("test")
    picked = []
    for ex, rec in zip(test, test_records):
        assert ex.id == rec.id
        if rec.terminated and rec.tokens:
            picked.append((ex, tuple(rec.tokens)))
        if len(picked) == 30:
            break
    return picked


@pytest.fixture(scope="module")
def noised_subset(corpus):
    test = corpus.split("test")
    noised = [
        ex
        for ex in test
        if corpus.meta[ex.id]["typo"] or corpus.meta[ex.id]["synonym"]
    ]
    return noised[:100]


class _UnterminatedStub:
    direction = "gloss"

    def beam_search(self, model_input, beam=5):
        return [BeamHypothesis(("never",), -1.0, (0.5,), False)]


class TestBestGloss:
    def test_singleton_beam(self, gloss_model, parse_model, cases):
        ex, predicted = cases[0]
        choice = best_gloss(
            gloss_model, parse_model, (ex.context_user, ex.context_agent), predicted, n=1
        )
        assert len(choice.candidates) == 1
        assert choice.index == 0

    def test_selected_score_recomputation(self, gloss_model, parse_model, cases):
        for ex, predicted in cases[:10]:
            context = (ex.context_user, ex.context_agent)
            choice = best_gloss(gloss_model, parse_model, context, predicted)
            total, _ = parse_model.forced_score(
                parse_input(ex.context_user, ex.context_agent, choice.text), predicted
            )
            assert choice.cycle_score == total

    def test_matches_brute_force_argmax(self, gloss_model, parse_model, cases):
        for ex, predicted in cases:
            context = (ex.context_user, ex.context_agent)
            choice = best_gloss(gloss_model, parse_model, context, predicted)
            scores = [c.cycle_score for c in choice.candidates]
            brute = max(range(len(scores)), key=lambda i: (scores[i], -i))
            assert choice.index == brute
            assert all(choice.cycle_score >= s for s in scores)

    def test_deterministic(self, gloss_model, parse_model, cases):
        ex, predicted = cases[1]
        context = (ex.context_user, ex.context_agent)
        first = best_gloss(gloss_model, parse_model, context, predicted)
        second = best_gloss(gloss_model, parse_model, context, predicted)
        assert first == second

    def test_candidates_stay_in_vocabulary(self, gloss_model, parse_model, cases):
        vocab = set(gloss_model.vocabulary_)
        for ex, predicted in cases[:10]:
            context = (ex.context_user, ex.context_agent)
            choice = best_gloss(gloss_model, parse_model, context, predicted)
            for candidate in choice.candidates:
                assert set(candidate.tokens) <= vocab

    def test_missing_model_rejected(self, parse_model, cases):
        ex, predicted = cases[0]
        context = (ex.context_user, ex.context_agent)
        with pytest.raises(MissingGlossModel):
            best_gloss(None, parse_model, context, predicted)
        with pytest.raises(MissingGlossModel):
            best_gloss(parse_model, parse_model, context, predicted)

    def test_unterminated_beam_rejected(self, parse_model, cases):
        ex, predicted = cases[0]
        with pytest.raises(EmptyBeam):
            best_gloss(
                _UnterminatedStub(),
                parse_model,
                (ex.context_user, ex.context_agent),
                predicted,
            )

    def test_beam_size_validated(self, gloss_model, parse_model, cases):
        ex, predicted = cases[0]
        with pytest.raises(ValueError):
            best_gloss(
                gloss_model,
                parse_model,
                (ex.context_user, ex.context_agent),
                predicted,
                n=0,
            )


class TestReparse:
    def test_identity_on_own_utterance(self, parse_model, corpus):
        clean = next(
            ex
            for ex in corpus.split("test")
            if not corpus.meta[ex.id]["typo"] and not corpus.meta[ex.id]["synonym"]
        )
        context = (clean.context_user, clean.context_agent)
        direct = parse_model.decode_greedy(parse_model.input_for(clean))
        again = reparse(parse_model, context, clean.utterance)
        assert again.tokens == direct.tokens
        assert again.token_confidences == direct.token_confidences

    def test_empty_gloss_is_valid_input(self, parse_model):
        decode = reparse(parse_model, ("", ""), "")
        assert isinstance(decode.tokens, tuple)

    def test_reparse_of_gold_gloss_beats_direct_on_noise(
        self, gloss_model, parse_model, noised_subset
    ):
        direct = 0
        for ex in noised_subset:
            decode = parse_model.decode_greedy(parse_model.input_for(ex))
            direct += decode.terminated and decode.tokens == tuple(
                ex.gold.content_tokens
            )
        direct_accuracy = direct / len(noised_subset)
        report = cycle_consistency_eval(gloss_model, parse_model, noised_subset)
        assert report.accuracy >= direct_accuracy
        assert direct_accuracy == pytest.approx(0.51, abs=0.03)
        assert report.accuracy == pytest.approx(0.59, abs=0.03)


def invertible_setup():
    grammar = GrammarSpec(
        functions={
            "plan": FunctionSpec("plan", ("Name", "Place"), "Act"),
            "name": FunctionSpec("name", ("lit",), "Name"),
            "place": FunctionSpec("place", ("lit",), "Place"),
        },
        pools={"N": ("alpha", "beta"), "P": ("pool", "quay")},
        rules=(
            RuleSpec(
                name="plan",
                skeleton='(plan (name "{N}") (place "{P}"))',
                slots={"N": "N", "P": "P"},
                templates=("go to {P} with {N}",),
            ),
        ),
        agent_templates=("ok",),
    )
    examples = []
    for i, (name, place) in enumerate(
        (n, p) for n in ("alpha", "beta") for p in ("pool", "quay")
    ):
        surface = f'(plan (name "{name}") (place "{place}"))'
        examples.append(
            DialogueExample(
                id=f"inv-{i}",
                context_user="",
                context_agent="",
                utterance=f"go to {place} with {name}",
                gold=compile_surface(surface, grammar),
                split="train",
            )
        )
    return examples


class TestCycleConsistency:
    def test_invertible_toy_is_perfect(self):
        examples = invertible_setup()
        parse = SequenceModel(direction="parse").fit(examples)
        gloss = SequenceModel(direction="gloss").fit(examples)
        report = cycle_consistency_eval(gloss, parse, examples)
        assert report.accuracy == 1.0
        for outcome in report.outcomes:
            assert outcome.correct

    def test_order_invariant(self, gloss_model, parse_model, corpus):
        subset = corpus.split("test")[:40]
        shuffled = list(subset)
        random.Random(4).shuffle(shuffled)
        a = cycle_consistency_eval(gloss_model, parse_model, subset)
        b = cycle_consistency_eval(gloss_model, parse_model, shuffled)
        assert a.accuracy == b.accuracy

    def test_pinned_band_on_seeded_corpus(self, gloss_model, parse_model, corpus):
        subset = corpus.split("test")[:100]
        report = cycle_consistency_eval(gloss_model, parse_model, subset)
        assert 0.41 <= report.accuracy <= 0.47
        assert len(report.outcomes) == 100

    def test_empty_corpus_rejected(self, gloss_model, parse_model):
        with pytest.raises(EmptyCorpus):
            cycle_consistency_eval(gloss_model, parse_model, [])


class TestAudit:
    def test_jsonl_layout(self, gloss_model, parse_model, cases, tmp_path):
        entries = []
        for ex, predicted in cases[:3]:
            context = (ex.context_user, ex.context_agent)
            entries.append(
                (ex.id, best_gloss(gloss_model, parse_model, context, predicted))
            )
        path = tmp_path / "audit.jsonl"
        write_gloss_audit(path, entries)
        lines = path.read_text().splitlines()
        assert len(lines) == 3
        for line, (ex_id, choice) in zip(lines, entries):
            payload = json.loads(line)
            assert list(payload) == ["id", "candidates", "selected_index"]
            assert payload["id"] == ex_id
            assert payload["selected_index"] == choice.index
            assert list(payload["candidates"][0]) == [
                "text",
                "beam_logp",
                "cycle_score",
            ]
