"""Count-based locally-normalized sequence predictor.

A deliberately small stand-in for a neural parser: conditional counts
over (input n-gram feature, previous output token) pairs, additive
smoothing, and a temperature knob on the log-probabilities. Trains in
milliseconds, decodes deterministically, and is imperfect enough on a
noised corpus to produce the full confidence spectrum the rest of the
toolkit needs.

Two training directions share the machinery: ``parse`` maps dialogue
context to program tokens, ``gloss`` maps context plus program to an
utterance. External parsers plug in through the interchange file format
(`write_interchange` / `read_interchange`) instead of this class.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .errors import EmptyCorpus, MalformedRecord, TokenOutOfVocabulary
from .text import tokenize

BOS = "<s>"
END = "<end>"

MODEL_FORMAT = "didyoumean-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ModelInput:
    """Conditioning context: named fields, each a token sequence."""

    fields: tuple[tuple[str, tuple[str, ...]], ...]


def parse_input(
    context_user: str | None, context_agent: str | None, utterance: str
) -> ModelInput:
    return ModelInput(
        (
            ("c", tuple(tokenize(context_user or ""))),
            ("a", tuple(tokenize(context_agent or ""))),
            ("u", tuple(tokenize(utterance))),
        )
    )


def gloss_input(
    context_user: str | None, context_agent: str | None, program_tokens
) -> ModelInput:
    return ModelInput(
        (
            ("c", tuple(tokenize(context_user or ""))),
            ("a", tuple(tokenize(context_agent or ""))),
            ("p", tuple(program_tokens)),
        )
    )


# Voting exponent per input field. The two context fields carry almost
# no parse-relevant signal in the built-in grammar but add many
# bias-flavored votes; a small exponent keeps them usable without
# letting them outshout the current utterance.
_FIELD_WEIGHTS = {"c": 0.05, "a": 0.05}


def _features(model_input: ModelInput) -> tuple:
    """(feature, voting weight) pairs for a conditioning input."""
    feats = {("bias",): 1.0}
    for field, tokens in model_input.fields:
        weight = _FIELD_WEIGHTS.get(field, 1.0)
        for tok in tokens:
            feats.setdefault(("u", field, tok), weight)
        for a, b in zip(tokens, tokens[1:]):
            feats.setdefault(("b", field, a, b), weight)
    return tuple(feats.items())


def _prefix_features(prefix) -> tuple:
    """Output-prefix conditioning beyond the prefix n-gram.

    Quoted literal tokens are skipped: they are near-unique and their
    sparse rows add noise, while function tokens carry the structural
    state (an open withAttendee still owes a person).
    """
    return tuple(
        dict.fromkeys((("pfx", tok), 1.0) for tok in prefix if not tok.startswith('"'))
    )


LIT = "<lit>"


def _prev_key(prefix) -> tuple[str, str]:
    """Last two output tokens, literals pooled into one class.

    Pooling keeps the conditioning rows dense: which particular date was
    emitted says nothing about what the structure owes next, but
    fragmenting counts per literal value would make every row a sparse
    chance intersection.
    """
    a = prefix[-2] if len(prefix) >= 2 else BOS
    b = prefix[-1] if prefix else BOS
    if a.startswith('"'):
        a = LIT
    if b.startswith('"'):
        b = LIT
    return (a, b)


@dataclass(frozen=True)
class StepDistribution:
    """Top-k slice of one decoding step's output distribution."""

    entries: tuple[tuple[str, float], ...]
    tail_mass: float

    def probability_of(self, token: str) -> float:
        for tok, p in self.entries:
            if tok == token:
                return p
        raise MalformedRecord(f"{token!r} not among the step's entries")


@dataclass(frozen=True)
class ScoredDecode:
    """A decoded sequence with its per-step evidence.

    `tokens` holds content tokens only; the end symbol never appears and
    its emission step is not recorded here.
    """

    tokens: tuple[str, ...]
    steps: tuple[StepDistribution, ...]
    token_confidences: tuple[float, ...]
    terminated: bool


@dataclass(frozen=True)
class BeamHypothesis:
    tokens: tuple[str, ...]
    logprob: float
    token_confidences: tuple[float, ...]
    terminated: bool


@dataclass(frozen=True)
class NucleusCandidate:
    tokens: tuple[str, ...]
    min_confidence: float
    token_confidences: tuple[float, ...]


def apply_nucleus_rule(candidates, cutoff: float, cap: int) -> list:
    """Keep candidates until their min-confidences sum past the cutoff.

    Candidates must already be sorted by descending min-confidence. The
    element that crosses the cutoff is included; the cap always binds.
    """
    out = []
    cumulative = 0.0
    for candidate in candidates:
        if len(out) >= cap:
            break
        out.append(candidate)
        cumulative += candidate.min_confidence
        if cumulative > cutoff:
            break
    return out


class SequenceModel(BaseEstimator):
    """Trainable count model over output token sequences.

    Parameters
    ----------
    direction : "parse" or "gloss"
        What the model predicts: program tokens from dialogue context, or
        utterance tokens from context plus program.
    alpha : float
        Additive smoothing constant, > 0.
    temperature : float
        Applied to log-probabilities before renormalization; preserves
        the per-step argmax. Values < 1 sharpen, > 1 flatten.
    top_k : int
        StepDistribution truncation width.
    max_len : int
        Decoding length cap.
    """

    def __init__(
        self,
        direction: str = "parse",
        alpha: float = 0.1,
        temperature: float = 1.0,
        top_k: int = 5,
        max_len: int = 64,
    ):
        self.direction = direction
        self.alpha = alpha
        self.temperature = temperature
        self.top_k = top_k
        self.max_len = max_len

    # -- training ----------------------------------------------------

    def input_for(self, example) -> ModelInput:
        if self.direction == "gloss":
            return gloss_input(
                example.context_user, example.context_agent, example.gold.content_tokens
            )
        return parse_input(example.context_user, example.context_agent, example.utterance)

    def output_for(self, example) -> tuple[str, ...]:
        if self.direction == "gloss":
            return tuple(tokenize(example.utterance))
        return tuple(example.gold.content_tokens)

    def fit(self, X, y=None):
        """Count transitions over the examples; freezes the tables."""
        if self.direction not in ("parse", "gloss"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.alpha <= 0 or self.temperature <= 0:
            raise ValueError("alpha and temperature must be positive")
        examples = list(X)
        if not examples:
            raise EmptyCorpus("cannot train on an empty corpus")

        counts: dict[tuple, dict[str, int]] = {}
        vocab: set[str] = {END}
        for example in examples:
            input_feats = _features(self.input_for(example))
            outputs = list(self.output_for(example)) + [END]
            for t, token in enumerate(outputs):
                vocab.add(token)
                prefix = outputs[:t]
                prev = _prev_key(prefix)
                for feat, _ in input_feats + _prefix_features(prefix):
                    row = counts.setdefault((feat, prev), {})
                    row[token] = row.get(token, 0) + 1

        self.vocabulary_ = tuple(sorted(vocab))
        self._index = {tok: i for i, tok in enumerate(self.vocabulary_)}
        self._counts = counts
        self._freeze_rows()
        return self

    def _freeze_rows(self):
        """Precompute per-row log-count increments for fast step queries."""
        log_alpha = math.log(self.alpha)
        rows = {}
        for key, row in self._counts.items():
            idx = np.fromiter(
                (self._index[t] for t in row), dtype=np.int64, count=len(row)
            )
            vals = np.fromiter(
                (math.log(c + self.alpha) - log_alpha for c in row.values()),
                dtype=np.float64,
                count=len(row),
            )
            rows[key] = (idx, vals)
        self._rows = rows

    def _check_fitted(self):
        if not hasattr(self, "_rows"):
            raise EmptyCorpus("model is not fitted")

    # -- step distributions --------------------------------------------

    def _logits(self, feats: tuple, prev: tuple[str, str]) -> np.ndarray:
        z = np.zeros(len(self.vocabulary_))
        for feat, weight in feats:
            row = self._rows.get((feat, prev))
            if row is not None:
                z[row[0]] += weight * row[1] if weight != 1.0 else row[1]
        return z

    def _probs(self, feats: tuple, prev: tuple[str, str]) -> np.ndarray:
        z = self._logits(feats, prev) / self.temperature
        z -= z.max()
        p = np.exp(z)
        p /= p.sum()
        return p

    def _order(self, p: np.ndarray) -> np.ndarray:
        # descending probability, ties by vocabulary order
        return np.lexsort((np.arange(len(p)), -p))

    def _step_cache(self, model_input: ModelInput):
        """Per-decode cache keyed by (prefix feature set, previous token).

        Distributions depend on nothing else, so repeated sampling and
        beam expansion reuse most step computations.
        """
        input_feats = _features(model_input)
        cache: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}

        def lookup(prefix: tuple[str, ...]) -> tuple[np.ndarray, np.ndarray]:
            pfx = _prefix_features(prefix)
            prev = _prev_key(prefix)
            key = (pfx, prev)
            hit = cache.get(key)
            if hit is None:
                p = self._probs(input_feats + pfx, prev)
                hit = cache[key] = (p, self._order(p))
            return hit

        return lookup

    def _truncate(self, p: np.ndarray, order: np.ndarray) -> StepDistribution:
        top = order[: self.top_k]
        entries = tuple((self.vocabulary_[i], float(p[i])) for i in top)
        covered = float(p[top].sum())
        return StepDistribution(entries=entries, tail_mass=max(0.0, 1.0 - covered))

    def step(self, model_input: ModelInput, prefix) -> StepDistribution:
        """Distribution over the next token given the decoded prefix."""
        self._check_fitted()
        prefix = tuple(prefix)
        for token in prefix:
            if token not in self._index:
                raise TokenOutOfVocabulary(f"prefix token {token!r} not in vocabulary")
        feats = _features(model_input) + _prefix_features(prefix)
        p = self._probs(feats, _prev_key(prefix))
        return self._truncate(p, self._order(p))

    # -- decoding ------------------------------------------------------

    def decode_greedy(self, model_input: ModelInput, max_len: int | None = None) -> ScoredDecode:
        self._check_fitted()
        limit = self.max_len if max_len is None else max_len
        lookup = self._step_cache(model_input)
        end_index = self._index[END]
        tokens: list[str] = []
        steps: list[StepDistribution] = []
        confidences: list[float] = []
        terminated = False
        for _ in range(limit):
            p, order = lookup(tuple(tokens))
            best = int(order[0])
            if best == end_index:
                terminated = True
                break
            tokens.append(self.vocabulary_[best])
            steps.append(self._truncate(p, order))
            confidences.append(float(p[best]))
        return ScoredDecode(tuple(tokens), tuple(steps), tuple(confidences), terminated)

    def predict(self, X) -> list[tuple[str, ...]]:
        """Greedy output tokens for each example, sklearn-style."""
        return [self.decode_greedy(self.input_for(ex)).tokens for ex in X]

    def beam_search(
        self, model_input: ModelInput, beam: int = 5, max_len: int | None = None
    ) -> list[BeamHypothesis]:
        """Top hypotheses by sequence log-probability.

        Hypotheses that hit max_len unterminated still include the end
        symbol's log-probability so every item's score equals
        forced_score of its own tokens.
        """
        self._check_fitted()
        if beam < 1:
            raise ValueError("beam must be >= 1")
        limit = self.max_len if max_len is None else max_len
        lookup = self._step_cache(model_input)
        end_index = self._index[END]

        # (tokens, logp, confidences)
        alive: list[tuple[tuple[str, ...], float, tuple[float, ...]]] = [((), 0.0, ())]
        done: list[BeamHypothesis] = []
        for _ in range(limit):
            if not alive:
                break
            expansions: list[tuple[tuple[str, ...], float, tuple[float, ...]]] = []
            for tokens, logp, confs in alive:
                p, order = lookup(tokens)
                end_p = float(p[end_index])
                if end_p > 0.0:
                    done.append(BeamHypothesis(tokens, logp + math.log(end_p), confs, True))
                kept = 0
                # only the top `beam` content continuations per parent can
                # survive the global cut
                for i in order:
                    if kept >= beam:
                        break
                    if i == end_index:
                        continue
                    prob = float(p[i])
                    if prob <= 0.0:
                        break
                    expansions.append(
                        (tokens + (self.vocabulary_[i],), logp + math.log(prob), confs + (prob,))
                    )
                    kept += 1
            expansions.sort(key=lambda h: (-h[1], h[0]))
            alive = expansions[:beam]
        for tokens, logp, confs in alive:
            p, _ = lookup(tokens)
            end_p = float(p[end_index])
            score = logp + (math.log(end_p) if end_p > 0 else -math.inf)
            done.append(BeamHypothesis(tokens, score, confs, False))
        done.sort(key=lambda h: (-h.logprob, h.tokens))
        return done[:beam]

    def forced_score(self, model_input: ModelInput, target) -> tuple[float, tuple[float, ...]]:
        """Log-probability of a fixed target sequence.

        The total includes the end symbol's step; the returned per-step
        probabilities align with the target tokens only.
        """
        self._check_fitted()
        target = tuple(target)
        for token in target:
            if token not in self._index:
                raise TokenOutOfVocabulary(f"target token {token!r} not in vocabulary")
        lookup = self._step_cache(model_input)
        total = 0.0
        per_step: list[float] = []
        for t, token in enumerate(target):
            p, _ = lookup(target[:t])
            prob = float(p[self._index[token]])
            per_step.append(prob)
            total += math.log(prob) if prob > 0 else -math.inf
        p, _ = lookup(target)
        end_p = float(p[self._index[END]])
        total += math.log(end_p) if end_p > 0 else -math.inf
        return total, tuple(per_step)

    def nucleus_candidates(
        self,
        model_input: ModelInput,
        cutoff: float = 0.85,
        cap: int = 10,
        max_len: int | None = None,
        seed: int = 0,
        attempts: int = 200,
        validate=None,
    ) -> list[NucleusCandidate]:
        """Distinct full-sequence samples, kept until their min-token
        confidences cumulatively exceed the cutoff (or the cap binds).

        The greedy decode seeds the pool; sampled duplicates and, when a
        validator is given, invalid sequences are discarded.
        """
        self._check_fitted()
        if not 0 < cutoff <= 1:
            raise ValueError("cutoff must be in (0, 1]")
        if cap < 1:
            raise ValueError("cap must be >= 1")
        limit = self.max_len if max_len is None else max_len
        lookup = self._step_cache(model_input)
        end_index = self._index[END]
        rng = random.Random(seed)

        pool: dict[tuple[str, ...], NucleusCandidate] = {}

        def consider(tokens: tuple[str, ...], confs: tuple[float, ...]):
            if not tokens or tokens in pool:
                return
            if validate is not None and not validate(tokens):
                return
            pool[tokens] = NucleusCandidate(tokens, min(confs), confs)

        greedy = self.decode_greedy(model_input, max_len=limit)
        if greedy.terminated:
            consider(greedy.tokens, greedy.token_confidences)

        for _ in range(attempts):
            tokens: list[str] = []
            confs: list[float] = []
            terminated = False
            for _ in range(limit):
                p, _ = lookup(tuple(tokens))
                i = rng.choices(range(len(p)), weights=p)[0]
                if i == end_index:
                    terminated = True
                    break
                tokens.append(self.vocabulary_[i])
                confs.append(float(p[i]))
            if terminated:
                consider(tuple(tokens), tuple(confs))

        ordered = sorted(pool.values(), key=lambda c: (-c.min_confidence, c.tokens))
        return apply_nucleus_rule(ordered, cutoff, cap)

    # -- persistence ----------------------------------------------------

    def save(self, path: str | Path) -> None:
        self._check_fitted()
        payload = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "direction": self.direction,
            "alpha": self.alpha,
            "temperature": self.temperature,
            "top_k": self.top_k,
            "max_len": self.max_len,
            "vocabulary": list(self.vocabulary_),
            "counts": [
                {"feature": list(feat), "prev": list(prev), "row": row}
                for (feat, prev), row in sorted(self._counts.items())
            ],
        }
        Path(path).write_text(json.dumps(payload) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SequenceModel":
        payload = json.loads(Path(path).read_text())
        if payload.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path} is not a model file")
        if payload.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {payload.get('version')}")
        model = cls(
            direction=payload["direction"],
            alpha=payload["alpha"],
            temperature=payload["temperature"],
            top_k=payload["top_k"],
            max_len=payload["max_len"],
        )
        model.vocabulary_ = tuple(payload["vocabulary"])
        model._index = {tok: i for i, tok in enumerate(model.vocabulary_)}
        model._counts = {
            (tuple(entry["feature"]), tuple(entry["prev"])): dict(entry["row"])
            for entry in payload["counts"]
        }
        model._freeze_rows()
        return model


def train(examples, direction: str = "parse", **params) -> SequenceModel:
    """Convenience wrapper: construct and fit in one call."""
    return SequenceModel(direction=direction, **params).fit(examples)


def with_temperature(model: SequenceModel, temperature: float) -> SequenceModel:
    """Same counts, different temperature; the original stays frozen."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    clone = SequenceModel(
        direction=model.direction,
        alpha=model.alpha,
        temperature=temperature,
        top_k=model.top_k,
        max_len=model.max_len,
    )
    clone.vocabulary_ = model.vocabulary_
    clone._index = model._index
    clone._counts = model._counts
    clone._rows = model._rows
    return clone


# -- interchange format -----------------------------------------------


@dataclass(frozen=True)
class InterchangeRecord:
    """One prediction in the external-parser interchange format."""

    id: str
    decode: ScoredDecode
    gold_tokens: tuple[str, ...]

    @property
    def tokens(self) -> tuple[str, ...]:
        return self.decode.tokens

    @property
    def steps(self) -> tuple[StepDistribution, ...]:
        return self.decode.steps

    @property
    def token_confidences(self) -> tuple[float, ...]:
        return self.decode.token_confidences

    @property
    def terminated(self) -> bool:
        return self.decode.terminated


def decode_corpus(model: SequenceModel, examples) -> list[InterchangeRecord]:
    """Greedy-decode every example into interchange records."""
    records = []
    for example in examples:
        decode = model.decode_greedy(model.input_for(example))
        records.append(
            InterchangeRecord(example.id, decode, tuple(example.gold.content_tokens))
        )
    return records


def write_interchange(records, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "id": r.id,
                "tokens": list(r.tokens),
                "steps": [[[tok, p] for tok, p in s.entries] for s in r.steps],
                "gold_tokens": list(r.gold_tokens),
                "terminated": r.terminated,
            }
            fh.write(json.dumps(obj) + "\n")


def read_interchange(path: str | Path) -> list[InterchangeRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            steps = tuple(
                StepDistribution(
                    entries=tuple((tok, float(p)) for tok, p in raw),
                    tail_mass=max(0.0, 1.0 - sum(float(p) for _, p in raw)),
                )
                for raw in obj["steps"]
            )
            tokens = tuple(obj["tokens"])
            if len(tokens) != len(steps):
                raise MalformedRecord(
                    f"record {obj['id']!r}: {len(tokens)} tokens vs {len(steps)} steps"
                )
            confidences = tuple(
                step.probability_of(token) for token, step in zip(tokens, steps)
            )
            records.append(
                InterchangeRecord(
                    id=obj["id"],
                    decode=ScoredDecode(tokens, steps, confidences, bool(obj["terminated"])),
                    gold_tokens=tuple(obj["gold_tokens"]),
                )
            )
    return records
