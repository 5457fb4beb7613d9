"""Shared domain types: vocabularies, tokenization, candidate sets, RNG.

Token sequences are tuples of integer ids resolved against a
:class:`Vocabulary`.  Ids 0..3 are reserved for pad/unk/bos/eos in that
order; everything downstream (alignment padding, target framing, unit
embeddings) relies on that layout, so it is fixed here once.

All randomness in the package flows through :func:`seeded_rng`, which is
a numpy ``Generator`` over the PCG64 bit generator.  PCG64 is a fixed,
published algorithm with integer-only state transitions, so a given seed
yields the same stream on every platform.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
EOS_ID = 3
RESERVED_SURFACES = ("<pad>", "unk", "<bos>", "<eos>")
N_RESERVED = len(RESERVED_SURFACES)

VOCAB_KINDS = ("source-text", "target-text", "speech-unit")

TokenSeq = tuple[int, ...]


class Token(NamedTuple):
    id: int
    surface: str


@dataclass(frozen=True)
class Vocabulary:
    """Bijection between token surfaces and contiguous integer ids.

    ``surfaces`` always starts with the four reserved tokens.  Lookup of
    an unknown surface returns the unk id rather than raising; id access
    out of range raises, signalling a corrupted sequence.
    """

    surfaces: tuple[str, ...]
    kind: str
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in VOCAB_KINDS:
            raise ValueError(f"unknown vocabulary kind {self.kind!r}")
        if tuple(self.surfaces[:N_RESERVED]) != RESERVED_SURFACES:
            raise ValueError("vocabulary must start with reserved tokens")
        index = {}
        for i, s in enumerate(self.surfaces):
            if s in index:
                raise ValueError(f"duplicate surface {s!r}")
            index[s] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.surfaces)

    def __contains__(self, surface: str) -> bool:
        return surface in self._index

    def lookup(self, surface: str) -> int:
        return self._index.get(surface, UNK_ID)

    def surface(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.surfaces):
            raise ValueError(f"token id {token_id} outside vocabulary of size {len(self)}")
        return self.surfaces[token_id]

    def token(self, token_id: int) -> Token:
        return Token(token_id, self.surface(token_id))

    @property
    def n_units(self) -> int:
        """Number of unit symbols (speech-unit vocabularies only)."""
        if self.kind != "speech-unit":
            raise ValueError("n_units only defined for speech-unit vocabularies")
        return len(self.surfaces) - N_RESERVED


def build_vocabulary(words: Iterable[str], kind: str) -> Vocabulary:
    """Vocabulary from an iterable of words, first occurrence wins."""
    seen: dict[str, None] = {}
    for w in words:
        w = w.lower()
        if w and w not in RESERVED_SURFACES and w not in seen:
            seen[w] = None
    return Vocabulary(RESERVED_SURFACES + tuple(seen), kind)


def unit_vocabulary(n_units: int) -> Vocabulary:
    """Trainable speech-unit vocabulary: surfaces u0..u{K-1} plus reserved."""
    if n_units < 1:
        raise ValueError("need at least one unit symbol")
    return Vocabulary(
        RESERVED_SURFACES + tuple(f"u{i}" for i in range(n_units)), "speech-unit"
    )


def tokenize(text: str, vocab: Vocabulary) -> TokenSeq:
    """Whitespace-split, lowercased word tokenization; OOV maps to unk."""
    if vocab.kind == "speech-unit":
        raise ValueError("cannot tokenize text with a speech-unit vocabulary")
    return tuple(vocab.lookup(w) for w in text.lower().split())


def detokenize(tokens: Sequence[int], vocab: Vocabulary) -> str:
    """Join surfaces with single spaces; reserved tokens except unk dropped."""
    out = []
    for t in tokens:
        s = vocab.surface(t)
        if t in (PAD_ID, BOS_ID, EOS_ID):
            continue
        out.append(s)
    return " ".join(out)


_MASK64 = (1 << 64) - 1


def _tag_entropy(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK64
    if isinstance(tag, str):
        return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")
    raise TypeError(f"rng tag must be int or str, got {type(tag)!r}")


def seeded_rng(seed: int, *tags) -> np.random.Generator:
    """Deterministic random stream for ``seed`` and optional sub-stream tags.

    Tags (ints or strings) derive independent named sub-streams from one
    experiment seed, so inserting a new consumer does not shift the draws
    of existing ones.  String tags are hashed with SHA-256 so the
    derivation does not depend on Python's per-process hash seed.
    """
    entropy = [int(seed) & _MASK64] + [_tag_entropy(t) for t in tags]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class UnitSequence:
    """Discrete speech-unit ids over a unit inventory of size ``n_units``.

    Ids live in [0, n_units); embedding lookup offsets them past the
    reserved ids.  ``deduplicated`` records whether consecutive
    duplicates have been collapsed.
    """

    ids: tuple[int, ...]
    n_units: int
    deduplicated: bool = False

    def __post_init__(self):
        for u in self.ids:
            if not 0 <= u < self.n_units:
                raise ValueError(f"unit id {u} outside [0, {self.n_units})")
        if self.deduplicated:
            for a, b in zip(self.ids, self.ids[1:]):
                if a == b:
                    raise ValueError("deduplicated sequence has consecutive duplicates")


@dataclass(frozen=True)
class CandidateSet:
    """One utterance's n-best ASR hypotheses plus references.

    Scores are cumulative log-probabilities sorted non-increasing.
    Candidates must not contain pad/bos/eos; unk is tolerated because
    externally ingested hypotheses may contain OOV words (the ingestion
    path warns about them).
    """

    utterance_id: str
    candidates: tuple[TokenSeq, ...]
    scores: tuple[float, ...]
    transcript_gt: TokenSeq
    reference_translation: TokenSeq
    units: Optional[UnitSequence] = None

    def __post_init__(self):
        if not self.candidates:
            raise ValueError("candidate list must be nonempty")
        if len(self.scores) != len(self.candidates):
            raise ValueError("scores and candidates must have equal length")
        for a, b in zip(self.scores, self.scores[1:]):
            if b > a:
                raise ValueError("scores must be non-increasing")
        for cand in self.candidates:
            for t in cand:
                if t in (PAD_ID, BOS_ID, EOS_ID):
                    raise ValueError("candidates must not contain pad/bos/eos")

    @property
    def n_candidates(self) -> int:
        return len(self.candidates)


# --- n-best corpus file format -------------------------------------------
#
# JSON Lines, UTF-8, one object per utterance:
#   {"id": str, "candidates": [str, ...],  # score-descending
#    "scores": [float, ...], "transcript": str, "reference": str,
#    "units": [int, ...]}                  # optional
# This is the wire format every subcommand reads and writes.

_REQUIRED_FIELDS = ("id", "candidates", "scores", "transcript", "reference")


class CorpusFormatError(ValueError):
    """Raised on malformed n-best corpus lines; carries the line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def read_nbest_jsonl(path) -> list[dict]:
    """Parse and validate raw n-best records; errors name the bad line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(line_no, f"invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict):
                raise CorpusFormatError(line_no, "expected a JSON object")
            for fieldname in _REQUIRED_FIELDS:
                if fieldname not in obj:
                    raise CorpusFormatError(line_no, f"missing field {fieldname!r}")
            if not isinstance(obj["candidates"], list) or not all(
                isinstance(c, str) for c in obj["candidates"]
            ):
                raise CorpusFormatError(line_no, "'candidates' must be a list of strings")
            if not isinstance(obj["scores"], list) or not all(
                isinstance(s, (int, float)) for s in obj["scores"]
            ):
                raise CorpusFormatError(line_no, "'scores' must be a list of numbers")
            if len(obj["scores"]) != len(obj["candidates"]):
                raise CorpusFormatError(line_no, "'scores' and 'candidates' length mismatch")
            if "units" in obj and obj["units"] is not None:
                if not isinstance(obj["units"], list) or not all(
                    isinstance(u, int) and not isinstance(u, bool) for u in obj["units"]
                ):
                    raise CorpusFormatError(line_no, "'units' must be a list of integers")
            records.append(obj)
    return records


def corpus_from_records(
    records: Sequence[dict],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    n_units: Optional[int] = None,
) -> list[CandidateSet]:
    """Tokenize validated records into CandidateSets."""
    corpus = []
    for obj in records:
        units = None
        if obj.get("units") is not None:
            if n_units is None:
                n_units = max(obj["units"], default=0) + 1
            units = UnitSequence(tuple(obj["units"]), n_units=n_units, deduplicated=False)
        corpus.append(
            CandidateSet(
                utterance_id=str(obj["id"]),
                candidates=tuple(tokenize(c, src_vocab) for c in obj["candidates"]),
                scores=tuple(float(s) for s in obj["scores"]),
                transcript_gt=tokenize(obj["transcript"], src_vocab),
                reference_translation=tokenize(obj["reference"], tgt_vocab),
                units=units,
            )
        )
    return corpus


def vocabs_from_records(records: Sequence[dict]) -> tuple[Vocabulary, Vocabulary]:
    """Source/target vocabularies covering every word in the records."""
    src_words: list[str] = []
    tgt_words: list[str] = []
    for obj in records:
        src_words.extend(obj["transcript"].lower().split())
        for c in obj["candidates"]:
            src_words.extend(c.lower().split())
        tgt_words.extend(obj["reference"].lower().split())
    return (
        build_vocabulary(src_words, "source-text"),
        build_vocabulary(tgt_words, "target-text"),
    )


def write_nbest_jsonl(
    corpus: Sequence[CandidateSet],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    path,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cs in corpus:
            obj = {
                "id": cs.utterance_id,
                "candidates": [detokenize(c, src_vocab) for c in cs.candidates],
                "scores": list(cs.scores),
                "transcript": detokenize(cs.transcript_gt, src_vocab),
                "reference": detokenize(cs.reference_translation, tgt_vocab),
            }
            if cs.units is not None:
                obj["units"] = list(cs.units.ids)
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
