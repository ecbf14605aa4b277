"""Interchange data model: records, CoNLL-U parsing, scoring, labels, splits.

Records travel as JSON lines (UTF-8, .jsonl). Each line carries the prompt,
the generated response, a reference answer, an embedded CoNLL-U parse of the
response, per-token probability/entropy features, optional per-token
embeddings, and an optional correctness score.
"""

from __future__ import annotations

import json
import math
import string
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

TASKS = ("qa", "translation", "summarization")

# correctness thresholds on the per-task scoring function
LABEL_THRESHOLDS = {"qa": 0.3, "translation": 0.3, "summarization": 0.35}


class CorpusError(ValueError):
    pass


class ConlluFormatError(CorpusError):
    """Malformed CoNLL-U syntax (wrong column count etc.), with line number."""


class ConlluStructureError(CorpusError):
    """Head references that do not form a single rooted tree."""


class RecordError(CorpusError):
    """A record violating the interchange schema."""


@dataclass(frozen=True)
class ParsedToken:
    index: int       # 1-based position within the sentence
    surface: str
    head: int        # 0 = syntactic root, else 1-based index of the governor
    deprel: str = "dep"


@dataclass(frozen=True)
class SentenceParse:
    tokens: tuple[ParsedToken, ...]

    def __len__(self):
        return len(self.tokens)


@dataclass
class GenerationRecord:
    id: str
    task: str
    prompt: str
    response: str
    reference: str
    sentences: tuple[SentenceParse, ...]
    token_probs: list[float]
    token_entropies: list[float]
    embeddings: list[list[float]] | None = None
    score: float | None = None

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class LabeledExample:
    record_id: str
    score: float
    label: int


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    val_fraction: float = 0.1
    test_fraction: float = 0.3
    seed: int = 0

    def validate(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        for f in fracs:
            if not 0.0 < f < 1.0:
                raise CorpusError(f"split fractions must lie in (0,1), got {fracs}")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise CorpusError(f"split fractions must sum to 1, got {sum(fracs)!r}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# ---------------------------------------------------------------------------
# CoNLL-U

def _validate_sentence(tokens: list[ParsedToken], line_hint: int) -> SentenceParse:
    ids = [t.index for t in tokens]
    if ids != list(range(1, len(tokens) + 1)):
        raise ConlluStructureError(f"sentence near line {line_hint}: token ids must be 1..n, got {ids}")
    roots = [t for t in tokens if t.head == 0]
    if len(roots) != 1:
        raise ConlluStructureError(
            f"sentence near line {line_hint}: expected exactly one root, found {len(roots)}")
    valid = set(ids)
    for t in tokens:
        if t.head != 0 and t.head not in valid:
            raise ConlluStructureError(
                f"sentence near line {line_hint}: token {t.index} has HEAD {t.head} "
                f"pointing outside 1..{len(tokens)}")
        if t.head == t.index:
            raise ConlluStructureError(
                f"sentence near line {line_hint}: token {t.index} is its own head")
    # cycle check: walk each token to the root
    heads = {t.index: t.head for t in tokens}
    for start in ids:
        seen = set()
        node = start
        while node != 0:
            if node in seen:
                raise ConlluStructureError(
                    f"sentence near line {line_hint}: cycle in head relation through token {start}")
            seen.add(node)
            node = heads[node]
    return SentenceParse(tuple(tokens))


def parse_conllu(text: str) -> list[SentenceParse]:
    """Parse a CoNLL-U document into validated sentence trees.

    Only the ID, FORM, HEAD and DEPREL columns are consumed. Comment lines,
    multiword-token ranges (IDs with '-') and empty nodes (IDs with '.') are
    skipped. Sentences are blocks separated by blank lines.
    """
    sentences = []
    current: list[ParsedToken] = []
    block_start = 1
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if line.strip() == "":
            if current:
                sentences.append(_validate_sentence(current, block_start))
                current = []
            block_start = lineno + 1
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluFormatError(f"line {lineno}: expected 10 tab-separated columns, got {len(cols)}")
        tok_id = cols[0]
        if "-" in tok_id or "." in tok_id:
            continue
        try:
            index = int(tok_id)
            head = int(cols[6])
        except ValueError as exc:
            raise ConlluFormatError(f"line {lineno}: non-integer ID or HEAD ({tok_id!r}, {cols[6]!r})") from exc
        if index < 1 or head < 0:
            raise ConlluFormatError(f"line {lineno}: ID must be >= 1 and HEAD >= 0")
        current.append(ParsedToken(index=index, surface=cols[1], head=head, deprel=cols[7]))
    if current:
        sentences.append(_validate_sentence(current, block_start))
    return sentences


def sentences_to_conllu(sentences) -> str:
    """Serialize sentences back to CoNLL-U (unused columns written as '_')."""
    blocks = []
    for sent in sentences:
        lines = [
            "\t".join([str(t.index), t.surface, "_", "_", "_", "_", str(t.head), t.deprel, "_", "_"])
            for t in sent.tokens
        ]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# scoring

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, map ASCII punctuation to space, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def rouge1(candidate: str, reference: str) -> float:
    cand = normalize_tokens(candidate)
    ref = normalize_tokens(reference)
    if not cand or not ref:
        return 0.0
    overlap = sum((Counter(cand) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(cand)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def _lcs_length(a: list[str], b: list[str]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rougeL(candidate: str, reference: str) -> float:
    cand = normalize_tokens(candidate)
    ref = normalize_tokens(reference)
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    if lcs == 0:
        return 0.0
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    return 2 * precision * recall / (precision + recall)


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str) -> float:
    """Sentence-level BLEU, n-grams up to 4.

    Orders whose clipped match count is zero get add-one smoothing; orders the
    candidate is too short to produce are dropped from the geometric mean.
    Standard brevity penalty.
    """
    cand = normalize_tokens(candidate)
    ref = normalize_tokens(reference)
    if not cand or not ref:
        return 0.0
    log_sum = 0.0
    orders = 0
    for n in range(1, 5):
        cand_ngrams = _ngram_counts(cand, n)
        total = sum(cand_ngrams.values())
        if total == 0:
            continue
        clipped = sum((cand_ngrams & _ngram_counts(ref, n)).values())
        p = clipped / total if clipped > 0 else (clipped + 1) / (total + 1)
        log_sum += math.log(p)
        orders += 1
    if orders == 0:
        return 0.0
    geo = math.exp(log_sum / orders)
    bp = 1.0 if len(cand) >= len(ref) else math.exp(1.0 - len(ref) / len(cand))
    return bp * geo


TASK_SCORERS = {"qa": rouge1, "translation": bleu, "summarization": rougeL}


def score_response(candidate: str, reference: str, task: str) -> float:
    if task not in TASK_SCORERS:
        raise CorpusError(f"unknown task {task!r}; expected one of {TASKS}")
    return TASK_SCORERS[task](candidate, reference)


def assign_label(score: float, task: str) -> int:
    if task not in LABEL_THRESHOLDS:
        raise CorpusError(f"unknown task {task!r}; expected one of {TASKS}")
    if not 0.0 <= score <= 1.0:
        raise CorpusError(f"score must lie in [0,1], got {score!r}")
    return int(score >= LABEL_THRESHOLDS[task])


def label_records(records) -> list[LabeledExample]:
    """Score (when missing) and label every record."""
    out = []
    for rec in records:
        score = rec.score if rec.score is not None else score_response(rec.response, rec.reference, rec.task)
        out.append(LabeledExample(record_id=rec.id, score=score, label=assign_label(score, rec.task)))
    return out


# ---------------------------------------------------------------------------
# splits and perturbations

def split_dataset(records, spec: SplitSpec):
    """Deterministic shuffled partition; round-half-up sizes, remainder to test."""
    spec.validate()
    n = len(records)
    if n == 0:
        raise CorpusError("cannot split an empty dataset")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(n)
    n_train = _round_half_up(n * spec.train_fraction)
    n_val = _round_half_up(n * spec.val_fraction)
    if n_train + n_val > n:
        raise CorpusError(f"split of {n} records leaves no test set")
    train = [records[i] for i in order[:n_train]]
    val = [records[i] for i in order[n_train:n_train + n_val]]
    test = [records[i] for i in order[n_train + n_val:]]
    return train, val, test


def inject_label_noise(examples, ratio: float, seed: int) -> list[LabeledExample]:
    """Flip exactly round(ratio*n) labels, chosen without replacement."""
    if not 0.0 <= ratio <= 1.0:
        raise CorpusError(f"noise ratio must lie in [0,1], got {ratio!r}")
    examples = list(examples)
    n_flip = _round_half_up(ratio * len(examples))
    if n_flip == 0:
        return examples
    rng = np.random.default_rng(seed)
    flip = set(rng.choice(len(examples), size=n_flip, replace=False).tolist())
    return [
        LabeledExample(ex.record_id, ex.score, 1 - ex.label) if i in flip else ex
        for i, ex in enumerate(examples)
    ]


def subsample_training(examples, fraction: float, seed: int) -> list:
    """Keep a seeded sample of round(fraction*n) items, in original order."""
    if not 0.0 < fraction <= 1.0:
        raise CorpusError(f"training fraction must lie in (0,1], got {fraction!r}")
    examples = list(examples)
    n_keep = _round_half_up(fraction * len(examples))
    if n_keep >= len(examples):
        return examples
    rng = np.random.default_rng(seed)
    keep = sorted(rng.choice(len(examples), size=n_keep, replace=False).tolist())
    return [examples[i] for i in keep]


# ---------------------------------------------------------------------------
# jsonl interchange

_REQUIRED_FIELDS = ("id", "task", "prompt", "response", "reference", "conllu",
                    "token_probs", "token_entropies")


def record_from_dict(obj: dict) -> GenerationRecord:
    for key in _REQUIRED_FIELDS:
        if key not in obj:
            raise RecordError(f"record missing field {key!r}")
    if obj["task"] not in TASKS:
        raise RecordError(f"record {obj['id']!r}: unknown task {obj['task']!r}")
    sentences = tuple(parse_conllu(obj["conllu"]))
    if not sentences:
        raise RecordError(f"record {obj['id']!r}: empty parse")
    rec = GenerationRecord(
        id=str(obj["id"]),
        task=obj["task"],
        prompt=obj["prompt"],
        response=obj["response"],
        reference=obj["reference"],
        sentences=sentences,
        token_probs=[float(p) for p in obj["token_probs"]],
        token_entropies=[float(h) for h in obj["token_entropies"]],
        embeddings=[[float(x) for x in row] for row in obj["embeddings"]]
        if obj.get("embeddings") is not None else None,
        score=float(obj["score"]) if obj.get("score") is not None else None,
    )
    validate_record(rec)
    return rec


def validate_record(rec: GenerationRecord):
    n = rec.token_count
    if len(rec.token_probs) != n or len(rec.token_entropies) != n:
        raise RecordError(
            f"record {rec.id!r}: {n} parse tokens but {len(rec.token_probs)} probs / "
            f"{len(rec.token_entropies)} entropies")
    for p in rec.token_probs:
        if not (0.0 < p <= 1.0) or not math.isfinite(p):
            raise RecordError(f"record {rec.id!r}: token probability {p!r} outside (0,1]")
    for h in rec.token_entropies:
        if h < 0.0 or not math.isfinite(h):
            raise RecordError(f"record {rec.id!r}: negative or non-finite entropy {h!r}")
    if rec.embeddings is not None:
        if len(rec.embeddings) != n:
            raise RecordError(f"record {rec.id!r}: {len(rec.embeddings)} embedding rows for {n} tokens")
        dims = {len(row) for row in rec.embeddings}
        if len(dims) != 1 or 0 in dims:
            raise RecordError(f"record {rec.id!r}: embedding rows must share one nonzero dimension")
        for row in rec.embeddings:
            for x in row:
                if not math.isfinite(x):
                    raise RecordError(f"record {rec.id!r}: non-finite embedding value")
    if rec.score is not None and not 0.0 <= rec.score <= 1.0:
        raise RecordError(f"record {rec.id!r}: score {rec.score!r} outside [0,1]")


def record_to_dict(rec: GenerationRecord) -> dict:
    obj = {
        "id": rec.id,
        "task": rec.task,
        "prompt": rec.prompt,
        "response": rec.response,
        "reference": rec.reference,
        "conllu": sentences_to_conllu(rec.sentences),
        "token_probs": rec.token_probs,
        "token_entropies": rec.token_entropies,
    }
    if rec.embeddings is not None:
        obj["embeddings"] = rec.embeddings
    if rec.score is not None:
        obj["score"] = rec.score
    return obj


def read_records(path) -> list[GenerationRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            try:
                rec = record_from_dict(obj)
            except CorpusError as exc:
                raise RecordError(f"{path}:{lineno}: {exc}") from exc
            if rec.id in seen:
                raise RecordError(f"{path}:{lineno}: duplicate record id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def write_records(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec)) + "\n")


def validate_file(path) -> list[str]:
    """Collect (rather than raise) validation errors for every line of a file."""
    errors = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rec = record_from_dict(obj)
            except (json.JSONDecodeError, CorpusError) as exc:
                errors.append(f"line {lineno}: {exc}")
                continue
            if rec.id in seen:
                errors.append(f"line {lineno}: duplicate record id {rec.id!r}")
            seen.add(rec.id)
    return errors
