"""Deterministic heuristic dependency parses emitted as CoNLL-U.

No parser models are assumed to be installed, so this uses a small rule set:
pick a verb-ish root, hang determiners on the following content word,
prepositions on the previous content word, objects of prepositions on the
preposition, everything else on the root. Any structural violation falls back
to a flat chain parse flagged in a comment line (comments are ignored by
CoNLL-U readers, so the record schema is unchanged).
"""

from __future__ import annotations

VERBS = {"is", "are", "was", "were", "be", "been", "has", "have", "had", "do",
         "does", "did", "can", "could", "will", "would", "may", "might",
         "pumps", "keeps", "collect", "collects", "absorb", "absorbs", "hosts",
         "called", "known", "made", "has", "orbit", "mimicking"}
DETERMINERS = {"the", "a", "an", "this", "that", "these", "those"}
PREPOSITIONS = {"of", "in", "on", "at", "from", "for", "with", "by", "around",
                "above", "to"}
PUNCT = {".", "?", "!", ","}


def split_sentences(words: list[str]) -> list[list[str]]:
    """Break a word stream at sentence-final punctuation (kept with its sentence)."""
    sentences, current = [], []
    for word in words:
        current.append(word)
        if word in {".", "?", "!"}:
            sentences.append(current)
            current = []
    if current:
        sentences.append(current)
    return sentences


def _content_indices(words: list[str]) -> list[int]:
    return [i for i, w in enumerate(words)
            if w.lower() not in DETERMINERS | PREPOSITIONS | PUNCT]


def _rule_heads(words: list[str]) -> list[int]:
    """1-based heads (0 = root) for one sentence."""
    n = len(words)
    lower = [w.lower() for w in words]
    content = _content_indices(words)
    root = next((i for i in content if lower[i] in VERBS),
                content[0] if content else 0)
    heads = [0] * n
    last_content = None
    for i in range(n):
        if i == root:
            heads[i] = 0
        elif lower[i] in DETERMINERS:
            nxt = next((j for j in content if j > i), root)
            heads[i] = nxt + 1
        elif lower[i] in PREPOSITIONS:
            heads[i] = (last_content if last_content is not None else root) + 1
        elif lower[i] in PUNCT:
            heads[i] = root + 1
        else:
            prev_prep = i - 1 if i > 0 and lower[i - 1] in PREPOSITIONS else None
            heads[i] = (prev_prep if prev_prep is not None else root) + 1
        if i in content:
            last_content = i
        if heads[i] == i + 1:  # never self-attach
            heads[i] = root + 1 if i != root else 0
    return heads


def _valid_tree(heads: list[int]) -> bool:
    n = len(heads)
    if heads.count(0) != 1:
        return False
    if any(not 0 <= h <= n or h == i + 1 for i, h in enumerate(heads)):
        return False
    for start in range(1, n + 1):
        seen, node = set(), start
        while node != 0:
            if node in seen:
                return False
            seen.add(node)
            node = heads[node - 1]
    return True


def parse_words(words: list[str]) -> tuple[list[int], bool]:
    """Heads for one sentence plus whether the chain fallback was used."""
    heads = _rule_heads(words)
    if _valid_tree(heads):
        return heads, False
    return [0] + list(range(1, len(words))), True


def to_conllu(sentences: list[list[str]]) -> str:
    """CoNLL-U for pre-tokenized sentences; one parse token per input word."""
    blocks = []
    for words in sentences:
        heads, fallback = parse_words(words)
        lines = []
        if fallback:
            lines.append("# parser = chain-fallback")
        for i, (word, head) in enumerate(zip(words, heads), start=1):
            rel = "root" if head == 0 else "dep"
            lines.append("\t".join([str(i), word, "_", "_", "_", "_",
                                    str(head), rel, "_", "_"]))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
