"""Generation backends exposing one interface: per-step token, probability of
the chosen token, full-distribution entropy, and a hidden-state vector.

The "toy" backend is a deterministic retrieval model over a known QA corpus;
it exists so extraction runs end-to-end on machines with no model weights.
The "hf" backend drives any local transformers causal LM.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import MINI_QA
from .scoring import tokens as normalize_tokens


@dataclass
class GenerationStep:
    token: str
    prob: float       # probability of the emitted token under the step distribution
    entropy: float    # natural-log entropy of the full step distribution
    hidden: list[float]


@dataclass
class GenerationOutput:
    words: list[str]
    steps: list[GenerationStep]

    @property
    def text(self) -> str:
        return " ".join(self.words)


class ToyBackend:
    """Retrieval stand-in for an LLM with a real per-step distribution.

    Answers come from the built-in QA corpus: the prompt is matched against
    known questions by token overlap, and the chosen answer is emitted one
    word at a time through a softmax over the whole vocabulary, sharply
    peaked on the target word. A seeded fraction of items is answered with
    the second-best match (higher temperature, lower confidence), so labeled
    corpora contain both classes.
    """

    END = "."

    def __init__(self, hidden_dim: int = 8, seed: int = 0, wrong_rate: float = 0.25):
        self.hidden_dim = hidden_dim
        self.wrong_rate = wrong_rate
        self._rng = np.random.default_rng((seed, 0x707))
        self._answers = [a for _, a in MINI_QA]
        vocab = {self.END}
        for q, a in MINI_QA:
            vocab.update(normalize_tokens(q))
            vocab.update(a.split())
        self.vocab = sorted(vocab)
        self._index = {w: i for i, w in enumerate(self.vocab)}
        table_rng = np.random.default_rng((seed, 0xE0B))
        self._embed = table_rng.normal(size=(len(self.vocab), hidden_dim))

    def _match_scores(self, prompt: str) -> list[tuple[float, str]]:
        prompt_tokens = set(normalize_tokens(prompt))
        scored = []
        for question, answer in MINI_QA:
            q_tokens = set(normalize_tokens(question))
            overlap = len(prompt_tokens & q_tokens) / max(1, len(q_tokens))
            scored.append((overlap, answer))
        return sorted(scored, reverse=True)

    def generate(self, prompt: str, max_tokens: int = 12, greedy: bool = True,
                 seed: int = 0) -> GenerationOutput:
        rng = np.random.default_rng((seed, abs(hash(prompt)) % (2 ** 31)))
        ranked = self._match_scores(prompt)
        take_wrong = rng.random() < self.wrong_rate
        answer = ranked[1][1] if take_wrong and len(ranked) > 1 else ranked[0][1]
        # an unsure (wrong-path) generation runs hotter
        temperature = 2.5 if take_wrong else 1.0
        target = [w for w in answer.split() if w in self._index][:max_tokens - 1]
        target.append(self.END)

        steps, words = [], []
        for pos, want in enumerate(target):
            logits = 0.5 * rng.normal(size=len(self.vocab))
            logits[self._index[want]] += 8.0
            logits = logits / temperature
            dist = np.exp(logits - logits.max())
            dist /= dist.sum()
            if greedy:
                chosen = int(dist.argmax())
            else:
                chosen = int(rng.choice(len(dist), p=dist))
            nz = dist[dist > 0]
            entropy = float(-(nz * np.log(nz)).sum())
            hidden = self._embed[chosen] + 0.05 * rng.normal(size=self.hidden_dim)
            word = self.vocab[chosen]
            steps.append(GenerationStep(token=word, prob=float(dist[chosen]),
                                        entropy=entropy,
                                        hidden=[float(x) for x in hidden]))
            words.append(word)
            if word == self.END:
                break
        return GenerationOutput(words=words, steps=steps)


class HFBackend:
    """transformers causal LM wrapper; requires local model weights."""

    def __init__(self, model_name: str, hidden_layer: int = -1, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:
            raise RuntimeError("the hf backend needs torch and transformers installed") from exc
        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForCausalLM.from_pretrained(
            model_name, output_hidden_states=True).to(device).eval()
        self.hidden_layer = hidden_layer
        self.device = device

    def generate(self, prompt: str, max_tokens: int = 32, greedy: bool = True,
                 seed: int = 0) -> GenerationOutput:
        torch = self._torch
        torch.manual_seed(seed)
        ids = self.tokenizer(prompt, return_tensors="pt").input_ids.to(self.device)
        steps = []
        pieces = []
        with torch.no_grad():
            for _ in range(max_tokens):
                out = self.model(ids)
                logits = out.logits[0, -1]
                probs = torch.softmax(logits, dim=-1)
                if greedy:
                    nxt = int(torch.argmax(probs))
                else:
                    nxt = int(torch.multinomial(probs, 1))
                p = float(probs[nxt])
                nz = probs[probs > 0]
                entropy = float(-(nz * nz.log()).sum())
                hidden = out.hidden_states[self.hidden_layer][0, -1]
                piece = self.tokenizer.decode([nxt])
                steps.append(GenerationStep(token=piece, prob=max(p, 1e-12),
                                            entropy=max(entropy, 0.0),
                                            hidden=[float(x) for x in hidden]))
                pieces.append(piece)
                ids = torch.cat([ids, torch.tensor([[nxt]], device=self.device)], dim=1)
                if nxt == self.tokenizer.eos_token_id:
                    break
        words = "".join(pieces).split()
        return GenerationOutput(words=words, steps=steps)


def make_backend(name: str, hidden_dim: int, seed: int):
    if name == "toy":
        return ToyBackend(hidden_dim=hidden_dim, seed=seed)
    if name.startswith("hf:"):
        return HFBackend(name[len("hf:"):])
    raise ValueError(f"unknown model backend {name!r} (use toy or hf:<model-name>)")
