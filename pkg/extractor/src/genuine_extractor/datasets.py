"""Built-in QA items plus a loader for user-supplied JSONL question files."""

from __future__ import annotations

import json

# Small factual QA set used for offline extraction runs and contract tests.
MINI_QA = [
    ("What is the capital of France?", "Paris"),
    ("What is the largest planet in the solar system?", "Jupiter"),
    ("Which metal is liquid at room temperature?", "Mercury"),
    ("What is the chemical symbol for gold?", "Au"),
    ("How many continents are there on Earth?", "Seven"),
    ("Which ocean is the largest?", "The Pacific Ocean"),
    ("What gas do plants absorb from the air?", "Carbon dioxide"),
    ("What is the tallest mountain above sea level?", "Mount Everest"),
    ("Which language has the most native speakers?", "Mandarin Chinese"),
    ("What is the longest river in South America?", "The Amazon River"),
    ("How many legs does a spider have?", "Eight"),
    ("What is the freezing point of water in Celsius?", "Zero degrees"),
    ("Which planet is known as the red planet?", "Mars"),
    ("What is the currency of Japan?", "The yen"),
    ("Which organ pumps blood around the body?", "The heart"),
    ("What is the square root of sixty four?", "Eight"),
    ("Which country hosts the city of Venice?", "Italy"),
    ("What is the main ingredient of guacamole?", "Avocado"),
    ("How many strings does a standard violin have?", "Four"),
    ("Which bird is famous for mimicking speech?", "The parrot"),
    ("What is the hardest natural material?", "Diamond"),
    ("Which sea creature has three hearts?", "The octopus"),
    ("What force keeps planets in orbit?", "Gravity"),
    ("Which desert is the largest hot desert?", "The Sahara"),
    ("What is the smallest prime number?", "Two"),
    ("Which instrument has eighty eight keys?", "The piano"),
    ("What do bees collect from flowers?", "Nectar"),
    ("Which country is home to the kangaroo?", "Australia"),
    ("What is frozen water called?", "Ice"),
    ("Which month has twenty eight or twenty nine days?", "February"),
]


def load_items(name: str, subset_size: int) -> list[tuple[str, str]]:
    """Resolve a dataset name to (question, reference) pairs.

    "mini_qa" is built in; "file:<path>" reads JSONL lines with "question"
    and "answer" fields.
    """
    if name == "mini_qa":
        items = list(MINI_QA)
    elif name.startswith("file:"):
        items = []
        with open(name[len("file:"):], encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                obj = json.loads(line)
                items.append((obj["question"], obj["answer"]))
    else:
        raise ValueError(f"unknown dataset {name!r} (use mini_qa or file:<path>)")
    if subset_size < 1:
        raise ValueError("subset_size must be >= 1")
    return items[:subset_size]
