#!/usr/bin/env python3
# Copyright 2026 The iclb Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the synthetic binary sentiment corpus used by the tests.

Each review mixes a few class adjectives with neutral filler words. The
vocabularies avoid every trigger and connector token so that overlaps come
only from sentiment words, filler, and whatever an attack inserts.
"""

import argparse
import json
import random

POSITIVE = ["brilliant", "charming", "delightful", "moving", "superb", "gripping", "tender", "radiant"]
NEGATIVE = ["boring", "clumsy", "tedious", "shallow", "dreary", "sloppy", "bland", "awkward"]
ONSETS = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"]
VOWELS = ["a", "e", "i", "o", "u"]


def lexicon(rng, size):
    """Pronounceable three-syllable pseudo-words used as neutral filler."""
    words = set()
    while len(words) < size:
        words.add("".join(rng.choice(ONSETS) + rng.choice(VOWELS) for _ in range(3)))
    return sorted(words)


def review(rng, adjectives, n_adjectives, filler, n_filler):
    words = rng.sample(adjectives, n_adjectives) + rng.sample(filler, n_filler)
    rng.shuffle(words)
    return " ".join(words)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--size", type=int, default=200)
    ap.add_argument("--adjectives", type=int, default=2)
    ap.add_argument("--vocab", type=int, default=5)
    ap.add_argument("--filler", type=int, default=18)
    ap.add_argument("--lexicon", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    filler = lexicon(rng, args.lexicon)
    rows = []
    for i in range(args.size):
        label = "positive" if i % 2 == 0 else "negative"
        vocab = (POSITIVE if label == "positive" else NEGATIVE)[: args.vocab]
        rows.append({"text": review(rng, vocab, args.adjectives, filler, args.filler), "label": label})
    rng.shuffle(rows)
    with open(args.out, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r) + "\n")


if __name__ == "__main__":
    main()
