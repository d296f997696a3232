#!/usr/bin/env python3
"""Write a synthetic two-class corpus in the MR or SUBJ file layout.

Sentences mix neutral filler with a few class-marked words, so the labels
are learnable but not trivially separable. Useful for smoke runs and timing
when the real corpora are not at hand.
"""

import argparse
import pathlib
import random

FILLER = [f"w{i}" for i in range(4000)]
POS = ["good", "great", "fine", "warm", "clever", "moving", "funny", "bright"]
NEG = ["bad", "dull", "flat", "cold", "tired", "boring", "weak", "messy"]


def sentence(rng, marked, other, length):
    words = [rng.choice(FILLER) for _ in range(length)]
    for _ in range(rng.randint(1, 3)):
        words[rng.randrange(length)] = rng.choice(marked)
    if rng.random() < 0.25:
        words[rng.randrange(length)] = rng.choice(other)
    return " ".join(words) + " ."


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--format", choices=["mr", "subj"], default="mr")
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--mean-length", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    names = {"mr": ("rt-polarity.pos", "rt-polarity.neg"),
             "subj": ("quote.tok.gt9.5000", "plot.tok.gt9.5000")}[args.format]
    args.out.mkdir(parents=True, exist_ok=True)
    for name, marked, other in ((names[0], POS, NEG), (names[1], NEG, POS)):
        lines = []
        for _ in range(args.per_class):
            length = max(3, int(rng.gauss(args.mean_length, args.mean_length / 3)))
            lines.append(sentence(rng, marked, other, length))
        (args.out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
