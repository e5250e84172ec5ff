#!/usr/bin/env python3
"""Whitespace normalisation used as the tokenizer round-trip oracle.

Runs of spaces and tabs collapse to a single separator; separators at the
start or end of a line are dropped. Line breaks are kept.

usage: normalize.py IN OUT
"""

import re
import sys


def normalize(text):
    return "\n".join(re.sub(r"[ \t]+", " ", line).strip(" ") for line in text.split("\n"))


if __name__ == "__main__":
    with open(sys.argv[1], encoding="utf-8", newline="") as f:
        src = f.read()
    with open(sys.argv[2], "w", encoding="utf-8", newline="") as f:
        f.write(normalize(src))
