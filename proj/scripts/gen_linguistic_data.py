#!/usr/bin/env python3
"""Regenerates core/data/tagged.tsv and core/data/treebank.conll.

Both corpora are built from hand-written sentence templates over a small
unambiguous lexicon (every surface form maps to exactly one tag), with
slot words rotated deterministically so repeated template instances stay
lexically varied. No randomness: reruns are byte-identical.
"""

import os
import sys

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "core", "data")

# Slot name -> (UPOS, word list). Two verb slots keep agreement readable:
# VERB_S for third-person-singular forms, VERB_B for base/plural forms.
LEXICON = {
    "DET": ("DET", ["the", "a", "this", "every", "some"]),
    "NOUN": ("NOUN", [
        "virus", "cure", "vaccine", "doctor", "city", "report", "water",
        "study", "crowd", "garden", "lockdown", "hoax", "bleach", "recipe",
        "weather", "growth",
    ]),
    "NOUN_P": ("NOUN", ["doctors", "cities", "reports", "studies"]),
    "VERB_S": ("VERB", [
        "spreads", "works", "fails", "grows", "says", "shows", "helps",
        "stops", "kills", "claims",
    ]),
    "VERB_B": ("VERB", ["work", "help", "stop", "spread"]),
    "ADJ": ("ADJ", [
        "deadly", "new", "viral", "secret", "total", "safe", "toxic",
        "harmless",
    ]),
    "ADV": ("ADV", ["quickly", "never", "often", "soon"]),
    "ADP": ("ADP", ["in", "of", "with", "from"]),
    "AUX": ("AUX", ["is", "was", "does"]),
    "PRON": ("PRON", ["it", "they", "she"]),
    "PROPN": ("PROPN", ["alice", "bob", "wuhan", "atlanta"]),
    "NUM": ("NUM", ["two", "three", "19", "seven"]),
    "CCONJ": ("CCONJ", ["and", "or"]),
    "SCONJ": ("SCONJ", ["because", "if"]),
    "INTJ": ("INTJ", ["wow", "oh"]),
    "X": ("X", ["xyzzy", "blah"]),
}

# Literal slots: a fixed surface form with a fixed tag.
LITERALS = {
    "not": ("not", "PART"),
    "to": ("to", "PART"),
    "of": ("of", "ADP"),
    "in": ("in", "ADP"),
    "%": ("%", "SYM"),
    "+": ("+", "SYM"),
    ".": (".", "PUNCT"),
    "!": ("!", "PUNCT"),
    ",": (",", "PUNCT"),
}


def instantiate(slots, k):
    """Fills template slots for instance k, rotating word lists.

    Repeated slots of one type inside a sentence advance through the
    list so conjunctions never pair a word with itself.
    """
    tokens, tags = [], []
    seen = {}
    for slot in slots:
        if slot in LITERALS:
            word, tag = LITERALS[slot]
        else:
            tag, words = LEXICON[slot]
            nth = seen.get(slot, 0)
            seen[slot] = nth + 1
            word = words[(k + nth) % len(words)]
        tokens.append(word)
        tags.append(tag)
    return tokens, tags


# ---------------------------------------------------------------------------
# Tagged corpus.

TAGGED_TEMPLATES = [
    ["DET", "NOUN", "VERB_S", "."],
    ["DET", "ADJ", "NOUN", "VERB_S", "ADV", "."],
    ["PRON", "AUX", "ADJ", "."],
    ["PROPN", "VERB_S", "DET", "NOUN", "."],
    ["DET", "NOUN", "VERB_S", "ADP", "DET", "NOUN", "."],
    ["DET", "NOUN", "AUX", "not", "VERB_B", "."],
    ["INTJ", ",", "DET", "NOUN", "VERB_S", "!"],
    ["NUM", "NOUN_P", "VERB_B", "."],
    ["DET", "NOUN", "ADP", "PROPN", "VERB_S", "."],
    ["PRON", "VERB_S", "SCONJ", "DET", "NOUN", "VERB_S", "."],
    ["DET", "NOUN", "CCONJ", "DET", "NOUN", "VERB_B", "."],
    ["X", ",", "DET", "NOUN", "VERB_S", "."],
    ["DET", "NOUN", "VERB_S", "NUM", "%", "."],
    ["PRON", "VERB_B", "to", "VERB_B", "."],
    ["DET", "NOUN", "VERB_S", "DET", "ADJ", "NOUN", "."],
    ["PROPN", "CCONJ", "PROPN", "VERB_B", "ADV", "."],
    # Bare variants so verbs and nouns are also seen sentence-finally.
    ["DET", "NOUN", "VERB_S"],
    ["PRON", "AUX", "ADJ"],
    ["PROPN", "VERB_S", "ADV"],
    ["NUM", "NOUN_P", "VERB_B"],
]

NUM_TAGGED = 200


def build_tagged():
    sentences = []
    for k in range(NUM_TAGGED):
        template = TAGGED_TEMPLATES[k % len(TAGGED_TEMPLATES)]
        tokens, tags = instantiate(template, k // len(TAGGED_TEMPLATES))
        sentences.append((tokens, tags))
    # The smoke-test sentence must be present verbatim.
    assert (["the", "virus", "spreads"], ["DET", "NOUN", "VERB"]) in sentences
    return sentences


# ---------------------------------------------------------------------------
# Treebank. heads are 1-based with 0 for the root; every one of the 16
# relations appears. Each template is checked for validity/projectivity
# before anything is written.

TREEBANK_TEMPLATES = [
    # the virus spreads .
    (["DET", "NOUN", "VERB_S", "."],
     [2, 3, 0, 3], ["det", "nsubj", "root", "punct"]),
    # it is safe .
    (["PRON", "AUX", "ADJ", "."],
     [3, 3, 0, 3], ["nsubj", "cop", "root", "punct"]),
    # the virus and the cure spread .
    (["DET", "NOUN", "CCONJ", "DET", "NOUN", "VERB_B", "."],
     [2, 6, 5, 5, 2, 0, 6],
     ["det", "nsubj", "cc", "det", "conj", "root", "punct"]),
    # it fails because the cure works .
    (["PRON", "VERB_S", "SCONJ", "DET", "NOUN", "VERB_S", "."],
     [2, 0, 6, 5, 6, 2, 2],
     ["nsubj", "root", "mark", "det", "nsubj", "dep", "punct"]),
    # the report of the study fails .
    (["DET", "NOUN", "of", "DET", "NOUN", "VERB_S", "."],
     [2, 6, 5, 5, 2, 0, 6],
     ["det", "nsubj", "case", "det", "nmod", "root", "punct"]),
    # alice shows the report .
    (["PROPN", "VERB_S", "DET", "NOUN", "."],
     [2, 0, 4, 2, 2], ["nsubj", "root", "det", "obj", "punct"]),
    # the crowd grows in atlanta .
    (["DET", "NOUN", "VERB_S", "in", "PROPN", "."],
     [2, 3, 0, 5, 3, 3],
     ["det", "nsubj", "root", "case", "obl", "punct"]),
    # the deadly virus spreads quickly .
    (["DET", "ADJ", "NOUN", "VERB_S", "ADV", "."],
     [3, 3, 4, 0, 4, 4],
     ["det", "amod", "nsubj", "root", "advmod", "punct"]),
    # the doctor does not help the city .
    (["DET", "NOUN", "AUX", "not", "VERB_B", "DET", "NOUN", "."],
     [2, 5, 5, 5, 0, 7, 5, 5],
     ["det", "nsubj", "aux", "advmod", "root", "det", "obj", "punct"]),
    # two doctors work .
    (["NUM", "NOUN_P", "VERB_B", "."],
     [2, 3, 0, 3], ["dep", "nsubj", "root", "punct"]),
    # wow , the cure works !
    (["INTJ", ",", "DET", "NOUN", "VERB_S", "!"],
     [5, 5, 4, 5, 0, 5],
     ["dep", "punct", "det", "nsubj", "root", "punct"]),
    # the report shows 19 % .
    (["DET", "NOUN", "VERB_S", "NUM", "%", "."],
     [2, 3, 0, 5, 3, 3],
     ["det", "nsubj", "root", "dep", "obj", "punct"]),
    # xyzzy , the virus spreads .
    (["X", ",", "DET", "NOUN", "VERB_S", "."],
     [5, 5, 4, 5, 0, 5],
     ["dep", "punct", "det", "nsubj", "root", "punct"]),
    # they work to help .
    (["PRON", "VERB_B", "to", "VERB_B", "."],
     [2, 0, 4, 2, 2],
     ["nsubj", "root", "mark", "dep", "punct"]),
]

NUM_TREES = 56

RELATIONS = [
    "nsubj", "obj", "obl", "nmod", "amod", "advmod", "det", "case",
    "mark", "cc", "conj", "aux", "cop", "punct", "root", "dep",
]


def check_tree(heads, rels):
    n = len(heads)
    assert len(rels) == n
    assert sum(1 for h in heads if h == 0) == 1
    for i, (h, r) in enumerate(zip(heads, rels)):
        assert 0 <= h <= n and h != i + 1, f"bad head {h} at {i + 1}"
        assert r in RELATIONS, f"unknown relation {r}"
        assert (h == 0) == (r == "root"), f"root reservation at {i + 1}"
    for i in range(n):
        cursor, hops = heads[i], 0
        while cursor != 0:
            cursor = heads[cursor - 1]
            hops += 1
            assert hops <= n, f"cycle through {i + 1}"
    spans = [(min(h, i + 1), max(h, i + 1)) for i, h in enumerate(heads)]
    for a in range(n):
        for b in range(a + 1, n):
            (a1, a2), (b1, b2) = spans[a], spans[b]
            assert not (a1 < b1 < a2 < b2 or b1 < a1 < b2 < a2), \
                f"crossing arcs {spans[a]} / {spans[b]}"


def build_treebank():
    for slots, heads, rels in TREEBANK_TEMPLATES:
        assert len(slots) == len(heads) == len(rels)
        check_tree(heads, rels)
    entries = []
    for k in range(NUM_TREES):
        slots, heads, rels = TREEBANK_TEMPLATES[k % len(TREEBANK_TEMPLATES)]
        tokens, tags = instantiate(slots, k // len(TREEBANK_TEMPLATES))
        entries.append((tokens, tags, heads, rels))
    used = {r for _, _, _, rels in entries for r in rels}
    assert used == set(RELATIONS), f"missing relations: {set(RELATIONS) - used}"
    return entries


def main():
    tagged = build_tagged()
    with open(os.path.join(OUT_DIR, "tagged.tsv"), "w") as f:
        for tokens, tags in tagged:
            for token, tag in zip(tokens, tags):
                f.write(f"{token}\t{tag}\n")
            f.write("\n")

    treebank = build_treebank()
    with open(os.path.join(OUT_DIR, "treebank.conll"), "w") as f:
        for tokens, tags, heads, rels in treebank:
            for i, (token, tag, head, rel) in enumerate(
                    zip(tokens, tags, heads, rels)):
                f.write(f"{i + 1}\t{token}\t{tag}\t{head}\t{rel}\n")
            f.write("\n")

    print(f"wrote {len(tagged)} tagged sentences, {len(treebank)} trees")
    return 0


if __name__ == "__main__":
    sys.exit(main())
