"""A small closed-lexicon + suffix part-of-speech tagger.

Good enough to give POS n-gram features a stable, tagger-independent
vocabulary; it is not meant to compete with a trained tagger.
"""

from __future__ import annotations

import re

TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CONJ", "DET", "INTJ", "MODAL",
    "NOUN", "NUM", "PRON", "PUNCT", "SYM", "VERB", "WH",
)

_CLOSED = {
    "DET": "a an the this that these those my your his her its our their some any no every each all both another",
    "PRON": "i you he she it we they me him us them myself yourself himself herself itself ourselves themselves "
    "mine yours hers ours theirs someone anyone everyone nothing something everything one i'm you're it's "
    "i've i'll i'd we're they're that's",
    "ADP": "in on at of for with by from to into onto about over after before under between through during "
    "without within against among across up down off out like than",
    "CONJ": "and or but nor so yet because although though if while unless since whereas",
    "AUX": "is am are was were be been being have has had do does did isn't aren't wasn't weren't don't "
    "doesn't didn't haven't hasn't hadn't",
    "MODAL": "can could will would shall should may might must can't couldn't won't wouldn't shouldn't",
    "ADV": "very really too just also not never always often quite already still even ever again almost "
    "soon here there now then well much more most less least only definitely totally",
    "WH": "what which who whom whose when where why how",
    "INTJ": "wow oh hey yes yeah ok okay lol omg please thanks thank thx hi hello yay ugh",
    "NUM": "zero one two three four five six seven eight nine ten hundred thousand million first second third",
    "ADJ": "good great bad best better worse worst nice awesome amazing cool fun easy hard simple new old "
    "big small little free fast slow perfect excellent fantastic terrible horrible useful helpful",
    "VERB": "love like use get got make made go went recommend need want try tried work works download "
    "play played install installed update updated keep find found see saw",
}
_LEXICON = {w: tag for tag, words in _CLOSED.items() for w in words.split()}
_SUFFIXES = (
    ("ly", "ADV"),
    ("ing", "VERB"),
    ("ed", "VERB"),
    ("ize", "VERB"),
    ("ise", "VERB"),
    ("ify", "VERB"),
    ("ful", "ADJ"),
    ("ous", "ADJ"),
    ("able", "ADJ"),
    ("ible", "ADJ"),
    ("ive", "ADJ"),
    ("less", "ADJ"),
    ("ic", "ADJ"),
    ("est", "ADJ"),
)

TOKEN_RE = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)?|\d+(?:[.,]\d+)*|[^\sA-Za-z\d]")
_PUNCT = set(".,!?;:'\"-()[]…")


def tokenize(text: str) -> list[str]:
    return TOKEN_RE.findall(text)


def tag_token(token: str) -> str:
    low = token.lower()
    if low in _LEXICON:
        return _LEXICON[low]
    if token[0].isdigit():
        return "NUM"
    if not token[0].isalpha():
        return "PUNCT" if token in _PUNCT else "SYM"
    if len(low) > 4:
        for suffix, tag in _SUFFIXES:
            if low.endswith(suffix):
                return tag
    return "NOUN"


def tag(text: str) -> list[tuple[str, str]]:
    return [(tok, tag_token(tok)) for tok in tokenize(text)]
