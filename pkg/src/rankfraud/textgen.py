"""Template-based review text with per-author writing habits.

Each worker gets a :class:`StyleProfile`: peaked word preferences per slot,
favourite templates, signature phrases, a typo rate and punctuation,
capitalisation and emoticon habits. Honest reviewers share one broad
background profile, re-jittered per reviewer.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

WORDS = {
    "adj": "great good awesome amazing nice excellent fantastic cool fun useful helpful easy simple smooth fast "
    "beautiful perfect wonderful lovely brilliant superb addictive entertaining reliable clean intuitive "
    "handy neat solid decent stunning incredible outstanding impressive enjoyable relaxing friendly "
    "professional polished creative colorful quick powerful convenient",
    "noun": "app game graphics interface features design update version level player music camera photo tool "
    "feature experience quality support content performance layout controls gameplay story characters "
    "sound effects options settings menu screen developers team service price value time family kids "
    "friends phone device tablet editor filter library",
    "verb": "love like enjoy recommend use play download install adore appreciate prefer suggest",
    "adv": "really very so totally absolutely definitely truly super highly extremely pretty quite seriously "
    "honestly incredibly",
    "time": "every day|all the time|daily|for hours|every morning|every night|on weekends|at work|with my kids|"
    "on the bus",
    "interj": "wow|omg|yay|lol|yes|oh|hey|haha|yeah",
    "closer": "five stars|must have|thank you developers|keep it up|thumbs up|well done|good job|love it|"
    "highly recommended|worth it|no regrets|best ever",
    "neg": "crashes|too many ads|slow loading|drains my battery|needs more levels|freezes sometimes|"
    "annoying popups|could be better|a bit buggy|login problems",
}
VOCAB = {k: tuple(v.split("|") if "|" in v else v.split()) for k, v in WORDS.items()}

TEMPLATES = (
    "{adv} {adj} {noun}",
    "i {verb} this {noun}",
    "this {noun} is {adv} {adj}",
    "{adj} {noun} and {adj} {noun}",
    "i {verb} it {time}",
    "the {noun} is {adj}",
    "best {noun} ever",
    "{interj} {adj} {noun}",
    "{closer}",
    "my {noun} is {adv} {adj} now",
    "i {adv} {verb} the {noun}",
    "you will {verb} the {noun}",
    "{adj} {noun} for everyone",
    "i use it {time}",
    "the {noun} and the {noun} are {adj}",
    "{adv} {adj}",
)
NEGATIVE_TEMPLATES = ("the {noun} {neg}", "{neg}", "{adj} {noun} but {neg}", "it {neg}")

TERMINATORS = (".", "!", "!!", "!!!", "...", "")
EMOTICONS = (":)", ":D", "<3", "♥", "\U0001f44d", ";)", ":-)")
NUMBERS = ("5 stars", "10/10", "100%", "5/5", "1000 times better", "24/7")


@dataclass
class StyleProfile:
    slot_weights: dict[str, list[float]]
    template_weights: list[float]
    signatures: tuple[str, ...]
    signature_rate: float
    typo_rate: float
    terminator_weights: list[float]
    comma_rate: float
    emoticon_weights: list[float]
    emoticon_rate: float
    capitalize_rate: float
    caps_word_rate: float
    lowercase_i: bool
    number_rate: float
    mean_sentences: float
    negative_rate: float = 0.0
    jitter: bool = False
    ratings: tuple[int, ...] = (5,)
    extra: dict = field(default_factory=dict)


def _peaked(rng: random.Random, n: int, concentration: float) -> list[float]:
    w = [rng.gammavariate(concentration, 1.0) for _ in range(n)]
    s = sum(w)
    return [x / s for x in w]


def worker_style(rng: random.Random, strength: float = 1.0) -> StyleProfile:
    """A distinctive author. ``strength`` < 1 blurs the habits toward uniform."""
    conc = 0.15 / max(strength, 1e-3)
    pool = [f"{rng.choice(VOCAB['adv'])} {rng.choice(VOCAB['adj'])} {rng.choice(VOCAB['noun'])}",
            f"{rng.choice(VOCAB['verb'])} this {rng.choice(VOCAB['noun'])}",
            f"{rng.choice(VOCAB['closer'])}",
            f"{rng.choice(VOCAB['adj'])} {rng.choice(VOCAB['adj'])} {rng.choice(VOCAB['noun'])}"]
    return StyleProfile(
        slot_weights={k: _peaked(rng, len(v), conc) for k, v in VOCAB.items()},
        template_weights=_peaked(rng, len(TEMPLATES), conc * 2),
        signatures=tuple(pool),
        signature_rate=rng.uniform(0.2, 0.6) * strength,
        typo_rate=rng.choice((0.0, 0.0, 0.02, 0.05, 0.1)) * strength,
        terminator_weights=_peaked(rng, len(TERMINATORS), 0.3 / strength),
        comma_rate=rng.uniform(0.0, 0.6),
        emoticon_weights=_peaked(rng, len(EMOTICONS), 0.3 / strength),
        emoticon_rate=rng.choice((0.0, 0.1, 0.4, 0.7)),
        capitalize_rate=rng.choice((0.05, 0.5, 0.95)),
        caps_word_rate=rng.choice((0.0, 0.0, 0.05, 0.15)),
        lowercase_i=rng.random() < 0.5,
        number_rate=rng.choice((0.0, 0.1, 0.4)),
        mean_sentences=rng.uniform(1.5, 4.0),
        ratings=(5,) if rng.random() < 0.7 else (4, 5),
    )


def background_style() -> StyleProfile:
    """Shared style of honest reviewers; individual variation comes from ``jitter``."""
    return StyleProfile(
        slot_weights={k: [1 / len(v)] * len(v) for k, v in VOCAB.items()},
        template_weights=[1 / len(TEMPLATES)] * len(TEMPLATES),
        signatures=(),
        signature_rate=0.0,
        typo_rate=0.02,
        terminator_weights=[0.5, 0.2, 0.05, 0.0, 0.1, 0.15],
        comma_rate=0.3,
        emoticon_weights=[1 / len(EMOTICONS)] * len(EMOTICONS),
        emoticon_rate=0.05,
        capitalize_rate=0.7,
        caps_word_rate=0.01,
        lowercase_i=False,
        number_rate=0.05,
        mean_sentences=2.0,
        negative_rate=0.35,
        jitter=True,
        ratings=(1, 2, 3, 4, 5),
    )


def _typo(rng: random.Random, word: str) -> str:
    if len(word) < 4 or not word.isalpha():
        return word
    i = rng.randrange(1, len(word) - 1)
    kind = rng.randrange(3)
    if kind == 0:
        return word[:i] + word[i + 1] + word[i] + word[i + 2 :]
    if kind == 1:
        return word[:i] + word[i + 1 :]
    return word[:i] + word[i] + word[i:]


def _fill(rng: random.Random, style: StyleProfile, template: str) -> str:
    out = template
    while "{" in out:
        start = out.index("{")
        end = out.index("}", start)
        slot = out[start + 1 : end]
        word = rng.choices(VOCAB[slot], weights=style.slot_weights[slot])[0]
        out = out[:start] + word + out[end + 1 :]
    return out


def _sentence(rng: random.Random, style: StyleProfile) -> str:
    if style.negative_rate and rng.random() < style.negative_rate:
        text = _fill(rng, style, rng.choice(NEGATIVE_TEMPLATES))
    elif style.signatures and rng.random() < style.signature_rate:
        text = rng.choice(style.signatures)
    else:
        text = _fill(rng, style, rng.choices(TEMPLATES, weights=style.template_weights)[0])
    words = []
    for w in text.split():
        if style.typo_rate and rng.random() < style.typo_rate:
            w = _typo(rng, w)
        if w == "i" and not style.lowercase_i:
            w = "I"
        elif style.caps_word_rate and rng.random() < style.caps_word_rate:
            w = w.upper()
        words.append(w)
    if style.comma_rate and len(words) > 3 and rng.random() < style.comma_rate:
        k = rng.randrange(1, len(words) - 1)
        words[k] += ","
    text = " ".join(words)
    if rng.random() < style.capitalize_rate:
        text = text[:1].upper() + text[1:]
    text += rng.choices(TERMINATORS, weights=style.terminator_weights)[0]
    return text


def _jittered(rng: random.Random, style: StyleProfile) -> StyleProfile:
    return StyleProfile(
        **{
            **style.__dict__,
            "terminator_weights": _peaked(rng, len(TERMINATORS), 1.0),
            "capitalize_rate": rng.random(),
            "comma_rate": rng.uniform(0, 0.5),
            "mean_sentences": rng.uniform(1.0, 3.0),
            "lowercase_i": rng.random() < 0.3,
            "jitter": False,
        }
    )


def write_review(rng: random.Random, style: StyleProfile) -> str:
    if style.jitter:
        style = _jittered(rng, style)
    n = 1 + min(int(rng.expovariate(1.0 / max(style.mean_sentences - 1.0, 0.1))), 8)
    parts = [_sentence(rng, style) for _ in range(n)]
    if style.number_rate and rng.random() < style.number_rate:
        parts.append(rng.choice(NUMBERS))
    if style.emoticon_rate and rng.random() < style.emoticon_rate:
        parts.append(rng.choices(EMOTICONS, weights=style.emoticon_weights)[0])
    return " ".join(parts)


def rating(rng: random.Random, style: StyleProfile) -> int:
    return rng.choice(style.ratings)
