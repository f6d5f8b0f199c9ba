"""Rule-based sentiment scoring with a valence lexicon.

Implements the standard social-media valence heuristics: negation
flipping, booster words with distance damping, ALL-CAPS emphasis,
exclamation/question-mark amplification, "but"-clause reweighting, a few
fixed idioms, and the bounded compound score x / sqrt(x^2 + alpha).

The lexicon is a tab-separated token/valence file; the package ships a
curated one and any file in the same format can be supplied instead.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass
from importlib import resources

B_INCR = 0.293
B_DECR = -0.293
C_INCR = 0.733          # ALL-CAPS emphasis
N_SCALAR = -0.74        # negation flip factor
NORMALIZE_ALPHA = 15.0

NEGATIONS = frozenset([
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt",
    "ain't", "aren't", "can't", "couldn't", "daren't", "didn't", "doesn't",
    "dont", "hadnt", "hasnt", "havent", "isnt", "mightnt", "mustnt", "neither",
    "don't", "hadn't", "hasn't", "haven't", "isn't", "mightn't", "mustn't",
    "neednt", "needn't", "never", "none", "nope", "nor", "not", "nothing", "nowhere",
    "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent",
    "oughtn't", "shan't", "shouldn't", "uh-uh", "wasn't", "weren't",
    "without", "wont", "wouldnt", "won't", "wouldn't", "rarely", "seldom", "despite",
])

BOOSTERS = {
    "absolutely": B_INCR, "amazingly": B_INCR, "awfully": B_INCR,
    "completely": B_INCR, "considerably": B_INCR, "decidedly": B_INCR,
    "deeply": B_INCR, "enormously": B_INCR, "entirely": B_INCR,
    "especially": B_INCR, "exceptionally": B_INCR, "extremely": B_INCR,
    "fabulously": B_INCR, "fully": B_INCR, "greatly": B_INCR, "hella": B_INCR,
    "highly": B_INCR, "hugely": B_INCR, "incredibly": B_INCR, "intensely": B_INCR,
    "majorly": B_INCR, "more": B_INCR, "most": B_INCR, "particularly": B_INCR,
    "purely": B_INCR, "quite": B_INCR, "really": B_INCR, "remarkably": B_INCR,
    "so": B_INCR, "substantially": B_INCR, "thoroughly": B_INCR,
    "totally": B_INCR, "tremendously": B_INCR, "unbelievably": B_INCR,
    "unusually": B_INCR, "utterly": B_INCR, "very": B_INCR,
    "almost": B_DECR, "barely": B_DECR, "hardly": B_DECR, "just enough": B_DECR,
    "kind of": B_DECR, "kinda": B_DECR, "kindof": B_DECR, "kind-of": B_DECR,
    "less": B_DECR, "little": B_DECR, "marginally": B_DECR, "occasionally": B_DECR,
    "partly": B_DECR, "scarcely": B_DECR, "slightly": B_DECR, "somewhat": B_DECR,
    "sort of": B_DECR, "sorta": B_DECR, "sortof": B_DECR, "sort-of": B_DECR,
}

IDIOMS = {
    "the shit": 3.0, "the bomb": 3.0, "bad ass": 1.5, "badass": 1.5,
    "yeah right": -2.0, "kiss of death": -1.5, "to die for": 3.0,
    "cut the mustard": 2.0, "hand to mouth": -2.0,
}


@dataclass(frozen=True)
class SentimentScores:
    """Positive/neutral/negative fractions plus the bounded compound score."""

    positive: float
    neutral: float
    negative: float
    compound: float


@dataclass(frozen=True)
class VaderLexicon:
    """Valence map plus the rule tables and constants the scorer uses."""

    valences: dict
    boosters: dict
    negations: frozenset
    alpha: float = NORMALIZE_ALPHA
    caps_incr: float = C_INCR
    negation_scalar: float = N_SCALAR


def default_lexicon_path():
    return resources.files("btcvol").joinpath("data/vader_lexicon.txt")


def load_lexicon(path=None) -> VaderLexicon:
    """Load token -> valence from a tab-separated file (token, valence, ...)."""
    valences: dict[str, float] = {}
    source = path if path is not None else default_lexicon_path()
    with open(source, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 2:
                continue
            value = float(parts[1])
            if not math.isfinite(value):
                raise ValueError(f"non-finite valence for token {parts[0]!r}")
            valences[parts[0]] = value
    if not valences:
        raise ValueError(f"empty lexicon at {source}")
    return VaderLexicon(valences=valences, boosters=dict(BOOSTERS), negations=NEGATIONS)


def normalize(score: float, alpha: float = NORMALIZE_ALPHA) -> float:
    norm = score / math.sqrt(score * score + alpha)
    return max(-1.0, min(1.0, norm))


def _tokenize(text: str) -> list[str]:
    """Whitespace tokens with leading/trailing punctuation stripped; short
    leftovers (emoticons and the like) keep their original form."""
    tokens = []
    for raw in text.split():
        stripped = raw.strip(string.punctuation)
        tokens.append(raw if len(stripped) <= 2 else stripped)
    return tokens


def _mixed_caps(tokens: list[str]) -> bool:
    upper = sum(1 for t in tokens if t.isupper())
    return 0 < len(tokens) - upper < len(tokens)


def _negated(word: str, lexicon: VaderLexicon) -> bool:
    w = word.lower()
    return w in lexicon.negations or "n't" in w


def _booster_effect(word: str, valence: float, mixed_caps: bool,
                    lexicon: VaderLexicon) -> float:
    scalar = lexicon.boosters.get(word.lower(), 0.0)
    if scalar == 0.0:
        return 0.0
    if valence < 0:
        scalar = -scalar
    if word.isupper() and mixed_caps:
        scalar += C_INCR if valence > 0 else -C_INCR
    return scalar


def _idiom_check(valence: float, lowered: list[str], i: int) -> float:
    # windows around the current token, longest-context first
    behind = [
        f"{lowered[i - 1]} {lowered[i]}",
        f"{lowered[i - 2]} {lowered[i - 1]} {lowered[i]}",
        f"{lowered[i - 2]} {lowered[i - 1]}",
        f"{lowered[i - 3]} {lowered[i - 2]} {lowered[i - 1]}",
        f"{lowered[i - 3]} {lowered[i - 2]}",
    ]
    for seq in behind:
        if seq in IDIOMS:
            valence = IDIOMS[seq]
            break
    if len(lowered) - 1 > i:
        seq = f"{lowered[i]} {lowered[i + 1]}"
        if seq in IDIOMS:
            valence = IDIOMS[seq]
    if len(lowered) - 1 > i + 1:
        seq = f"{lowered[i]} {lowered[i + 1]} {lowered[i + 2]}"
        if seq in IDIOMS:
            valence = IDIOMS[seq]
    # multi-word dampeners such as "sort of" acting from behind
    for seq in (behind[3], behind[4], behind[2]):
        if seq in BOOSTERS:
            valence += BOOSTERS[seq]
    return valence


def _negation_at(valence: float, lowered: list[str], distance: int, i: int,
                 lexicon: VaderLexicon) -> float:
    if distance == 0:
        if _negated(lowered[i - 1], lexicon):
            valence *= N_SCALAR
    elif distance == 1:
        if lowered[i - 2] == "never" and lowered[i - 1] in ("so", "this"):
            valence *= 1.25
        elif lowered[i - 2] == "without" and lowered[i - 1] == "doubt":
            pass
        elif _negated(lowered[i - 2], lexicon):
            valence *= N_SCALAR
    else:
        if lowered[i - 3] == "never" and (lowered[i - 2] in ("so", "this")
                                          or lowered[i - 1] in ("so", "this")):
            valence *= 1.25
        elif lowered[i - 3] == "without" and (lowered[i - 2] == "doubt"
                                              or lowered[i - 1] == "doubt"):
            pass
        elif _negated(lowered[i - 3], lexicon):
            valence *= N_SCALAR
    return valence


def _least_check(valence: float, lowered: list[str], i: int,
                 lexicon: VaderLexicon) -> float:
    if i > 1 and lowered[i - 1] not in lexicon.valences and lowered[i - 1] == "least":
        if lowered[i - 2] not in ("at", "very"):
            valence *= N_SCALAR
    elif i > 0 and lowered[i - 1] not in lexicon.valences and lowered[i - 1] == "least":
        valence *= N_SCALAR
    return valence


def _token_valence(tokens: list[str], lowered: list[str], i: int,
                   mixed_caps: bool, lexicon: VaderLexicon) -> float:
    item = lowered[i]
    if item not in lexicon.valences:
        return 0.0
    valence = lexicon.valences[item]
    # "no" negating a following lexicon word scores zero itself
    if item == "no" and i != len(tokens) - 1 and lowered[i + 1] in lexicon.valences:
        valence = 0.0
    if ((i > 0 and lowered[i - 1] == "no")
            or (i > 1 and lowered[i - 2] == "no")
            or (i > 2 and lowered[i - 3] == "no" and lowered[i - 1] in ("or", "nor"))):
        valence = lexicon.valences[item] * N_SCALAR
    if tokens[i].isupper() and mixed_caps:
        valence += C_INCR if valence > 0 else -C_INCR
    for distance in range(3):
        j = i - distance - 1
        if j < 0 or lowered[j] in lexicon.valences:
            continue
        effect = _booster_effect(tokens[j], valence, mixed_caps, lexicon)
        if distance == 1 and effect != 0.0:
            effect *= 0.95
        if distance == 2 and effect != 0.0:
            effect *= 0.9
        valence += effect
        valence = _negation_at(valence, lowered, distance, i, lexicon)
        if distance == 2:
            valence = _idiom_check(valence, lowered, i)
    return _least_check(valence, lowered, i, lexicon)


def _but_reweight(lowered: list[str], sentiments: list[float]) -> list[float]:
    if "but" not in lowered:
        return sentiments
    pivot = lowered.index("but")
    out = list(sentiments)
    for i in range(len(out)):
        if i < pivot:
            out[i] *= 0.5
        elif i > pivot:
            out[i] *= 1.5
    return out


def _punctuation_emphasis(text: str) -> float:
    bangs = min(text.count("!"), 4)
    amplifier = bangs * 0.292
    marks = text.count("?")
    if marks > 1:
        amplifier += marks * 0.18 if marks <= 3 else 0.96
    return amplifier


def vader_compound(text: str, lexicon: VaderLexicon) -> SentimentScores:
    """Score a text; unknown tokens contribute nothing and a text without
    tokens is fully neutral."""
    tokens = _tokenize(text)
    lowered = [t.lower() for t in tokens]
    if not tokens:
        return SentimentScores(positive=0.0, neutral=1.0, negative=0.0, compound=0.0)
    mixed_caps = _mixed_caps(tokens)

    sentiments: list[float] = []
    for i in range(len(tokens)):
        if lowered[i] in lexicon.boosters:
            sentiments.append(0.0)
            continue
        if i < len(tokens) - 1 and lowered[i] == "kind" and lowered[i + 1] == "of":
            sentiments.append(0.0)
            continue
        sentiments.append(_token_valence(tokens, lowered, i, mixed_caps, lexicon))
    sentiments = _but_reweight(lowered, sentiments)

    total = float(sum(sentiments))
    emphasis = _punctuation_emphasis(text)
    if total > 0:
        total += emphasis
    elif total < 0:
        total -= emphasis
    compound = normalize(total, lexicon.alpha)

    pos_sum = sum(s + 1.0 for s in sentiments if s > 0)
    neg_sum = sum(s - 1.0 for s in sentiments if s < 0)
    neu_count = sum(1 for s in sentiments if s == 0)
    if pos_sum > abs(neg_sum):
        pos_sum += emphasis
    elif pos_sum < abs(neg_sum):
        neg_sum -= emphasis
    denom = pos_sum + abs(neg_sum) + neu_count
    return SentimentScores(
        positive=pos_sum / denom,
        neutral=neu_count / denom,
        negative=abs(neg_sum) / denom,
        compound=compound,
    )
