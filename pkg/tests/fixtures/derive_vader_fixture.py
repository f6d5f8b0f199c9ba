"""One-time generator for vader_fixture.json.

Each case carries its per-token valence list, derived BY HAND from the
published rule set and the valences in src/btcvol/data/vader_lexicon.txt
(the derivation is spelled out in each case's note). This script only
performs the final aggregation arithmetic -- compound normalization and
the positive/neutral/negative sift -- so the expected values are
independent of the package implementation.

Rule constants used in the hand derivations:
  booster +/-0.293 (damped x0.95 at distance 2, x0.9 at distance 3),
  ALL-CAPS +/-0.733, negation flip x-0.74, "never so/this" x1.25,
  "but" reweighting x0.5 before / x1.5 after,
  exclamations +0.292 each (max 4), question marks 2-3: +0.18 each, >3: +0.96,
  compound = x / sqrt(x^2 + 15).

Run from the repository root:  python tests/fixtures/derive_vader_fixture.py
"""

import json
import math
import os

# (text, per-token sentiment list, derivation note)
CASES = [
    ("bitcoin is good",
     [0, 0, 1.9],
     "good=1.9, no modifiers"),
    ("bitcoin is GOOD",
     [0, 0, 1.9 + 0.733],
     "good=1.9 ALL-CAPS among lowercase +0.733"),
    ("bitcoin is very good",
     [0, 0, 0, 1.9 + 0.293],
     "booster very at distance 1: +0.293"),
    ("bitcoin is not good",
     [0, 0, 0, 1.9 * -0.74],
     "negation not at distance 1: x-0.74"),
    ("bitcoin is very very good",
     [0, 0, 0, 0, 1.9 + 0.293 + 0.293 * 0.95],
     "boosters at distances 1 and 2 (damped x0.95)"),
    ("BTC crash today",
     [0, -2.9, 0],
     "crash=-2.9; BTC out of lexicon"),
    ("great gains but terrible fees",
     [3.1 * 0.5, 1.9 * 0.5, 0, -2.1 * 1.5, 0],
     "great=3.1, gains=1.9 halved before but; terrible=-2.1 x1.5 after"),
    ("bitcoin is good!!!",
     [0, 0, 1.9],
     "three exclamations add 3x0.292 to the valence sum"),
    ("why is bitcoin down??",
     [0, 0, 0, -1.2],
     "down=-1.2; two question marks add 2x0.18 to the negative sum"),
    ("no loss today",
     [0, -2.2 * -0.74, 0],
     "no before lexicon word scores 0 itself and flips loss=-2.2"),
    ("least profit",
     [0, 2.0 * -0.74],
     "leading least flips profit=2.0"),
    ("at least profit",
     [0, 0, 2.0],
     "at least is exempt from the least flip"),
    ("not really a scam",
     [0, 0, 0, (-3.0 - 0.293 * 0.95) * -0.74],
     "scam=-3.0; booster really at distance 2 pushes negative (-0.293*0.95);"
     " negation not at distance 3 flips"),
    ("he is one bad ass trader",
     [0, 0, 0, 1.5, 0, 0],
     "idiom 'bad ass' overrides bad=-2.5 with 1.5"),
    ("it is kind of good",
     [0, 0, 0, 0, 1.9 - 0.293],
     "kind scored 0 before of; n-gram dampener 'kind of' -0.293 on good"),
    ("wow BTC is unstoppable",
     [2.8, 0, 0, 2.1],
     "wow=2.8, unstoppable=2.1; BTC upper does not hit lexicon words"),
    ("the chart shows numbers",
     [0, 0, 0, 0],
     "no lexicon tokens: fully neutral"),
    ("I don't trust this pump",
     [0, 0, 2.1 * -0.74, 0, 1.0 * -0.74],
     "don't flips trust=2.1 at distance 1 and pump=1.0 at distance 3"),
    ("BTC TERRIBLE crash",
     [0, -2.1 - 0.733, -2.9],
     "TERRIBLE=-2.1 ALL-CAPS in mixed-case text -0.733; crash=-2.9"),
    ("never so good",
     [0, 0, (1.9 + 0.293) * 1.25],
     "booster so +0.293 then never-so intensification x1.25"),
]


def punctuation_amplifier(text: str) -> float:
    bangs = min(text.count("!"), 4)
    amp = bangs * 0.292
    marks = text.count("?")
    if marks > 1:
        amp += marks * 0.18 if marks <= 3 else 0.96
    return amp


def aggregate(text: str, sentiments: list) -> dict:
    total = float(sum(sentiments))
    amp = punctuation_amplifier(text)
    if total > 0:
        total += amp
    elif total < 0:
        total -= amp
    compound = total / math.sqrt(total * total + 15.0)
    compound = max(-1.0, min(1.0, compound))

    pos = sum(s + 1.0 for s in sentiments if s > 0)
    neg = sum(s - 1.0 for s in sentiments if s < 0)
    neu = float(sum(1 for s in sentiments if s == 0))
    if pos > abs(neg):
        pos += amp
    elif pos < abs(neg):
        neg -= amp
    denom = pos + abs(neg) + neu
    return {
        "compound": compound,
        "positive": pos / denom,
        "neutral": neu / denom,
        "negative": abs(neg) / denom,
    }


def main() -> None:
    fixture = []
    for text, sentiments, note in CASES:
        entry = {"text": text, "note": note}
        entry.update(aggregate(text, sentiments))
        fixture.append(entry)
    out = os.path.join(os.path.dirname(__file__), "vader_fixture.json")
    with open(out, "w") as fh:
        json.dump(fixture, fh, indent=1)
        fh.write("\n")
    print(f"wrote {len(fixture)} cases to {out}")


if __name__ == "__main__":
    main()
