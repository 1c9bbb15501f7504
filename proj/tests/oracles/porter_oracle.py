"""Reference Porter stems from NLTK (ORIGINAL_ALGORITHM mode).

Writes tests/oracles/frozen/porter_stems.json: stems for every term in the
desk-corpus counting oracle plus a list of classic suffix cases.
"""
import json
import pathlib

from nltk.stem.porter import PorterStemmer

ROOT = pathlib.Path(__file__).resolve().parents[2]
CLASSIC = [
    "caresses", "ponies", "ties", "caress", "cats", "feed", "agreed", "plastered", "bled", "motoring",
    "sing", "conflated", "troubled", "sized", "hopping", "tanned", "falling", "hissing", "fizzed",
    "failing", "filing", "happy", "sky", "relational", "conditional", "rational", "valenci", "hesitanci",
    "digitizer", "conformabli", "radicalli", "differentli", "vileli", "analogousli", "vietnamization",
    "predication", "operator", "feudalism", "decisiveness", "hopefulness", "callousness", "formaliti",
    "sensitiviti", "sensibiliti", "triplicate", "formative", "formalize", "electriciti", "electrical",
    "hopeful", "goodness", "revival", "allowance", "inference", "airliner", "gyroscopic", "adjustable",
    "defensible", "irritant", "replacement", "adjustment", "dependent", "adoption", "homologou",
    "communism", "activate", "angulariti", "homologous", "effective", "bowdlerize", "probate", "rate",
    "cease", "controll", "roll", "generalizations", "oscillators", "grandmother", "baked", "cookies",
    "a", "is", "yes", "sses", "eed", "ying", "dying", "lying",
]


def main() -> None:
    stemmer = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)
    counts = json.loads((ROOT / "tests" / "oracles" / "frozen" / "desk_counts.json").read_text(encoding="utf-8"))
    words = sorted(set(CLASSIC) | {w for w in counts["term_counts"] if w.isascii()})
    out = {w: stemmer.stem(w, to_lowercase=False) for w in words}
    dest = ROOT / "tests" / "oracles" / "frozen" / "porter_stems.json"
    dest.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
