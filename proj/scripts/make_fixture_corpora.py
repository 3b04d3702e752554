#!/usr/bin/env python3
"""Generate the example stimulus sets, fixture corpora, and corpus-count files.

Outputs:
  data/stimuli/*.jsonl            example factorial sets (byte-range spans)
  tests/data/corpus/*.conllu      dependency fixtures with known offset
                                  histograms for baseline checks
  tests/data/corpus/*.jsonl       reflexive sidecars and agreement-count files

Byte offsets in the stimulus files are computed here rather than by hand;
rerun after editing any sentence.
"""

import json
import os
import re
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def span(text, word, occurrence=0):
    hits = [m.span() for m in re.finditer(r"(?<![\w])" + re.escape(word) + r"(?![\w])", text)]
    if occurrence >= len(hits):
        raise SystemExit(f"word {word!r} occurrence {occurrence} not found in {text!r}")
    return list(hits[occurrence])


def item(item_id, set_id, interference, grammaticality, text, critical, target,
         distractor, subject_number=None):
    rec = {
        "item_id": item_id,
        "set_id": set_id,
        "interference": interference,
        "grammaticality": grammaticality,
        "text": text,
        "critical_word": span(text, critical),
        "target_word": span(text, target),
        "distractor_word": span(text, distractor),
    }
    if subject_number is not None:
        rec["subject_number"] = subject_number
    return rec


def write_jsonl(path, records):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"{path}: {len(records)} records")


def make_stimuli():
    wagers46 = [
        item("w46_gram_int", "w46_s1", "int", "gram",
             "The slogan on the poster was designed to get attention.",
             "was", "slogan", "poster", "sg"),
        item("w46_gram_nonint", "w46_s1", "non-int", "gram",
             "The slogan on the posters was designed to get attention.",
             "was", "slogan", "posters", "sg"),
        item("w46_ungram_int", "w46_s1", "int", "ungram",
             "The slogan on the posters were designed to get attention.",
             "were", "slogan", "posters", "sg"),
        item("w46_ungram_nonint", "w46_s1", "non-int", "ungram",
             "The slogan on the poster were designed to get attention.",
             "were", "slogan", "poster", "sg"),
    ]
    write_jsonl(os.path.join(ROOT, "data", "stimuli", "wagers09_exp46_example.jsonl"),
                wagers46)

    wagers23 = [
        item("w23_gram_int", "w23_s1", "int", "gram",
             "The commentator who the viewer trusts received an award.",
             "trusts", "viewer", "commentator", "sg"),
        item("w23_gram_nonint", "w23_s1", "non-int", "gram",
             "The commentators who the viewer trusts received an award.",
             "trusts", "viewer", "commentators", "sg"),
        item("w23_ungram_int", "w23_s1", "int", "ungram",
             "The commentators who the viewer trust received an award.",
             "trust", "viewer", "commentators", "sg"),
        item("w23_ungram_nonint", "w23_s1", "non-int", "ungram",
             "The commentator who the viewer trust received an award.",
             "trust", "viewer", "commentator", "sg"),
    ]
    write_jsonl(os.path.join(ROOT, "data", "stimuli", "wagers09_exp23_example.jsonl"),
                wagers23)

    dillon_agr = [
        item("da_gram_int", "da_s1", "int", "gram",
             "The executive who oversaw the middle manager apparently was dishonest about the budget.",
             "was", "executive", "manager", "sg"),
        item("da_gram_nonint", "da_s1", "non-int", "gram",
             "The executive who oversaw the middle managers apparently was dishonest about the budget.",
             "was", "executive", "managers", "sg"),
        item("da_ungram_int", "da_s1", "int", "ungram",
             "The executive who oversaw the middle managers apparently were dishonest about the budget.",
             "were", "executive", "managers", "sg"),
        item("da_ungram_nonint", "da_s1", "non-int", "ungram",
             "The executive who oversaw the middle manager apparently were dishonest about the budget.",
             "were", "executive", "manager", "sg"),
    ]
    write_jsonl(os.path.join(ROOT, "data", "stimuli", "dillon13_agreement_example.jsonl"),
                dillon_agr)

    dillon_refl = [
        item("dr_gram_int", "dr_s1", "int", "gram",
             "The basketball coach who trained the star player usually blamed himself for the loss.",
             "himself", "coach", "player"),
        item("dr_gram_nonint", "dr_s1", "non-int", "gram",
             "The basketball coach who trained the star players usually blamed himself for the loss.",
             "himself", "coach", "players"),
        item("dr_ungram_int", "dr_s1", "int", "ungram",
             "The basketball coach who trained the star players usually blamed themselves for the loss.",
             "themselves", "coach", "players"),
        item("dr_ungram_nonint", "dr_s1", "non-int", "ungram",
             "The basketball coach who trained the star player usually blamed themselves for the loss.",
             "themselves", "coach", "player"),
    ]
    write_jsonl(os.path.join(ROOT, "data", "stimuli", "dillon13_reflexive_example.jsonl"),
                dillon_refl)


# ---------------------------------------------------------------------------
# dependency fixtures
# ---------------------------------------------------------------------------

NOUNS = ["dog", "cat", "bird", "horse", "farmer", "teacher", "sailor", "child",
         "writer", "doctor", "nurse", "pilot", "baker", "singer", "judge"]
VERBS = ["runs", "sleeps", "sings", "waits", "jumps", "smiles", "reads",
         "writes", "laughs", "listens"]
ADVS = ["quickly", "quietly", "often", "rarely", "calmly"]


def conllu_sentence(sent_id, words, deps):
    """deps: list of (dep_index, gov_index, relation), 1-based indices."""
    lines = [f"# sent_id = {sent_id}", "# text = " + " ".join(words)]
    heads = {d: (g, rel) for d, g, rel in deps}
    for i, form in enumerate(words, start=1):
        head, rel = heads.get(i, (0, "root"))
        upos = "PUNCT" if form in {".", ",", "?", "!"} else "X"
        lines.append(f"{i}\t{form}\t_\t{upos}\t_\t_\t{head}\t{rel}\t_\t_")
    return "\n".join(lines) + "\n\n"


def make_baseline_nsubj():
    """50 nsubj instances: offsets -1 x21, -2 x12, -3 x8, +1 x5, -4 x4 -> 42%."""
    out = []
    n = iter(NOUNS * 10)
    v = iter(VERBS * 10)
    a = iter(ADVS * 20)
    sid = 0

    def nxt(it):
        return next(it)

    for _ in range(21):  # offset -1: noun immediately before verb
        sid += 1
        words = ["The", nxt(n), nxt(v), "today", "."]
        out.append(conllu_sentence(f"b{sid}", words, [(2, 3, "nsubj")]))
    for _ in range(12):  # offset -2
        sid += 1
        words = ["The", nxt(n), nxt(a), nxt(v), "."]
        out.append(conllu_sentence(f"b{sid}", words, [(2, 4, "nsubj")]))
    for _ in range(8):  # offset -3
        sid += 1
        words = ["The", nxt(n), nxt(a), "still", nxt(v), "."]
        out.append(conllu_sentence(f"b{sid}", words, [(2, 5, "nsubj")]))
    for _ in range(5):  # offset +1: inverted quotation frame
        sid += 1
        words = ["so", "says", "the", nxt(n), "."]
        out.append(conllu_sentence(f"b{sid}", words, [(4, 2, "nsubj"), (1, 2, "advmod")]))
    for _ in range(4):  # offset -4
        sid += 1
        words = ["The", nxt(n), "in", "town", "often", nxt(v), "."]
        out.append(conllu_sentence(f"b{sid}", words, [(2, 6, "nsubj")]))

    path = os.path.join(ROOT, "tests", "data", "corpus", "baseline_nsubj.conllu")
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        f.write("".join(out))
    print(f"{path}: 50 nsubj instances, modal offset -1 at 21/50")


def make_baseline_reflexive():
    """50 antecedent-anaphor pairs: offsets -2 x11 (22%), -3 x10, -1 x9, -4 x8, -5 x7, -6 x5."""
    recs = []

    def rec(words, ant, ana):
        recs.append({"text": " ".join(words),
                     "antecedent_word_index": ant,
                     "anaphor_word_index": ana})

    n = iter(NOUNS * 20)
    for _ in range(11):  # -2
        rec(["The", next(n), "blamed", "himself", "."], 1, 3)
    for _ in range(10):  # -3
        rec(["The", next(n), "never", "blamed", "herself", "."], 1, 4)
    for _ in range(9):  # -1
        rec(["The", next(n), "himself", "arrived", "."], 1, 2)
    for _ in range(8):  # -4
        rec(["The", next(n), "at", "home", "blamed", "themselves", "."], 1, 5)
    for _ in range(7):  # -5
        rec(["The", next(n), "in", "the", "yard", "hurt", "itself", "."], 1, 6)
    for _ in range(5):  # -6
        rec(["The", next(n), "by", "the", "old", "barn", "hurt", "himself", "."], 1, 7)

    path = os.path.join(ROOT, "tests", "data", "corpus", "baseline_reflexive.jsonl")
    write_jsonl(path, recs)


def make_planted_fixtures(single_token_check):
    """Fixture corpora for the planted-attention model; 'dog' is the marker word."""
    sents = [
        # hits: dependent is 'dog'
        (["The", "dog", "sees", "the", "cat", "."], 2, 3),        # -1
        (["The", "big", "dog", "finds", "a", "bone", "."], 3, 4),  # -1
        (["A", "dog", "waits", "at", "night", "."], 2, 3),         # -1
        (["My", "dog", "waits", "outside", "."], 2, 3),            # -1
        (["That", "dog", "sleeps", "all", "day", "."], 2, 3),      # -1
        (["The", "dog", "quickly", "eats", "meat", "."], 2, 4),    # -2
        (["One", "dog", "always", "wins", "races", "."], 2, 4),    # -2
        (["The", "dog", "never", "stops", "running", "."], 2, 4),  # -2
        (["The", "dog", "at", "home", "plays", "."], 2, 5),        # -3
        # miss: marker 'dog' is not the labelled dependent
        (["Near", "the", "dog", "the", "cat", "quietly", "sleeps", "."], 5, 7),  # -2
    ]
    out = []
    for idx, (words, dep, gov) in enumerate(sents, start=1):
        for w_i, w in enumerate(words):
            piece = w if w_i == 0 else " " + w
            single_token_check(piece)
        out.append(conllu_sentence(f"p{idx}", words, [(dep, gov, "nsubj")]))
    path = os.path.join(ROOT, "tests", "data", "corpus", "planted_nsubj.conllu")
    with open(path, "w") as f:
        f.write("".join(out))
    print(f"{path}: 10 sentences, 9 hits for the marker head")

    refl = [
        (["The", "dog", "hurt", "himself", "."], 1, 3),            # -2
        (["A", "dog", "saw", "itself", "today", "."], 1, 3),       # -2
        (["The", "dog", "himself", "arrived", "."], 1, 2),         # -1
        (["My", "dog", "never", "bit", "itself", "."], 1, 4),      # -3
        # miss: antecedent is 'cat', marker 'dog' intervenes
        (["The", "cat", "near", "the", "dog", "hurt", "itself", "."], 1, 6),  # -5
    ]
    recs = []
    for words, ant, ana in refl:
        for w_i, w in enumerate(words):
            piece = w if w_i == 0 else " " + w
            single_token_check(piece)
        recs.append({"text": " ".join(words),
                     "antecedent_word_index": ant,
                     "anaphor_word_index": ana})
    path = os.path.join(ROOT, "tests", "data", "corpus", "planted_reflexive.jsonl")
    write_jsonl(path, recs)


def make_count_files():
    def rec(subj, verb, dists):
        nouns = {"sg": "boy", "pl": "boys"}
        return {
            "text": f"the {nouns[subj]} near the {' and the '.join(nouns[d] for d in dists)} "
                    f"{'is' if verb == 'sg' else 'are'} here",
            "subject_number": subj,
            "verb_number": verb,
            "distractor_numbers": dists,
        }

    paper = (
        [rec("sg", "pl", ["pl"]) for _ in range(80)]
        + [rec("sg", "pl", ["sg"]) for _ in range(39)]
        + [rec("pl", "sg", ["sg"]) for _ in range(71)]
        + [rec("pl", "sg", ["pl"]) for _ in range(51)]
    )
    write_jsonl(os.path.join(ROOT, "tests", "data", "corpus", "table3_shape.jsonl"), paper)

    hand = [
        rec("sg", "pl", ["pl"]),          # interfering        sg
        rec("sg", "pl", ["sg"]),          # non-interfering    sg
        rec("sg", "pl", ["sg", "pl"]),    # interfering (any)  sg
        rec("sg", "pl", []),              # excluded
        rec("pl", "sg", ["sg"]),          # interfering        pl
        rec("pl", "sg", ["pl"]),          # non-interfering    pl
        rec("pl", "sg", ["pl", "pl"]),    # non-interfering    pl
        rec("pl", "sg", ["pl", "sg"]),    # interfering (any)  pl
        rec("sg", "pl", ["pl", "pl"]),    # interfering        sg
        rec("pl", "sg", []),              # excluded
    ]
    write_jsonl(os.path.join(ROOT, "tests", "data", "corpus", "handcounted.jsonl"), hand)


def make_handful_conllu():
    text = """# newdoc id = fixture
# sent_id = h1
# text = The dogs bark loudly .
1\tThe\tthe\tDET\t_\t_\t2\tdet\t_\t_
2\tdogs\tdog\tNOUN\t_\t_\t3\tnsubj\t_\t_
3\tbark\tbark\tVERB\t_\t_\t0\troot\t_\t_
4\tloudly\tloudly\tADV\t_\t_\t3\tadvmod\t_\t_
5\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_

# sent_id = h2
# text = He won't give up .
1-2\twon't\t_\t_\t_\t_\t_\t_\t_\t_
1\two\twill\tAUX\t_\t_\t3\taux\t_\t_
2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_
3\tgive\tgive\tVERB\t_\t_\t0\troot\t_\t_
3.1\tremark\tremark\tNOUN\t_\t_\t_\t_\t_\t_
4\tup\tup\tADP\t_\t_\t3\tcompound:prt\t_\t_
5\t.\t.\tPUNCT\t_\t_\t3\tpunct\t_\t_
6\tHe\the\tPRON\t_\t_\t3\tnsubj\t_\t_

"""
    path = os.path.join(ROOT, "tests", "data", "corpus", "handful.conllu")
    with open(path, "w") as f:
        f.write(text)
    print(f"{path}: reader edge cases")


def main():
    sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
    import importlib.util
    spec = importlib.util.spec_from_file_location(
        "fixtures", os.path.join(ROOT, "scripts", "make_reference_fixtures.py"))
    fixtures = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(fixtures)
    bpe = fixtures.RefBPE(fixtures.VOCAB_JSON, fixtures.MERGES_TXT)

    def single_token_check(piece):
        ids = bpe.encode(piece)
        if len(ids) != 1:
            raise SystemExit(f"fixture word {piece!r} is not a single token: {ids}")

    make_stimuli()
    make_baseline_nsubj()
    make_baseline_reflexive()
    make_planted_fixtures(single_token_check)
    make_count_files()
    make_handful_conllu()


if __name__ == "__main__":
    main()
