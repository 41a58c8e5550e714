"""Embedded part-of-speech lexicon: word -> most frequent Penn Treebank tag.

A compact resource for the rule tagger.  It covers English function words
plus common verbs, nouns, adjectives and adverbs; anything else falls to the
suffix heuristics.  Users with a real tagger should prefer the pre-tagged
corpus input instead.
"""

DEFAULT_LEXICON = {
    # determiners / pronouns
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT", "these": "DT",
    "those": "DT", "some": "DT", "any": "DT", "no": "DT", "every": "DT", "each": "DT",
    "i": "PRP", "you": "PRP", "he": "PRP", "she": "PRP", "it": "PRP", "we": "PRP",
    "they": "PRP", "them": "PRP", "him": "PRP", "her": "PRP", "us": "PRP", "me": "PRP",
    "my": "PRP$", "your": "PRP$", "his": "PRP$", "its": "PRP$", "our": "PRP$", "their": "PRP$",
    "who": "WP", "what": "WP", "which": "WDT", "whose": "WP$",
    # prepositions / conjunctions / particles
    "of": "IN", "in": "IN", "on": "IN", "at": "IN", "by": "IN", "with": "IN",
    "from": "IN", "about": "IN", "into": "IN", "over": "IN", "under": "IN",
    "after": "IN", "before": "IN", "between": "IN", "through": "IN", "during": "IN",
    "against": "IN", "near": "IN", "for": "IN", "as": "IN", "if": "IN", "because": "IN",
    "and": "CC", "or": "CC", "but": "CC", "nor": "CC", "so": "CC", "yet": "CC",
    "to": "TO", "not": "RB", "also": "RB", "only": "RB", "again": "RB",
    # auxiliaries / copulas
    "be": "VB", "am": "VBP", "is": "VBZ", "are": "VBP", "was": "VBD", "were": "VBD",
    "been": "VBN", "being": "VBG",
    "do": "VBP", "does": "VBZ", "did": "VBD", "done": "VBN",
    "have": "VBP", "has": "VBZ", "had": "VBD", "having": "VBG",
    "will": "MD", "would": "MD", "can": "MD", "could": "MD", "may": "MD",
    "might": "MD", "shall": "MD", "should": "MD", "must": "MD",
    "'s": "VBZ", "'re": "VBP", "'m": "VBP", "'ve": "VBP", "'ll": "MD", "'d": "MD",
    "n't": "RB", "'t": "RB",
    # common verbs
    "say": "VB", "says": "VBZ", "said": "VBD", "go": "VB", "goes": "VBZ", "went": "VBD",
    "gone": "VBN", "get": "VB", "got": "VBD", "make": "VB", "made": "VBD",
    "know": "VB", "knew": "VBD", "think": "VB", "thought": "VBD", "take": "VB",
    "took": "VBD", "see": "VB", "saw": "VBD", "seen": "VBN", "come": "VB", "came": "VBD",
    "want": "VB", "use": "VB", "find": "VB", "found": "VBD", "give": "VB", "gave": "VBD",
    "tell": "VB", "told": "VBD", "ask": "VB", "asked": "VBD", "work": "VB",
    "call": "VB", "called": "VBD", "try": "VB", "tried": "VBD", "need": "VB",
    "feel": "VB", "felt": "VBD", "become": "VB", "became": "VBD", "leave": "VB",
    "left": "VBD", "put": "VB", "mean": "VB", "meant": "VBD", "keep": "VB", "kept": "VBD",
    "let": "VB", "begin": "VB", "began": "VBD", "show": "VB", "showed": "VBD",
    "hear": "VB", "heard": "VBD", "play": "VB", "run": "VB", "ran": "VBD",
    "move": "VB", "moved": "VBD", "live": "VB", "believe": "VB", "bring": "VB",
    "brought": "VBD", "happen": "VB", "write": "VB", "wrote": "VBD", "sit": "VB",
    "sat": "VBD", "stand": "VB", "stood": "VBD", "lose": "VB", "lost": "VBD",
    "pay": "VB", "paid": "VBD", "meet": "VB", "met": "VBD", "learn": "VB",
    "reach": "VB", "reached": "VBD", "remain": "VB", "remains": "VBZ",
    "falls": "VBZ", "fall": "VB", "fell": "VBD", "rise": "VB", "rose": "VBD",
    "rising": "VBG", "signed": "VBD", "sign": "VB", "signs": "VBZ",
    "translate": "VB", "warn": "VB", "warning": "VBG", "freeze": "VB", "froze": "VBD",
    # common nouns
    "time": "NN", "year": "NN", "years": "NNS", "people": "NNS", "way": "NN",
    "day": "NN", "days": "NNS", "man": "NN", "woman": "NN", "child": "NN",
    "children": "NNS", "world": "NN", "life": "NN", "hand": "NN", "hands": "NNS",
    "part": "NN", "place": "NN", "week": "NN", "weeks": "NNS", "month": "NN",
    "case": "NN", "point": "NN", "government": "NN", "company": "NN", "number": "NN",
    "group": "NN", "problem": "NN", "fact": "NN", "news": "NN", "weather": "NN",
    "snow": "NN", "rain": "NN", "storm": "NN", "winter": "NN", "summer": "NN",
    "water": "NN", "school": "NN", "state": "NN", "city": "NN", "country": "NN",
    "house": "NN", "home": "NN", "night": "NN", "morning": "NN", "word": "NN",
    "words": "NNS", "language": "NN", "message": "NN", "response": "NN",
    "community": "NN", "student": "NN", "students": "NNS", "death": "NN",
    "toll": "NN", "hurricane": "NN", "cat": "NN", "dog": "NN", "mat": "NN",
    "meeting": "NN", "south": "NN", "north": "NN", "east": "NN", "west": "NN",
    # adjectives / adverbs
    "good": "JJ", "new": "JJ", "first": "JJ", "last": "JJ", "long": "JJ",
    "great": "JJ", "little": "JJ", "own": "JJ", "other": "JJ", "old": "JJ",
    "right": "JJ", "big": "JJ", "high": "JJ", "small": "JJ", "large": "JJ",
    "next": "JJ", "early": "JJ", "young": "JJ", "important": "JJ", "few": "JJ",
    "cold": "JJ", "warm": "JJ", "hot": "JJ", "deaf": "JJ", "hard": "JJ",
    "now": "RB", "then": "RB", "here": "RB", "there": "RB", "when": "WRB",
    "where": "WRB", "why": "WRB", "how": "WRB", "very": "RB", "just": "RB",
    "too": "RB", "well": "RB", "never": "RB", "always": "RB", "often": "RB",
    "still": "RB", "quickly": "RB", "slowly": "RB", "softly": "RB", "today": "NN",
    "tomorrow": "NN", "yesterday": "NN", "tonight": "NN",
    # punctuation
    ".": ".", ",": ",", "?": ".", "!": ".", ";": ":", ":": ":", "'": "''",
    '"': "''", "(": "(", ")": ")", "-": ":",
}
