"""Rule-based cleaning of raw model output into tag lists.

Rules, applied per candidate line in this order:
  1. strip bullet/number markers, lowercase, replace punctuation with spaces
  2. drop stopword tokens (function words and auxiliary verb forms)
  3. drop the candidate if nothing remains
  4. drop it if it contains both a noun and a verb (complete-sentence guard)
  5. drop it if longer than 3 words
  6. order-preserving dedup across the list

Verb detection is lexicon-based: a built-in list of common action verbs
expanded with regular -s/-ing/-ed inflections plus frequent irregular
forms. Any remaining non-verb token counts as a noun. The tagger is
deliberately small and deterministic; the golden-fixture corpus pins its
behavior.
"""

import re

BULLET_RE = re.compile(r"^\s*(?:[-*•‣▪]+|\d+[.)])\s*")
PUNCT_RE = re.compile(r"[^a-z0-9\s]")
MAX_TAG_WORDS = 3

STOPWORDS = frozenset("""
a an the and or but nor so yet of on in to with at by for from into onto
over under about above after before below between during through up down
out off again further then once here there when where while which who whom
what why how this that these those it its i me my we our you your he him
his she her they them their is are was were am be been do does did has
have had having can could will would shall should may might must as if
than too very just not no only own same such all any both each few more
most some other another s t don now
""".split())

_BASE_VERBS = """
act ask assemble bake begin bend bite blow boil bounce break bring build
buy carry catch chase chop clean climb close come cook crawl create cross
cry cut dance dig dive do drag draw drink drive drop eat fall feed fight
film fix flip fly fold follow gather give go grab grill grow hit hold hug hunt jog
join juggle jump kick kiss knit laugh learn lift listen look make mix mow
open paddle paint perform pick plant play point pour prepare pull punch
push read ride roll row run sail say see sell sew shake shoot shout shovel
sing sit skate sketch ski slice slide smile speak spin splash spray spread
sprint stand steer stir stretch surf survey sweep swim swing take talk
teach tell throw tie touch walk wash watch wave weld whisk write
""".split()

_IRREGULAR_FORMS = """
ate began bent bit blew bought broke brought built came caught crept cried
did done drank drew driven drove fell fed felt flew flown fought gave grew
held hid hung knelt laid lay made met ran rang rode rose said sang sat saw
shook shot sought slid sold spoke sprang stood stole swam swept swung
taught threw told took went woke wore wove written wrote
""".split()

_VOWELS = set("aeiou")


def _inflections(base):
    forms = {base}
    # third person singular
    if base.endswith(("s", "x", "z", "ch", "sh")):
        forms.add(base + "es")
    elif base.endswith("y") and len(base) > 1 and base[-2] not in _VOWELS:
        forms.add(base[:-1] + "ies")
    else:
        forms.add(base + "s")
    # -ing / -ed stems
    if base.endswith("e") and not base.endswith("ee"):
        stem = base[:-1]
        forms.add(stem + "ing")
        forms.add(base + "d")
    else:
        stem = base
        doubled = (len(base) >= 3 and base[-1] not in _VOWELS
                   and base[-1] not in "wxy"
                   and base[-2] in _VOWELS and base[-3] not in _VOWELS)
        if doubled:
            stem = base + base[-1]
        forms.add(stem + "ing")
        if base.endswith("y") and base[-2] not in _VOWELS:
            forms.add(base[:-1] + "ied")
        else:
            forms.add(stem + "ed")
    return forms


VERB_FORMS = frozenset(
    form for base in _BASE_VERBS for form in _inflections(base)
) | frozenset(_IRREGULAR_FORMS)


def is_verb(word):
    return word in VERB_FORMS


def normalize_candidate(line):
    """Marker stripping, lowercasing, punctuation removal, space collapse."""
    text = BULLET_RE.sub("", line)
    text = PUNCT_RE.sub(" ", text.lower())
    return " ".join(text.split())


def parse_raw_output(raw):
    """Candidate tag strings from one raw model reply (bulleted or plain)."""
    candidates = []
    for line in raw.splitlines():
        cand = normalize_candidate(line)
        if cand:
            candidates.append(cand)
    return candidates


def clean_tags(candidates):
    """Apply the drop rules to normalized candidates; idempotent."""
    out = []
    seen = set()
    for cand in candidates:
        cand = normalize_candidate(cand)
        words = [w for w in cand.split() if w not in STOPWORDS]
        if not words:
            continue
        has_verb = any(is_verb(w) for w in words)
        has_noun = any(not is_verb(w) for w in words)
        if has_verb and has_noun:
            continue
        if len(words) > MAX_TAG_WORDS:
            continue
        tag = " ".join(words)
        if tag not in seen:
            seen.add(tag)
            out.append(tag)
    return out


def clean_raw_output(raw):
    return clean_tags(parse_raw_output(raw))
