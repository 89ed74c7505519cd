"""Fixture corpus: a miniature grammar book and its synthetic "models".

The book describes eight grammatical phenomena of a constructed language
(standing in for a real low-resource language, whose text cannot ship with
the repository). The :class:`FixtureSynthesizer` provider answers every
pipeline prompt deterministically from this data, which is how the bundled
transcript cache is recorded; replay then reproduces the whole pipeline
byte-exactly without it.

Every synthesizer decision is derived from content hashes, never from
stream position, so recording is stable under any concurrency.
"""

from __future__ import annotations

import json
import re

from ..errors import ScriptExhausted
from ..hashio import content_hash
from ..llm import Completion, LlmRequest, Provider
from ..sampling import DetRng, derive_seed

# --- the mini grammar book ---

HEAD, BODY = 18.0, 10.5

BOOK_BLOCKS: list[tuple[float, str]] = [
    (HEAD, "Noun Morphology and Articles"),
    (BODY, "Nouns themselves never change for case. The masculine article "
           "carries the case instead: do marks the subject, don the direct "
           "object, and dom the indirect object. Learners must watch the "
           "article to find the role of each noun."),
    (BODY, "Most nouns build their plural with the ending -en. A mira becomes "
           "miraen, a sela becomes selaen. The plural article is always dei, "
           "whatever the case."),
    (BODY, "Possession is marked with the particle sen after the possessor. "
           "Do brin sen lumo means the child's book. The following table "
           "lists the adjective forms."),
    (HEAD, "Word Order and Clauses"),
    (BODY, "A main clause keeps its conjugated verb in second position. If an "
           "adverb opens the sentence, the subject moves behind the verb: "
           "Haut lopt do mira. Whatever comes first, the verb stays second."),
    (BODY, "Negation uses the particle nix. It stands right after the "
           "conjugated verb: Do mira lopt nix. Nothing may come between the "
           "verb and nix."),
    (BODY, "A clause opened by wan places its verb at the very end: Wan do "
           "mira lues lopt, sift do brin. Question patterns are summarized "
           "below."),
    (HEAD, "Pronunciation and Spelling"),
    (BODY, "In fast speech a final n may drop before certain consonants. The "
           "spelling follows the pronunciation of the word, not its written "
           "stem."),
    (BODY, "Before b, d, t, and vowels the n is kept. Writers adapt each word "
           "to the sound that is actually spoken."),
    (BODY, "These sound rules interact with the plural ending, which can make "
           "dictation exercises tricky for beginners."),
]

BOOK_TABLES = [
    {
        "table_id": "adjective-forms",
        "anchor_block": 3,
        "header": ["masculine", "feminine", "meaning"],
        "rows": [["grovel", "grovela", "tall"],
                 ["smalel", "smalela", "small"],
                 ["veterel", "veterela", "old"]],
    },
    {
        "table_id": "question-patterns",
        "anchor_block": 7,
        "header": ["statement", "question", "pattern"],
        "rows": [["Do mira lopt haut.", "Lopt do mira haut?", "yes-no inversion"],
                 ["Don brin sift do sela.", "Sift don brin do sela?",
                  "yes-no inversion"]],
    },
]


def book_interchange() -> dict:
    pages = [0, 0, 0, 1, 1, 1, 2, 2, 3, 3, 3, 4]
    return {
        "doc_id": "mini-grammar-v1",
        "metadata": {"title": "A Short Reference Grammar",
                     "language": "constructed",
                     "source": "fixtures"},
        "blocks": [{"page": pages[i], "font_size": size, "text": text}
                   for i, (size, text) in enumerate(BOOK_BLOCKS)],
        "tables": BOOK_TABLES,
    }


# --- phenomena: descriptions, extraction markers, pair banks, corruptions ---

PHENOMENA: dict[str, dict] = {
    "case-articles": {
        "description": ("The masculine singular article changes with case: do "
                        "marks the subject, don the direct object, and dom the "
                        "indirect object, so the article rather than the noun "
                        "shows the grammatical role."),
        "window_marker": "don the direct object",
    },
    "plural-en": {
        "description": ("Nouns form their plural by adding the suffix -en to "
                        "the stem, and every plural noun takes the invariant "
                        "article dei regardless of case."),
        "window_marker": "plural with the ending -en",
    },
    "adjective-agreement": {
        "description": ("Attributive adjectives agree with the noun's gender: "
                        "the ending -el marks masculine agreement and -ela "
                        "marks feminine agreement."),
        "row_marker": ("grovel", "smalel", "veterel"),
    },
    "possessive-sen": {
        "description": ("Possession is expressed by placing the particle sen "
                        "directly after the possessor noun phrase, before the "
                        "possessed noun."),
        "window_marker": "particle sen after the possessor",
    },
    "verb-second": {
        "description": ("In main clauses the conjugated verb occupies second "
                        "position; when another constituent opens the clause, "
                        "the subject moves to directly after the verb."),
        "window_marker": "verb in second position",
    },
    "negation-nix": {
        "description": ("Sentence negation is expressed with the particle nix "
                        "placed immediately after the conjugated verb."),
        "window_marker": "particle nix",
    },
    "question-inversion": {
        "description": ("Yes-no questions are formed by inverting subject and "
                        "verb, moving the conjugated verb to the front of the "
                        "clause."),
        "row_marker": ("yes-no inversion",),
    },
    "subordinate-final": {
        "description": ("Subordinate clauses introduced by wan move the "
                        "conjugated verb to clause-final position."),
        "window_marker": "places its verb at the very end",
    },
}

# (english, constructed-language) pairs per phenomenon; None marks a
# deliberately malformed generation item exercising partial salvage.
PAIR_BANKS: dict[str, list] = {
    "case-articles": [
        ("The farmer gives the dog a fresh bone every morning before the "
         "children come down into the garden.",
         "All muergen gelt do fiskar dom mira en frisken knok."),
        ("Yesterday the child saw the tall house at the end of the quiet "
         "street and asked about it.",
         "Gesten sift do brin don grovel tovan am enn."),
        ("The old cat knows the farmer well because he holds the gate open "
         "for her every single evening.",
         "Da veterela sela kenat don fiskar gut."),
        ("Our neighbor shows the book to the child whenever the long winter "
         "evenings make the house feel quiet.",
         "Do noper weist dom brin don lumo."),
    ],
    "plural-en": [
        ("The dogs run across the field while two cats watch them calmly "
         "from the warm stone wall.",
         "Dei miraen lafen iwer don kemp an dei selaen kucken."),
        ("In autumn the children gather the books and carry them from the "
         "small houses to the school hall.",
         "Am hierscht sammelen dei brinen dei lumoen an droen se."),
        ("The farmers keep their gardens tidy because the neighbors often "
         "walk past and admire the flowers there.",
         "Dei fiskaren halen dei velten prop well dei noperen ofta kucken."),
        ("Old houses along the river need new roofs before the heavy rains "
         "of late autumn arrive again.",
         "Dei veterela tovanen beim floss brauchen nei diecher."),
    ],
    "adjective-agreement": [
        ("The tall dog sleeps beside the door while the small cat climbs "
         "quietly onto the sunny window ledge.",
         "Do grovel mira dramt bei der dier an da smalela sela klimmt."),
        ("An old farmer still visits the tall house although the path up the "
         "hill grows steeper every year.",
         "En veterel fiskar besicht don grovel tovan all joer."),
        ("The small child carries an old book through the garden and reads "
         "it under the tall tree.",
         "Do smalel brin dreit en veterel lumo duerch don velt."),
        ("A tall woman and her small daughter feed the old cat that waits "
         "patiently beside the kitchen door.",
         "Da grovela fra an da smalela duechter fidderen da veterela sela."),
    ],
    "possessive-sen": [
        ("The child's book lies open on the table where the evening light "
         "falls across the written pages.",
         "Do brin sen lumo läit op der dësch."),
        ("The farmer's dog guards the garden gate at night and barks "
         "whenever a stranger comes too near.",
         "Do fiskar sen mira waacht nuets don velt."),
        ("Every visitor admires the neighbor's garden because the roses "
         "bloom there from early spring until late autumn.",
         "All gaascht bewonnert do noper sen velt."),
        ("The cat's bowl stands empty beside the door because the children "
         "forgot to fill it this morning.",
         None),
    ],
    "verb-second": [
        ("Today the dog runs through the garden before breakfast, and "
         "afterwards it sleeps on the warm doorstep.",
         "Haut lopt do mira duerch don velt."),
        ("Yesterday the child read the whole book in the garden although "
         "the wind was cold and sharp.",
         "Gesten lies do brin don ganzen lumo am velt."),
        ("Often the cat sees the farmer at dawn.",
         "Ofta sift da sela don fiskar moies."),
        ("Slowly the old farmer walks across the field because his knees "
         "ache after the long day's work.",
         "Lues leeft do veterel fiskar iwer don kemp."),
    ],
    "negation-nix": [
        ("The dog does not run today because the rain has turned the whole "
         "garden into heavy mud.",
         "Do mira lopt nix haut well et reent."),
        ("The child does not know the answer, so she asks her grandmother "
         "about the strange old word.",
         "Do brin kenat nix da äntwert."),
        ("The old cat does not sleep inside anymore because the summer "
         "nights stay warm until the early morning.",
         "Da veterela sela dramt nix dobannen."),
        ("The farmer does not give the dogs their food before he has closed "
         "the heavy wooden gate.",
         "Do fiskar gelt nix dei miraen hir fudder."),
    ],
    "question-inversion": [
        ("Does the dog run through the garden every morning, or does it "
         "stay beside the warm kitchen door?",
         "Lopt do mira all muergen duerch don velt?"),
        ("Did the child see the old book on the table, or had someone "
         "already carried it away?",
         "Sift do brin don veterel lumo op der dësch?"),
        ("Does the farmer know the neighbor who moved last week into the "
         "tall house beside the river?",
         "Kenat do fiskar don noper beim floss?"),
        ("Does the cat sleep in the garden during summer, or does it prefer "
         "the cool cellar stairs?",
         "Dramt da sela am velt am summer?"),
    ],
    "subordinate-final": [
        ("When the dog runs slowly, the old farmer worries about it and "
         "calls the village veterinarian quickly.",
         "Wan do mira lues lopt, suergt do veterel fiskar."),
        ("When the child sees the tall house, she remembers the long summer "
         "visits at her grandmother's table.",
         "Wan do brin don grovel tovan sift, denkt se un summer."),
        ("When the cats sleep in the warm kitchen, the whole house stays "
         "calm until the late afternoon.",
         "Wan dei selaen an der kichen dramen, bleift do tovan roueg."),
        ("When the farmer closes the gate at night, the dogs gather near "
         "the barn and wait patiently.",
         "Wan do fiskar nuets d'paart zoumaacht, sammelen dei miraen."),
    ],
}

# Back-check rejects: these sentences get instantiates_rule = false.
BACKCHECK_REJECTS = {
    "Am hierscht sammelen dei brinen dei lumoen an droen se.",
    "Do fiskar gelt nix dei miraen hir fudder.",
}

# Forging this sentence echoes it unchanged, exercising DegenerateContrast.
FORGE_DEGENERATE = "En veterel fiskar besicht don grovel tovan all joer."

# Recorded personas: probability of answering a task with the key, and of
# producing an unparseable reply instead of any answer.
PERSONAS = {
    "lorelei-mini": {"skill": 0.55, "unparseable": 0.08, "noise": 0.80},
    "lorelei-midi": {"skill": 0.75, "unparseable": 0.04, "noise": 0.40},
    "lorelei-maxi": {"skill": 0.90, "unparseable": 0.00, "noise": 0.25},
}
DEFAULT_PERSONA = {"skill": 0.65, "unparseable": 0.05, "noise": 0.50}

_PLURALS = [("miraen", "mira"), ("selaen", "sela"), ("lumoen", "lumo"),
            ("brinen", "brin"), ("fiskaren", "fiskar"), ("velten", "velt"),
            ("tovanen", "tovan"), ("noperen", "noper")]
_ADJ = re.compile(r"\b(grovel|smalel|veterel)(a?)\b")


def _recase_swap_first(words: list[str]) -> list[str]:
    words = list(words)
    words[0], words[1] = words[1], words[0]
    words[0] = words[0][0].upper() + words[0][1:]
    words[1] = words[1][0].lower() + words[1][1:]
    return words


def corrupt(phenomenon: str, sentence: str) -> tuple[str, str]:
    """Deterministic grammar-breaking edit for one phenomenon."""
    if phenomenon == "case-articles":
        for wrong, right in ((" don ", " do "), (" dom ", " do ")):
            if wrong in sentence:
                return (sentence.replace(wrong, right, 1),
                        "replaced the object-case article with the subject form")
    if phenomenon == "plural-en":
        for plural, singular in _PLURALS:
            if plural in sentence:
                return (sentence.replace(plural, singular, 1),
                        "removed the plural suffix while keeping the plural article")
    if phenomenon == "adjective-agreement":
        m = _ADJ.search(sentence)
        if m:
            flipped = m.group(1) if m.group(2) else m.group(1) + "a"
            return (sentence[:m.start()] + flipped + sentence[m.end():],
                    "flipped the adjective gender agreement suffix")
    if phenomenon == "possessive-sen" and " sen " in sentence:
        return (sentence.replace(" sen ", " ", 1),
                "dropped the possessive particle")
    if phenomenon == "verb-second":
        words = sentence.split()
        return (" ".join(_recase_swap_first(words)),
                "moved the verb in front of the opening adverb")
    if phenomenon == "negation-nix":
        words = sentence.split()
        if "nix" in words:
            i = words.index("nix")
            words[i - 1], words[i] = words[i], words[i - 1]
            return " ".join(words), "moved the negation particle in front of the verb"
    if phenomenon == "question-inversion":
        words = sentence.split()
        # Lopt do mira ...? -> Do mira lopt ...?
        verb = words[0]
        rest = words[1:]
        out = [rest[0][0].upper() + rest[0][1:], rest[1], verb.lower()] + rest[2:]
        return " ".join(out), "removed the subject-verb inversion from the question"
    if phenomenon == "subordinate-final":
        clause, _, tail = sentence.partition(",")
        words = clause.split()
        verb = words.pop()
        words.insert(3, verb)
        return (" ".join(words) + "," + tail,
                "moved the subordinate verb away from clause-final position")
    # fallback: swap the first two words (always a change for 2+ words)
    words = sentence.split()
    if len(words) >= 2:
        return " ".join(_recase_swap_first(words)), "swapped the first two words"
    return sentence + " zut", "appended a stray word"


def _fenced(payload) -> str:
    return "```json\n" + json.dumps(payload, ensure_ascii=False, indent=1) + "\n```"


def _unit(seed_label: str, *parts: str) -> float:
    """Uniform [0,1) derived from content, independent of call order."""
    return DetRng(derive_seed(0, seed_label, *parts)).random()


class FixtureSynthesizer(Provider):
    """Answers every fixture-pipeline prompt deterministically.

    Dispatch is on the request's purpose tag. Task answering emulates models
    of graded skill via the harness side channel; everything else is derived
    from the phenomenon data above.
    """

    name = "fixture"

    def complete(self, req: LlmRequest, side: dict | None = None) -> Completion:
        self.calls += 1
        handler = getattr(self, f"_{req.purpose}", None)
        if handler is None:
            raise ScriptExhausted(f"no fixture handler for purpose {req.purpose!r}")
        return Completion(text=handler(req, side or {}), usage={})

    # --- extraction ---

    def _extract(self, req: LlmRequest, side: dict) -> str:
        prompt = req.messages[-1][1]
        found = []
        if "\nRow:" in prompt:
            row_line = next(line for line in prompt.splitlines()
                            if line.startswith("Row:"))
            for pid, phen in PHENOMENA.items():
                markers = phen.get("row_marker", ())
                if any(m in row_line for m in markers):
                    found.append(pid)
        else:
            for pid, phen in PHENOMENA.items():
                marker = phen.get("window_marker")
                if marker and marker in prompt:
                    found.append(pid)
        items = [{"description": PHENOMENA[pid]["description"], "tags": [pid]}
                 for pid in found]
        return "Here are the grammar points I can identify.\n" + _fenced(items)

    def _phenomenon_for(self, prompt: str) -> str:
        for pid, phen in PHENOMENA.items():
            if phen["description"] in prompt:
                return pid
        raise ScriptExhausted("prompt names no known fixture grammar point")

    # --- pair generation ---

    def _generate(self, req: LlmRequest, side: dict) -> str:
        pid = self._phenomenon_for(req.messages[-1][1])
        items = []
        for english, lux in PAIR_BANKS[pid]:
            if lux is None:
                items.append({"english": english})
            else:
                items.append({"english": english, "luxembourgish": lux})
        return _fenced(items)

    # --- back-check ---

    def _backcheck(self, req: LlmRequest, side: dict) -> str:
        prompt = req.messages[-1][1]
        sentence = ""
        for line in prompt.splitlines():
            if line.startswith("Luxembourgish sentence:"):
                sentence = line.split(":", 1)[1].strip()
        if sentence in BACKCHECK_REJECTS:
            verdict = {"instantiates_rule": False, "translation_score": 6.0,
                       "rationale": "the sentence does not realize the "
                                    "targeted construction"}
        else:
            score = 7.0 + (int(content_hash(sentence)[:8], 16) % 30) / 10.0
            verdict = {"instantiates_rule": True, "translation_score": score,
                       "rationale": "construction present; translation adequate"}
        return _fenced(verdict)

    # --- minimal-pair forging ---

    def _forge(self, req: LlmRequest, side: dict) -> str:
        prompt = req.messages[-1][1]
        sentence = ""
        for line in prompt.splitlines():
            if line.startswith("Grammatical sentence:"):
                sentence = line.split(":", 1)[1].strip()
        if sentence == FORGE_DEGENERATE:
            return _fenced({"incorrect": sentence,
                            "edit_summary": "no change was possible"})
        pid = self._phenomenon_for(prompt)
        incorrect, summary = corrupt(pid, sentence)
        return _fenced({"incorrect": incorrect, "edit_summary": summary})

    # --- task answering ---

    def _task(self, req: LlmRequest, side: dict) -> str:
        if "key" not in side:
            raise ScriptExhausted("fixture task answering needs the side channel")
        persona = PERSONAS.get(req.model_id, DEFAULT_PERSONA)
        prompt = req.messages[-1][1]
        marker = side.get("instance_id", "")
        if _unit("unparseable", req.model_id, marker, prompt) < persona["unparseable"]:
            return "Deux sentenca sembran equal bon. Net kloer."
        key = sorted(side["key"])
        labels = list(side["labels"])
        if _unit("skill", req.model_id, marker, prompt) >= persona["skill"]:
            rng = DetRng(derive_seed(1, "wrong", req.model_id, marker, prompt))
            while True:
                wrong = sorted(rng.sample(labels, len(key)))
                if wrong != key:
                    break
            key = wrong
        return "Considerat la structura.\nANSWER: " + ", ".join(key)

    # --- translation ---

    def _translate(self, req: LlmRequest, side: dict) -> str:
        prompt = req.messages[-1][1]
        english = prompt.strip().splitlines()[-1].strip()
        reference = None
        for bank in PAIR_BANKS.values():
            for en, lux in bank:
                if en == english and lux is not None:
                    reference = lux
        if reference is None:
            return "Zut nela kompren."
        persona = PERSONAS.get(req.model_id, DEFAULT_PERSONA)
        if _unit("clean", req.model_id, english) >= persona["noise"]:
            return reference
        rng = DetRng(derive_seed(2, "corrupt", req.model_id, english))
        words = reference.split()
        ops = 2 if persona["noise"] >= 0.8 else 1
        for _ in range(ops):
            if len(words) < 3:
                break
            op = rng.below(4)
            i = rng.below(len(words) - 1)
            if op == 0:
                words.pop(i)
            elif op == 1:
                words[i], words[i + 1] = words[i + 1], words[i]
            elif op == 2:
                words.insert(i, words[i])
            else:
                words[i] = "zut"
        return " ".join(words)

    # --- judging ---

    def _judge(self, req: LlmRequest, side: dict) -> str:
        prompt = req.messages[-1][1]
        hyp = ref = ""
        for line in prompt.splitlines():
            if line.startswith("Candidate translation:"):
                hyp = line.split(":", 1)[1].strip()
            elif line.startswith("Reference translation:"):
                ref = line.split(":", 1)[1].strip()
        hyp_tokens, ref_tokens = hyp.split(), ref.split()
        if not hyp_tokens or not ref_tokens:
            return _fenced({"score": 0.0, "rationale": "empty candidate"})
        common = len(set(hyp_tokens) & set(ref_tokens))
        f = 2 * common / (len(set(hyp_tokens)) + len(set(ref_tokens)))
        score = round(10.0 * f, 1)
        return _fenced({"score": score, "rationale": "token overlap judgment"})
