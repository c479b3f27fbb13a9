#!/usr/bin/env python3
"""Regenerates the JSON-lines fixtures in this directory.

conversations.jsonl  15 conversations with rewrites, answers and answer URLs
passages.jsonl       200 passages: one gold passage per answered turn plus
                     distractors sharing the follow-up questions' wording
docs.jsonl           document context for a subset of the conversations
selector_turns.jsonl 20 hand-built turns with explicit gold_cg lists
echo_adapter.jsonl   canned adapter responses for protocol tests
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
rng = random.Random(20240521)

# (conversation_id, [(question, rewrite, answer, gold passage text)])
CONVERSATIONS = [
    ("messi", [
        ("how old is Messi?", "how old is Messi?", "36 years",
         "Lionel Messi is 36 years old. Messi was raised in Rosario, Argentina."),
        ("which position does he play?", "which position does Messi play?", "a forward",
         "Messi plays as a forward for Inter Miami, a position suited to his dribbling."),
    ]),
    ("physician-assistant", [
        ("What does a physician assistant do?", "What does a physician assistant do?", "medical care",
         "A physician assistant provides medical care under the supervision of a doctor."),
        ("What's the average starting salary in the UK?",
         "What's the average starting salary for a physician assistant in the UK?", "30,000 pounds",
         "In the UK the average starting salary for a physician assistant is 30,000 pounds."),
        ("What about in the US?",
         "What's the average starting salary for a physician assistant in the US?", "90,000 dollars",
         "In the US, unlike the UK, the average starting salary is 90,000 dollars for a physician assistant."),
    ]),
    ("rick-barry", [
        ("Who is Rick Barry?", "Who is Rick Barry?", "a retired American basketball forward",
         "Rick Barry is a retired American basketball forward."),
        ("where did he come from?", "where did Rick Barry come from?", "Elizabeth",
         "Rick Barry did come from Elizabeth, where he grew up playing basketball."),
    ]),
    ("camus", [
        ("What did he write?", "What did Albert Camus write?", "The Stranger",
         "Albert Camus wrote The Stranger."),
        ("When did he win the Nobel Prize?", "When did Albert Camus win the Nobel Prize?", "1957",
         "Camus won the Nobel Prize in 1957 for his essays."),
    ]),
    ("eiffel", [
        ("When was the Eiffel Tower built?", "When was the Eiffel Tower built?", "1889",
         "The Eiffel Tower was built in 1889 for the World Fair."),
        ("How tall is it?", "How tall is the Eiffel Tower?", "330 metres",
         "The Eiffel Tower is 330 metres tall."),
    ]),
    ("curie", [
        ("Who was Marie Curie?", "Who was Marie Curie?", "a Polish physicist",
         "Marie Curie was a Polish physicist and chemist. She did research on radioactivity."),
        ("What did she discover?", "What did Marie Curie discover?", "polonium",
         "Marie Curie did discover polonium and radium with Pierre Curie."),
        ("What did she win in 1911?", "What did Marie Curie win in 1911?", "the Nobel Prize",
         "In 1911 Marie Curie won the Nobel Prize in Chemistry."),
    ]),
    ("amazon", [
        ("How long is the Amazon River?", "How long is the Amazon River?", "6,400 kilometres",
         "The Amazon River is 6,400 kilometres long."),
        ("Where does it begin?", "Where does the Amazon River begin?", "the Andes",
         "The Amazon River does begin in the Andes."),
    ]),
    ("python", [
        ("Who created the Python language?", "Who created the Python language?", "Guido van Rossum",
         "The Python language was created by Guido van Rossum."),
        ("When was it released?", "When was the Python language released?", "1991",
         "The Python language was released in 1991."),
    ]),
    ("beatles", [
        ("Who were the Beatles?", "Who were the Beatles?", "a rock band",
         "The Beatles were a rock band."),
        ("Which city were they from?", "Which city were the Beatles from?", "Liverpool",
         "The Beatles came from the city of Liverpool. Liverpool still honours the rock group."),
    ]),
    ("everest", [
        ("How high is Mount Everest?", "How high is Mount Everest?", "8,849 metres",
         "Mount Everest is 8,849 metres high."),
        ("Who climbed it first?", "Who climbed Mount Everest first?", "Edmund Hillary",
         "Mount Everest was first climbed by Edmund Hillary and Tenzing Norgay in 1953."),
    ]),
    ("tesla", [
        ("Who founded Tesla Motors?", "Who founded Tesla Motors?", "Martin Eberhard",
         "Tesla Motors was founded by Martin Eberhard and Marc Tarpenning."),
        ("Where is its headquarters?", "Where is the headquarters of Tesla Motors?", "Austin",
         "The headquarters of Tesla Motors is in Austin, Texas."),
    ]),
    ("great-wall", [
        ("Where is the Great Wall located?", "Where is the Great Wall located?", "China",
         "The Great Wall is located in China."),
        ("How long is it?", "How long is the Great Wall?", "21,196 kilometres",
         "The Great Wall is 21,196 kilometres long."),
    ]),
    ("shakespeare", [
        ("When was William Shakespeare born?", "When was William Shakespeare born?", "1564",
         "William Shakespeare was born in 1564 in Stratford."),
        ("What was his first play?", "What was the first play of William Shakespeare?", "Henry VI",
         "The first play of William Shakespeare was probably Henry VI."),
    ]),
    ("nile", [
        ("How long is the Nile?", "How long is the Nile?", "6,650 kilometres",
         "The Nile is 6,650 kilometres long."),
        ("Which sea does it flow into?", "Which sea does the Nile flow into?", "the Mediterranean Sea",
         "The Nile runs into the Mediterranean Sea."),
    ]),
    ("serena", [
        ("How many titles has Serena Williams won?", "How many titles has Serena Williams won?",
         "23 Grand Slam singles titles",
         "Serena Williams has won 23 Grand Slam singles titles."),
        ("Who was her coach?", "Who was the coach of Serena Williams?", "Patrick Mouratoglou",
         "The coach of Serena Williams was Patrick Mouratoglou, a coach from France."),
    ]),
]

# Follow-up gold passages restate what earlier turns established, as
# passages about the same subject tend to do.
RECAPS = {
    ("messi", 1): "He is 36 years old.",
    ("physician-assistant", 1): "The job involves medical care.",
    ("physician-assistant", 2): "The job involves medical care. The UK pays 30,000 pounds.",
    ("rick-barry", 1): "He was a retired American basketball forward.",
    ("camus", 1): "He wrote The Stranger.",
    ("eiffel", 1): "It was built in 1889.",
    ("curie", 1): "A Polish physicist and chemist, she did research on radioactivity.",
    ("curie", 2): "A Polish physicist and chemist, she did research on radioactivity and discovered polonium.",
    ("amazon", 1): "It is 6,400 kilometres long.",
    ("python", 1): "It was created by Guido van Rossum.",
    ("everest", 1): "It is 8,849 metres high.",
    ("tesla", 1): "It was founded by Martin Eberhard.",
    ("great-wall", 1): "It is located in China.",
    ("shakespeare", 1): "He was born in 1564.",
    ("nile", 1): "It is 6,650 kilometres long.",
    ("serena", 1): "She has won 23 Grand Slam singles titles.",
}

DOCS = {
    "camus": ("Albert Camus", "Albert Camus was a French philosopher, author and journalist."),
    "rick-barry": ("Rick Barry", "Richard Francis Dennis Barry III is an American former basketball player."),
    "eiffel": ("Eiffel Tower", "The Eiffel Tower is a wrought-iron lattice tower in Paris."),
    "curie": ("Marie Curie", "Marie Curie was a physicist and chemist who conducted research on radioactivity."),
    "beatles": ("The Beatles", "The Beatles were an English rock band formed in Liverpool in 1960."),
}

FIRST = ["Carlos", "Marco", "Diego", "Luis", "Paulo", "Sergio", "Andre", "Hugo", "Ivan", "Pedro",
         "Rafael", "Tomas", "Bruno", "Mateo", "Felipe", "Nico", "Oscar", "Raul", "Dario", "Emil",
         "Jonas", "Karim", "Lucas", "Milan", "Omar", "Rui", "Sami", "Teo", "Victor", "Yann"]
LAST = ["Alvarez", "Benitez", "Castro", "Duarte", "Esteban", "Ferreira", "Gomez", "Herrera",
        "Ibarra", "Jimenez", "Lozano", "Moreno", "Navarro", "Ortega", "Pardo", "Quintero", "Romero",
        "Salazar", "Torres", "Urrutia", "Vargas", "Zamora", "Aguilar", "Bravo", "Cortes", "Delgado",
        "Espinoza", "Fuentes", "Guerrero", "Iglesias"]
CLUBS = ["Porto", "Sevilla", "Napoli", "Ajax", "Lyon", "Celtic", "Benfica", "Valencia", "Roma",
         "Monaco"]
ROLES = ["defender", "midfielder", "winger", "goalkeeper", "striker", "sweeper"]


def distractors():
    out = []
    # Each family shares the wording of an anaphoric follow-up, never the
    # entity it refers to.
    for i in range(30):
        name = f"{FIRST[i]} {LAST[i]}"
        club = CLUBS[i % len(CLUBS)]
        role = ROLES[i % len(ROLES)]
        out.append(f"{name} signed for {club} in {2001 + i % 20}. "
                   f"He began to play as a {role}, a position he still holds.")
    for i in range(10):
        out.append(f"Tower {i + 1} of the harbour is {120 + 15 * i} metres tall. It is taller than the old "
                   f"lighthouse by {i + 2} metres.")
    for i in range(10):
        out.append(f"The {LAST[i]} River is {800 + 97 * i} kilometres long. It is long enough to cross "
                   f"{i + 2} provinces.")
    for i in range(8):
        out.append(f"{FIRST[i]} {LAST[i + 10]} wrote poems. Later he wrote essays and won the "
                   f"{LAST[i + 5]} Prize.")
    for i in range(8):
        out.append(f"{FIRST[i + 10]} {LAST[i]} studied chemistry. She did discover a new enzyme in {1950 + i}.")
    for i in range(6):
        out.append(f"The {LAST[i + 3]} Company was founded in {1990 + i}. Its headquarters is in {CLUBS[i]}.")
    for i in range(6):
        out.append(f"The {LAST[i + 8]} Ensemble released records. Their first album was called "
                   f"Morning {i + 1}.")
    for i in range(6):
        out.append(f"Mount {LAST[i + 12]} was climbed in {1930 + i}. A team led by {FIRST[i + 3]} "
                   f"{LAST[i + 2]} climbed it first.")
    for i in range(6):
        out.append(f"The {LAST[i + 15]} scripting language was released in {1995 + i}. It was released "
                   f"to the public under a free licence.")
    for i in range(6):
        out.append(f"{FIRST[i + 5]} {LAST[i + 7]} trained hard. Her coach was {FIRST[i + 15]} {LAST[i + 20]}.")
    for i in range(6):
        out.append(f"The {LAST[i + 2]} Canal flows into the {CLUBS[i]} Sea.")
    for i in range(6):
        out.append(f"{FIRST[i + 20]} {LAST[i + 1]} is a tennis player. In {2000 + i} she did win the "
                   f"{LAST[i + 9]} Cup.")
    for i in range(6):
        out.append(f"The {LAST[i + 20]} pipeline begins in the desert. It begins near {CLUBS[i + 2]}.")
    for i in range(6):
        out.append(f"The salary of a nurse in {CLUBS[i]} is modest. What about in the city? "
                   f"Salaries vary by {LAST[i]} district.")
    topics = ["bread", "coffee", "glaciers", "volcanoes", "bridges", "owls", "tides", "copper",
              "orchards", "lighthouses", "satellites", "glass", "silk", "tulips", "deserts"]
    for i in range(50):
        t = topics[i % len(topics)]
        out.append(f"Notes on {t}, part {i // len(topics) + 1}: {t} were studied by {FIRST[i % 30]} {LAST[(i * 7) % 30]} "
                   f"across {3 + i} regions over {10 + i} years.")
    return out


def main():
    turns = []
    passages = []
    for conv_id, conv_turns in CONVERSATIONS:
        doc = DOCS.get(conv_id)
        for n, (question, rewrite, answer, passage) in enumerate(conv_turns):
            url = f"https://example.org/{conv_id}/{n}"
            turns.append({
                "conversation_id": conv_id,
                "turn_no": n,
                "question": question,
                "rewrite": rewrite,
                "answer": answer,
                "answer_source": url,
            })
            if (conv_id, n) in RECAPS:
                passage = f"{passage} {RECAPS[(conv_id, n)]}"
            passages.append({"passage_id": f"g-{conv_id}-{n}", "text": passage, "source_url": url})

    pool = distractors()
    rng.shuffle(pool)
    needed = 200 - len(passages)
    assert len(pool) >= needed, (len(pool), needed)
    for i, text in enumerate(pool[:needed]):
        passages.append({"passage_id": f"d-{i:03d}", "text": text,
                         "source_url": f"https://example.org/other/{i}"})
    assert len(passages) == 200

    write(HERE / "conversations.jsonl", turns)
    write(HERE / "passages.jsonl", passages)
    write(HERE / "docs.jsonl", [
        {"conversation_id": cid, "doc_title": t, "doc_first_sentence": s} for cid, (t, s) in DOCS.items()
    ])
    write(HERE / "selector_turns.jsonl", selector_turns())
    write(HERE / "echo_adapter.jsonl", echo_fixtures())


def selector_turns():
    # 20 turns over 5 conversations; answers exercise case, punctuation,
    # plural mismatches and words hidden inside longer words.
    selector_rows = [
        ("s1", [
            ("how old is Messi?", ["Messi"], "Messi is 36."),
            ("which position does he play?", ["position", "Messi"], "Messi plays as a forward."),
            ("does he play in the MLS?", ["the MLS"], "Yes, Messi joined the MLS in 2023."),
            ("how many goals has he scored?", ["goals"], "He has scored over 800 goals."),
        ]),
        ("s2", [
            ("What does a physician assistant do?", ["a physician assistant"],
             "A physician assistant practices medicine."),
            ("What's the average starting salary in the UK?",
             ["the average starting salary", "a physician assistant", "the UK"],
             "In the UK the average is £30,000"),
            ("What about in the US?", ["the average starting salary", "a physician assistant", "the US"],
             "The average starting salary of A PHYSICIAN ASSISTANT in the US is $90,000."),
            ("Is that higher than nurses?", ["nurses"], "Nurses earn less; the US average differs."),
        ]),
        ("s3", [
            ("Who is Rick Barry?", ["Rick Barry"], "Rick Barry is a former basketball player."),
            ("What was his free-throw percentage?", ["free-throw percentage", "Rick Barry"],
             "His free-throw percentage was 90%."),
            ("Did he play in the ABA?", ["the ABA", "Rick Barry"], "Yes, Barry played in the ABA."),
            ("where did he come from?", ["Rick Barry"], "He came from New Jersey."),
        ]),
        ("s4", [
            ("Where is the Eiffel Tower?", ["the Eiffel Tower"], "The Eiffel Tower is in Paris."),
            ("How tall is the tower?", ["the tower"], "It is 330 metres; towers nearby are shorter."),
            ("Who designed it?", ["the Eiffel Tower"], "Gustave Eiffel's company designed the tower."),
            ("When was Paris founded?", ["Paris"], "Parisian history begins in the 3rd century BC."),
        ]),
        ("s5", [
            ("What are position sensors?", ["position sensors"], "Position sensors measure positions."),
            ("Are flows bidirectional?", ["flows"], "Flows are bidirectional in that position sensor."),
            ("How do position sensors fail?", ["position sensors"], ""),
            ("Which sensors are cheapest?", ["sensors"], "Hall sensors, like position sensors, are cheap."),
        ]),
    ]
    out = []
    for cid, rows in selector_rows:
        for n, (q, cg, a) in enumerate(rows):
            out.append({"conversation_id": cid, "turn_no": n, "question": q, "answer": a, "gold_cg": cg})
    assert len(out) == 20
    return out


def echo_fixtures():
    return [
        {"task": "generate_cg",
         "payload": {"doc": None, "history": [], "question": "how old is Messi?"},
         "response": {"propositions": ["Messi"]}},
        {"task": "classify",
         "payload": {"proposition": "Messi", "question": "how old is Messi?", "context_digest": "Messi"},
         "response": {"label": 1, "score": 0.97}},
        {"task": "rewrite",
         "payload": {"doc": None, "history": [{"question": "how old is Messi?", "answer": "36 years"}],
                     "question": "which position does he play?"},
         "response": {"rewrite": "which position does Messi play?"}},
        {"task": "summarize",
         "payload": {"doc": None, "history": [{"question": "how old is Messi?", "answer": "36 years"}]},
         "response": {"summary": "Messi is 36 years old."}},
        {"task": "read",
         "payload": {"passage_id": "p1", "passage": "Messi plays as a forward for Inter Miami.",
                     "reader_query": "which position does Messi play?"},
         "response": {"spans": [{"text": "a forward", "begin": 15, "end": 24, "score": 7.5}]}},
        {"task": "annotate", "payload": {"text": "slow"}, "delay_ms": 400,
         "response": {"tokens": [], "chunks": []}},
        {"task": "classify",
         "payload": {"proposition": "broken", "question": "?", "context_digest": "broken"},
         "error": "model crashed"},
    ]


def write(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
