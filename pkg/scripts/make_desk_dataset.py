#!/usr/bin/env python3
"""Build the bundled desk-scale topic corpus.

Four news-style topics (world, sports, business, scitech). Documents are a
short headline plus two or three sentences drawn from per-topic templates.
A sizeable share of headlines and sentences are borrowed from a different
topic or are topic-neutral filler, so that a classifier
trained on 100 examples per class is well short of perfect.

Usage:
    python scripts/make_desk_dataset.py [--out DIR] [--seed N]
"""
import argparse
import json
import random
from pathlib import Path

PEOPLE = [
    "Maria Lopez", "John Carter", "Aiko Tanaka", "Pierre Dubois", "Amara Okafor",
    "Lena Fischer", "Rahul Mehta", "Sofia Rossi", "Omar Haddad", "Chen Wei",
    "Hannah Berg", "Diego Alvarez", "Fatima Noor", "Ivan Petrov", "Grace Kim",
    "Lucas Silva", "Nora Quinn", "Tomas Novak", "Yusuf Demir", "Elena Vargas",
]
PLACES = [
    "Geneva", "Nairobi", "Lima", "Seoul", "Cairo", "Oslo", "Manila", "Warsaw",
    "Toronto", "Madrid", "Jakarta", "Dublin", "Hanoi", "Santiago", "Accra",
    "Athens", "Kyiv", "Bogota", "Lisbon", "Riga", "Tunis", "Quito", "Perth",
]
DAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]
GENERIC = [
    "officials", "analysts", "observers", "sources", "experts", "critics",
    "supporters", "residents", "reporters", "leaders",
]
GENERIC_VERBS = ["said", "warned", "noted", "argued", "confirmed", "suggested", "claimed"]
FILLER = [
    "on {day}", "late on {day}", "earlier this week", "after weeks of talks",
    "despite the weather", "according to {generic}", "in a brief statement",
    "for the second time this year", "amid growing uncertainty",
]

TOPICS = {
    "world": {
        "nouns": [
            "ceasefire", "election", "parliament", "embassy", "refugees", "treaty",
            "sanctions", "border", "protest", "minister", "rebels", "summit",
            "ballot", "coalition", "diplomats", "troops", "envoy", "referendum",
            "asylum", "militia", "cabinet", "opposition", "constitution", "peacekeepers",
            "insurgents", "hostages", "delegation", "humanitarian aid", "curfew", "amnesty",
        ],
        "verbs": [
            "condemned", "negotiated", "rejected", "signed", "postponed", "denounced",
            "mediated", "vetoed", "ratified", "suspended", "welcomed", "expelled",
        ],
        "actors": [
            "the prime minister", "the foreign ministry", "the president", "the united nations",
            "the ruling party", "rebel commanders", "the defence minister", "the election commission",
        ],
        "templates": [
            "{actor} {verb} the {noun} in {place} {filler}.",
            "{person} {gverb} the {noun} could reshape politics across the region.",
            "Thousands gathered in {place} as the {noun} dragged into a {ord} day.",
            "{actor} {verb} a deal on the {noun} with neighbouring {place2}.",
            "The {noun} in {place} left {num} people displaced {filler}.",
            "{generic} in {place} fear the {noun} will deepen the crisis.",
            "Talks over the {noun} resumed in {place} under heavy security.",
        ],
        "headlines": [
            "{place} {noun} talks stall", "{actor_t} {verb} {noun}",
            "Tensions rise over {noun} in {place}", "{place} votes amid {noun} dispute",
        ],
    },
    "sports": {
        "nouns": [
            "championship", "striker", "goalkeeper", "semifinal", "playoffs", "marathon",
            "tournament", "coach", "penalty", "league title", "stadium", "season opener",
            "medal", "relay", "overtime", "quarterback", "midfielder", "derby",
            "grand slam", "world cup", "injury", "transfer", "hat trick", "comeback",
            "pitcher", "rookie", "sprint", "knockout round", "captain", "free kick",
        ],
        "verbs": [
            "won", "clinched", "defeated", "drew", "scored", "edged", "thrashed",
            "retained", "lost", "rallied past", "eliminated", "outplayed",
        ],
        "actors": [
            "the home side", "the defending champions", "the national team", "the visitors",
            "the underdogs", "the league leaders", "the young squad", "the veteran coach",
        ],
        "templates": [
            "{actor} {verb} the {noun} in {place} {filler}.",
            "{person} scored twice as {actor} {verb} their rivals {score}.",
            "The {noun} in {place} drew a crowd of {num} fans {filler}.",
            "{person} {gverb} the {noun} was the toughest of the season.",
            "{actor} {verb} a dramatic {noun} after extra time.",
            "A late {noun} sealed the win for {actor} in {place}.",
            "{person} will miss the {noun} with a knee injury.",
        ],
        "headlines": [
            "{actor_t} {verb} {noun}", "{person} leads {place} to {noun}",
            "{place} {noun} ends in drama", "Late {noun} stuns {place}",
        ],
    },
    "business": {
        "nouns": [
            "shares", "quarterly profit", "merger", "stock market", "interest rates",
            "inflation", "revenue", "layoffs", "bond yields", "dividend", "takeover bid",
            "retail sales", "oil prices", "earnings", "bankruptcy", "investors",
            "supply chain", "exports", "the central bank", "hedge fund", "tariffs",
            "pension fund", "credit rating", "currency", "startup funding", "ipo",
            "market share", "consumer spending", "mortgage rates", "profit warning",
        ],
        "verbs": [
            "reported", "cut", "raised", "announced", "slashed", "forecast",
            "acquired", "downgraded", "boosted", "missed", "beat", "trimmed",
        ],
        "actors": [
            "the retailer", "the carmaker", "the airline", "the bank", "the oil major",
            "the conglomerate", "the insurer", "the chipmaker",
        ],
        "templates": [
            "{actor} {verb} its {noun} outlook {filler}.",
            "{noun} fell {pct} percent in {place} trading {filler}.",
            "{person} {gverb} {noun} would weigh on growth next year.",
            "{actor} {verb} {noun} worth {num} million dollars.",
            "Investors in {place} shrugged off weak {noun} data.",
            "{generic} expect {noun} to rise by {pct} percent this quarter.",
            "{actor} {verb} expectations as {noun} climbed sharply.",
        ],
        "headlines": [
            "{actor_t} {verb} {noun}", "{noun_t} slide in {place}",
            "{place} {noun} hit record", "{actor_t} eyes {noun}",
        ],
    },
    "scitech": {
        "nouns": [
            "software update", "smartphone", "satellite", "processor", "vaccine trial",
            "search engine", "telescope", "robot", "battery", "genome", "browser",
            "spacecraft", "algorithm", "data breach", "quantum computer", "chip",
            "operating system", "virus", "laser", "solar panel", "network",
            "encryption", "drone", "fossil", "microscope", "malware", "laptop",
            "rover", "neural network", "server",
        ],
        "verbs": [
            "unveiled", "launched", "patched", "tested", "released", "discovered",
            "upgraded", "demonstrated", "recalled", "designed", "mapped", "hacked",
        ],
        "actors": [
            "researchers", "the software giant", "the space agency", "engineers",
            "the university lab", "scientists", "the startup", "security experts",
        ],
        "templates": [
            "{actor} {verb} a new {noun} in {place} {filler}.",
            "{person} {gverb} the {noun} could double computing speed.",
            "The {noun} was {verb} after {num} hours of testing.",
            "{actor} {verb} the {noun} to fix a critical flaw.",
            "A team in {place} {verb} a faster {noun} for remote sensing.",
            "{generic} warned the {noun} exposed millions of users.",
            "{actor} say the {noun} uses far less power than before.",
        ],
        "headlines": [
            "{actor_t} {verb} {noun}", "New {noun} debuts in {place}",
            "{noun_t} flaw found", "{place} lab builds {noun}",
        ],
    },
}
BORROW_RATE = 0.22
NEUTRAL_RATE = 0.18
ORDINALS = ["second", "third", "fourth", "fifth", "sixth"]
NEUTRAL = [
    "{person} {gverb} more details would follow {filler}.",
    "The news was first reported by local media in {place}.",
    "{generic} in {place} {gverb} the situation remained unclear.",
    "A spokesperson declined to comment {filler}.",
    "More than {num} people followed the story online {filler}.",
    "It was not immediately clear what happens next.",
]


def _fill(template, topic, rng):
    lex = TOPICS[topic if topic in TOPICS else rng.choice(sorted(TOPICS))]
    place, place2 = rng.sample(PLACES, 2)
    actor = rng.choice(lex["actors"])
    noun = rng.choice(lex["nouns"])
    values = {
        "actor": actor,
        "actor_t": actor[0].upper() + actor[1:],
        "verb": rng.choice(lex["verbs"]),
        "noun": noun,
        "noun_t": noun[0].upper() + noun[1:],
        "place": place,
        "place2": place2,
        "person": rng.choice(PEOPLE),
        "generic": rng.choice(GENERIC),
        "gverb": rng.choice(GENERIC_VERBS),
        "num": str(rng.choice([12, 40, 75, 120, 300, 450, 900, 1500, 20000])),
        "pct": str(rng.choice([1, 2, 3, 4, 5, 7, 9, 12])),
        "score": f"{rng.randint(1, 5)}-{rng.randint(0, 3)}",
        "ord": rng.choice(ORDINALS),
        "day": rng.choice(DAYS),
    }
    values["filler"] = rng.choice(FILLER).format(**values)
    text = template.format(**values)
    return text[0].upper() + text[1:]


def _source(topic, others, rng, borrow_rate, neutral_rate):
    u = rng.random()
    if u < neutral_rate:
        return None
    if u < neutral_rate + borrow_rate:
        return rng.choice(others)
    return topic


def make_document(topic, rng, borrow_rate=BORROW_RATE, neutral_rate=NEUTRAL_RATE):
    others = [t for t in TOPICS if t != topic]
    head_src = rng.choice(others) if rng.random() < borrow_rate else topic
    head = _fill(rng.choice(TOPICS[head_src]["headlines"]), head_src, rng)
    sources = [_source(topic, others, rng, borrow_rate, neutral_rate)
               for _ in range(rng.choice([2, 2, 3]))]
    # at least one on-topic sentence so every document carries some signal
    if topic not in sources and head_src != topic:
        sources[rng.randrange(len(sources))] = topic
    sentences = [_fill(rng.choice(NEUTRAL if src is None else TOPICS[src]["templates"]), src, rng)
                 for src in sources]
    return f"{head}: " + " ".join(sentences)


def build(seed, n_train, n_test):
    rng = random.Random(seed)
    rows = {"train": [], "test": []}
    next_id = 0
    for split, per_class in (("train", n_train), ("test", n_test)):
        for topic in TOPICS:
            seen = set()
            while len(seen) < per_class:
                text = make_document(topic, rng)
                if text in seen:
                    continue
                seen.add(text)
                rows[split].append({"id": next_id, "text": text, "label": topic})
                next_id += 1
        rng.shuffle(rows[split])
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1]
                                         / "src" / "gendistill" / "data" / "desk_topics"))
    ap.add_argument("--seed", type=int, default=20191104)
    ap.add_argument("--train-per-class", type=int, default=100)
    ap.add_argument("--test-per-class", type=int, default=300)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = build(args.seed, args.train_per_class, args.test_per_class)
    for split, recs in rows.items():
        with open(out / f"{split}.jsonl", "w", encoding="utf-8") as fh:
            for r in recs:
                fh.write(json.dumps(r, ensure_ascii=False) + "\n")
        print(f"{split}: {len(recs)} records -> {out / (split + '.jsonl')}")


if __name__ == "__main__":
    main()
