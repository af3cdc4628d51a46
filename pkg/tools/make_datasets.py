#!/usr/bin/env python3
"""Generate the synthetic BIO datasets under data/.

The files imitate the two common BIO dialects: a newswire corpus with
4-column lines (token POS CHUNK TAG) and DOCSTART markers, and Wikipedia
domain corpora with 2-column lines and multi-word label names encoded as
concatenated tag codes. Generation is seeded, so the committed files are
reproducible with: python tools/make_datasets.py
"""

from __future__ import annotations

import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data"

# ---------------------------------------------------------------------------
# vocab pools

REUTERS = {
    "labels": ["person", "organization", "location", "miscellaneous"],
    "tags": {"PER": "person", "ORG": "organization", "LOC": "location",
             "MISC": "miscellaneous"},
    "pools": {
        "person": [
            "Peter Blackburn", "Anna Kowalski", "David Chen", "Maria Santos",
            "James Whitfield", "Elena Petrova", "Tom Hargreaves", "Lucy Akintola",
            "Henrik Larsen", "Fatima Noor", "George Okafor", "Ingrid Svensson",
        ],
        "organization": [
            "European Commission", "United Nations", "World Bank", "Reuters",
            "International Monetary Fund", "Bundesbank", "Microsoft", "Volkswagen",
            "Central Bank of Brazil", "OPEC", "Deutsche Bank", "Toyota",
        ],
        "location": [
            "Brussels", "London", "Frankfurt", "New York", "Tokyo", "Karachi",
            "Buenos Aires", "Johannesburg", "Oslo", "Madrid", "Jakarta", "Cairo",
        ],
        "miscellaneous": [
            "British", "German", "Russian", "Brazilian", "Japanese", "Dutch",
            "World Cup", "Olympic Games", "Nobel Prize", "Eurobond",
        ],
    },
    "templates": [
        ("{organization} rejected a proposal from {organization} on Thursday .", None),
        ("{person} told reporters in {location} that exports were rising .", None),
        ("The {miscellaneous} delegation arrived in {location} after the talks .", None),
        ("{person} said the {organization} would review its {miscellaneous} holdings .", None),
        ("Shares in {organization} fell sharply while markets in {location} recovered .", None),
        ("{person} met {person} during the summit in {location} .", None),
        ("The {organization} raised interest rates , surprising traders in {location} .", None),
        ("Officials from {organization} were running late for the {miscellaneous} finals .", None),
        ("{location} grain prices climbed after {organization} cut its forecast .", None),
        ("A spokesman for {organization} declined to comment on the {miscellaneous} sale .", None),
        ("{person} , speaking in {location} , praised the {organization} decision .", None),
        ("Heavy rains flooded roads and delayed trains across the region .", None),
        ("Wheat futures closed higher in quiet trading on Friday .", None),
        ("The central bank kept its benchmark rate unchanged this week .", None),
        ("{person} resigned from {organization} and moved to {location} .", None),
        ("Analysts expect the {miscellaneous} economy to recover slowly .", None),
        ("{organization} signed a supply agreement with {organization} in {location} .", None),
        ("Exports of refined copper from {location} doubled last month .", None),
        ("{person} won the {miscellaneous} after beating {person} in {location} .", None),
        ("Negotiators in {location} adjourned without reaching an agreement .", None),
    ],
}

POLITICS = {
    "labels": ["politician", "person", "organization", "political party", "event",
               "election", "country", "location", "miscellaneous"],
    "tags": {"politician": "politician", "person": "person",
             "organization": "organization", "politicalparty": "political party",
             "event": "event", "election": "election", "country": "country",
             "location": "location", "misc": "miscellaneous"},
    "pools": {
        "politician": [
            "Edmund Keller", "Rosa Lindgren", "Viktor Ahlberg", "Amara Diallo",
            "Pablo Ferreira", "Hana Suzuki", "Nils Bergman", "Clara Dupont",
            "Samuel Adeyemi", "Petra Novak", "Liam Gallagher Woods", "Aisha Rahman",
        ],
        "person": [
            "Martin Vogel", "Sofia Marchetti", "Derek Ng", "Alice Brennan",
            "Tomas Herrera", "Leah Goldstein", "Oscar Lindqvist", "Mira Patel",
        ],
        "organization": [
            "National Assembly", "Supreme Court", "Electoral Commission",
            "Workers Union Congress", "Senate Budget Office", "Council of Europe",
            "Transparency Watch", "Civic Forum Institute",
        ],
        "political party": [
            "Social Democratic Party", "National Unity Party", "Green Alliance",
            "Liberal Reform Party", "People First Movement", "Progressive League",
            "Conservative Union", "Farmers Coalition",
        ],
        "event": [
            "Velvet Revolution", "October Uprising", "Unification Congress",
            "Spring Referendum Crisis", "Border Treaty Dispute",
        ],
        "election": [
            "1998 parliamentary election", "2004 presidential election",
            "municipal elections of 2010", "2015 general election",
            "1976 senate election",
        ],
        "country": [
            "Norvania", "Westmark", "Eastoria", "South Placidia", "Karelia",
            "Montevera", "Althea",
        ],
        "location": [
            "Port Halvard", "Nordhaven", "Villa Serrano", "Kestrel Bay",
            "Old Parliament Square", "Riverside District",
        ],
        "miscellaneous": [
            "Constitution Act", "Charter of Rights", "Federalist Papers",
            "Unity Accord", "Reform Bill",
        ],
    },
    "templates": [
        ("{politician} joined the {political_party} before the {election} .", None),
        ("{politician} defeated {politician} in the {election} by a narrow margin .", None),
        ("The {political_party} formed a coalition with the {political_party} in {country} .", None),
        ("{organization} investigated campaign spending during the {election} .", None),
        ("{politician} addressed supporters at {location} after the {event} .", None),
        ("The {event} reshaped politics in {country} for a generation .", None),
        ("{person} wrote a biography of {politician} covering the {event} .", None),
        ("Voters in {country} approved the {miscellaneous} in a referendum .", None),
        ("{politician} resigned as leader of the {political_party} on Monday .", None),
        ("The {organization} ruled that the {miscellaneous} was constitutional .", None),
        ("{politician} campaigned across {location} during the {election} .", None),
        ("Delegates from {country} and {country} signed the {miscellaneous} .", None),
        ("{person} moderated the debate between {politician} and {politician} .", None),
        ("The {political_party} lost seats in the {election} despite strong turnout .", None),
        ("Protesters gathered near {location} demanding electoral reforms .", None),
        ("Parliament debated the budget late into the night .", None),
        ("Turnout was unexpectedly high in rural districts .", None),
        ("{organization} published its annual report on governance in {country} .", None),
        ("{politician} was elected mayor of {location} running for the {political_party} .", None),
        ("The {event} began after disputed results in the {election} .", None),
    ],
}

MUSIC = {
    "labels": ["music genre", "song", "band", "album", "musical artist",
               "musical instrument", "award", "event", "country", "location",
               "organization", "person", "miscellaneous"],
    "tags": {"musicgenre": "music genre", "song": "song", "band": "band",
             "album": "album", "musicalartist": "musical artist",
             "musicalinstrument": "musical instrument", "award": "award",
             "event": "event", "country": "country", "location": "location",
             "organization": "organization", "person": "person",
             "misc": "miscellaneous"},
    "pools": {
        "music genre": ["progressive rock", "acid jazz", "delta blues", "synthpop",
                        "chamber folk"],
        "song": ["Midnight Harbor", "Glass Rivers", "Paper Lanterns",
                 "Echoes of Tomorrow", "Salt and Smoke"],
        "band": ["The Copper Foxes", "Silver Meridian", "Northern Lights Quartet",
                 "Velvet Argonauts", "The Harbor Lights"],
        "album": ["Songs from the Attic", "Blue Hour Sessions", "Cartography",
                  "A Winter Abroad", "Static Gardens"],
        "musical artist": ["Elsa Moreno", "Dmitri Volkov", "June Okafor",
                           "Theo Brandt", "Nadia Rousseau"],
        "musical instrument": ["pedal steel guitar", "hammond organ", "cello",
                               "soprano saxophone", "mellotron"],
        "award": ["Golden Lyre Award", "Crystal Note Prize", "Harbor Music Medal"],
        "event": ["Lakeside Music Festival", "Winter Sessions Tour",
                  "Harbor Jazz Weekend"],
        "country": ["Norvania", "Westmark", "Eastoria", "Montevera"],
        "location": ["Nordhaven", "Port Halvard", "Riverside District", "Kestrel Bay"],
        "organization": ["Meridian Records", "Harbor Conservatory",
                         "National Radio Orchestra"],
        "person": ["Martin Vogel", "Alice Brennan", "Oscar Lindqvist"],
        "miscellaneous": ["Deluxe Edition", "Unplugged Series"],
    },
    "templates": [
        ("{musical_artist} recorded {album} with {band} in {location} .", None),
        ("The single {song} topped charts across {country} .", None),
        ("{band} performed at the {event} playing mostly {music_genre} .", None),
        ("{musical_artist} won the {award} for {album} .", None),
        ("{person} reviewed {album} for {organization} .", None),
        ("{musical_artist} plays the {musical_instrument} on {song} .", None),
        ("{band} signed with {organization} after the {event} .", None),
        ("The {music_genre} revival started in {location} during the nineties .", None),
        ("{song} closes the album {album} by {band} .", None),
        ("Critics praised the {musical_instrument} arrangements on {album} .", None),
        ("The tour sold out within hours .", None),
        ("Rehearsals ran long into the evening .", None),
        ("{musical_artist} and {musical_artist} duet on {song} .", None),
        ("{organization} reissued {album} as a {miscellaneous} .", None),
        ("{band} headlined the {event} in {location} .", None),
    ],
}


def build_sentence(rng, spec) -> tuple[list[tuple[str, str]], str]:
    template, _ = rng.choice(spec["templates"])
    tokens: list[tuple[str, str]] = []
    parts = template.split()
    inverse = {label: raw for raw, label in spec["tags"].items()}
    for part in parts:
        if part.startswith("{") and part.endswith("}"):
            label = part[1:-1].replace("_", " ")
            segment = rng.choice(spec["pools"][label])
            raw = inverse[label]
            words = segment.split()
            tokens.append((words[0], f"B-{raw}"))
            tokens.extend((w, f"I-{raw}") for w in words[1:])
        else:
            tokens.append((part, "O"))
    text = " ".join(tok for tok, _ in tokens)
    return tokens, text


def write_split(path: Path, rng, spec, count: int, seen: set[str],
                four_column: bool, docstart_every: int | None) -> None:
    lines: list[str] = []
    produced = 0
    while produced < count:
        tokens, text = build_sentence(rng, spec)
        if text in seen:
            continue
        seen.add(text)
        if docstart_every and produced % docstart_every == 0:
            lines.append("-DOCSTART- -X- -X- O" if four_column else "-DOCSTART- O")
            lines.append("")
        for token, tag in tokens:
            if four_column:
                pos = "NNP" if tag != "O" else "NN"
                chunk = "B-NP" if tag != "O" else "O"
                lines.append(f"{token} {pos} {chunk} {tag}")
            else:
                lines.append(f"{token} {tag}")
        lines.append("")
        produced += 1
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines).rstrip("\n") + "\n", encoding="utf-8")
    print(f"wrote {path} ({produced} sentences)")


def write_labels(path: Path, spec) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["labels:"]
    lines += [f"  - {label}" for label in spec["labels"]]
    lines.append("tags:")
    lines += [f"  {raw}: {label}" for raw, label in spec["tags"].items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}")


def main() -> None:
    rng = random.Random(20240811)

    conll = ROOT / "conll2003"
    seen: set[str] = set()
    write_labels(conll / "labels.yaml", REUTERS)
    write_split(conll / "train.bio", rng, REUTERS, 60, seen, True, 10)
    write_split(conll / "valid.bio", rng, REUTERS, 40, seen, True, 10)
    write_split(conll / "test.bio", rng, REUTERS, 30, seen, True, 10)

    politics = ROOT / "crossner" / "politics"
    seen = set()
    write_labels(politics / "labels.yaml", POLITICS)
    write_split(politics / "train.bio", rng, POLITICS, 200, seen, False, None)
    write_split(politics / "dev.bio", rng, POLITICS, 40, seen, False, None)
    write_split(politics / "test.bio", rng, POLITICS, 30, seen, False, None)

    music = ROOT / "crossner" / "music"
    seen = set()
    write_labels(music / "labels.yaml", MUSIC)
    write_split(music / "train.bio", rng, MUSIC, 40, seen, False, None)
    write_split(music / "dev.bio", rng, MUSIC, 20, seen, False, None)
    write_split(music / "test.bio", rng, MUSIC, 15, seen, False, None)


if __name__ == "__main__":
    main()
