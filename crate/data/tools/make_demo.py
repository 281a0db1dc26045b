#!/usr/bin/env python3
"""Regenerates the synthetic demo corpus in data/demo/.

A fictional note-taking app ("quillpad") ships four monthly releases. Each
release's features are discussed in reviews during the months before it
lands, so the earlier release of every consecutive pair is the ground truth a
prioritizer should recover. Embedding files place each feature on its own
axis plus noise, for the embedding-backed clustering path.
"""

import csv
import random
from datetime import date, timedelta
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "demo"
APP = "quillpad"
DIMS = 16

# (period, [(feature text, phrase used in reviews, theme)])
RELEASES = [
    ("2024-03", [
        ("Sync notes across devices", "sync my notes between devices", 0),
        ("Export notes to PDF", "export notes to pdf", 1),
        ("Dark theme for the editor", "use a dark theme", 2),
        ("Search inside note attachments", "search inside attachments", 3),
        ("Pin important notes to the top", "pin important notes", 4),
        ("Offline editing of notes", "edit notes offline", 0),
        ("Reminder notifications for notes", "get reminder notifications", 5),
    ]),
    ("2024-06", [
        ("Share notebooks with collaborators", "share notebooks with my team", 6),
        ("Handwriting input with a stylus", "write with a stylus", 7),
        ("Tag notes with colored labels", "tag notes with colors", 4),
        ("Password lock for private notes", "lock private notes with a password", 5),
        ("Markdown preview mode", "preview markdown", 2),
        ("Import notes from text files", "import text files", 1),
        ("Version history for notes", "restore older versions of a note", 3),
        ("Voice memo recording", "record voice memos", 7),
    ]),
    ("2024-09", [
        ("Calendar view of dated notes", "see notes on a calendar", 5),
        ("Web clipper browser extension", "clip web pages", 1),
        ("Templates for new notes", "start notes from templates", 4),
        ("Table editing inside notes", "edit tables in notes", 2),
        ("Automatic backup to cloud storage", "back up automatically to the cloud", 0),
        ("Checklist items with progress", "track checklist progress", 6),
    ]),
    ("2024-12", [
        ("Scan documents with the camera", "scan documents with the camera", 7),
        ("Nested notebooks", "nest notebooks inside notebooks", 4),
        ("Word count statistics", "see word count statistics", 3),
        ("Custom fonts in the editor", "pick custom fonts", 2),
        ("Widgets for the home screen", "add home screen widgets", 6),
    ]),
]

NEGATIVE = [
    "I really can't {p} and it is frustrating.",
    "Terrible experience, there is no way to {p}.",
    "The app keeps crashing whenever I try to {p}.",
    "Disappointed that I still cannot {p}.",
]
POSITIVE = [
    "Love this app, it would be great to {p} too.",
    "Great editor overall and fast.",
    "Nice design, I enjoy using it every day.",
    "Excellent app but I want to {p}.",
]
REQUEST = [
    "Please add a way to {p}.",
    "It would be nice to {p}.",
    "I wish I could {p}.",
    "Add an option to {p}!",
]
FILLER = [
    "The app is okay.",
    "Works as expected on my phone.",
    "Used it for a year now.",
    "Installed it yesterday.",
]


def month_start(label):
    y, m = map(int, label.split("-"))
    return date(y, m, 1)


def main():
    rng = random.Random(7)
    OUT.mkdir(parents=True, exist_ok=True)
    corpus_start = date(2022, 1, 1)

    reqs = []
    with open(OUT / "requirements.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "text", "period", "app"])
        n = 0
        for period, feats in RELEASES:
            for text, phrase, theme in feats:
                n += 1
                rid = f"q{n}"
                reqs.append((rid, text, phrase, theme, month_start(period)))
                w.writerow([rid, text, period, APP])

    reviews = []
    for rid, _, phrase, _, release in reqs:
        # demand builds over the two years before release, then fades
        count = rng.randint(14, 22)
        for _ in range(count):
            days = int(rng.triangular(40, 700, 120))
            ts = release - timedelta(days=days)
            if ts < corpus_start:
                continue
            sentences = []
            kind = rng.random()
            if kind < 0.35:
                sentences.append(rng.choice(NEGATIVE).format(p=phrase))
            elif kind < 0.6:
                sentences.append(rng.choice(POSITIVE).format(p=phrase))
            else:
                sentences.append(rng.choice(REQUEST).format(p=phrase))
            if rng.random() < 0.5:
                sentences.append(rng.choice(FILLER))
            reviews.append((ts, " ".join(sentences), rid))
    for _ in range(120):
        ts = corpus_start + timedelta(days=rng.randint(0, 1050))
        reviews.append((ts, rng.choice(FILLER), None))

    reviews.sort(key=lambda r: (r[0], r[1]))
    theme_of = {r[0]: r[3] for r in reqs}
    with open(OUT / "reviews.csv", "w", newline="", encoding="utf-8") as f, \
            open(OUT / "message_embeddings.csv", "w", newline="", encoding="utf-8") as fe:
        w = csv.writer(f, lineterminator="\n")
        we = csv.writer(fe, lineterminator="\n")
        w.writerow(["id", "text", "timestamp", "app", "rating"])
        we.writerow(["id"] + [f"dim{d}" for d in range(DIMS)])
        for k, (ts, text, rid) in enumerate(reviews, 1):
            mid = f"m{k}"
            rating = rng.randint(1, 5)
            w.writerow([mid, text, ts.isoformat(), APP, rating])
            axis = theme_of[rid] if rid else DIMS - 1
            we.writerow([mid] + [embed(rng, axis, d) for d in range(DIMS)])

    with open(OUT / "requirement_embeddings.csv", "w", newline="", encoding="utf-8") as fe:
        we = csv.writer(fe, lineterminator="\n")
        we.writerow(["id"] + [f"dim{d}" for d in range(DIMS)])
        for rid, _, _, theme, _ in reqs:
            we.writerow([rid] + [embed(rng, theme, d) for d in range(DIMS)])


def embed(rng, axis, d):
    base = 1.0 if d == axis else 0.0
    return f"{base + rng.gauss(0, 0.15):.4f}"


if __name__ == "__main__":
    main()
