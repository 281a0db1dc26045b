#!/usr/bin/env python3
"""Regenerates the synthetic Word Processor fixture set in data/wordprocessor/.

Outputs:
  benchmark.csv       50 requirements, 4 stakeholder value columns, 3 resource columns
  clusters.csv        requirement_id,cluster (7 clusters)
  gold_pairs.csv      from_id,to_id (65 "requires" pairs)
  fixtures_gpt45.json recorded chat responses keyed by prompt SHA-256

The prompt text must match reqprio's `build_prompt` byte for byte; the Rust
test suite checks every fixture hash against the prompts it builds.
"""

import csv
import hashlib
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "wordprocessor"

TEMPLATE = (
    "A “requires” relation between two requirements (req_x and req_y) is defined as: "
    "req x requires req y for the purpose of software release, but not vice versa. Identify and output all the "
    "“requires” pairs from the requirements provided below, using the format: req_x --> req_y.\n{requirements}"
)

TEXTS = [
    "Create a new file",
    "Open an existing file",
    "Close current file",
    "Save current file",
    "Save file under a new name",
    "Print current document",
    "Export document as PDF",
    "Show recently opened files",
    "Type and delete text",
    "Select text",
    "Copy selected text",
    "Cut selected text",
    "Paste text from the clipboard",
    "Undo last action",
    "Redo last undone action",
    "Find and replace text",
    "Change font type",
    "Change font size",
    "Make text bold, italic or underlined",
    "Change text color",
    "Align paragraphs",
    "Set line spacing",
    "Create bulleted and numbered lists",
    "Apply paragraph styles",
    "Insert a table",
    "Add rows and columns to a table",
    "Insert an image",
    "Resize an inserted image",
    "Insert a hyperlink",
    "Insert page numbers",
    "Insert headers and footers",
    "Check spelling",
    "Check grammar",
    "Show word count",
    "Track changes",
    "Accept or reject tracked changes",
    "Add comments to text",
    "Reply to comments",
    "Zoom in and out",
    "Switch to print layout view",
    "Set page margins",
    "Change page orientation",
    "Insert page breaks",
    "Split text into columns",
    "Show the ruler",
    "Share document with other users",
    "Co-edit a document in real time",
    "Open the help window",
    "Load help file",
    "Search a text in the help file",
]

# (first, last) requirement number of each cluster
CLUSTERS = [(1, 8), (9, 16), (17, 24), (25, 31), (32, 38), (39, 45), (46, 50)]

# Cells visible in the published snippet: stakeholders 1, 2 and 4, then design, development, QA.
KNOWN = {
    1: (8, 9, 9, 17, 22, 12),
    2: (8, 9, 9, 20, 25, 13),
    3: (8, 9, 1, 5, 1, 2),
    49: (2, 7, 6, 3, 3, 3),
    50: (1, 7, 6, 2, 2, 2),
}

GOLD = """
3 2; 3 1; 4 1; 5 4; 6 2; 7 5; 8 2; 6 40; 10 9; 11 10; 12 10; 13 11; 15 14; 16 9; 12 9;
17 10; 18 10; 19 10; 20 10; 21 9; 22 21; 23 21; 24 17; 24 18; 24 22; 26 25; 28 27; 29 10;
30 31; 31 41; 25 9; 27 1; 33 32; 34 9; 36 35; 37 10; 38 37; 35 4; 32 9; 41 40; 42 40;
43 40; 44 41; 45 40; 39 2; 46 4; 47 46; 47 4; 49 48; 50 49; 50 48; 38 46; 37 46; 16 10;
14 9; 23 9; 21 10; 11 9; 13 9; 29 9; 30 40; 44 40; 7 40; 40 1; 11 13
"""

# Pairs returned by each cluster prompt: the correct ones first, then the wrong ones.
CLUSTER_ANSWERS = [
    ["3 2", "5 4", "2 3", "1 4", "8 1", "6 7"],
    ["10 9", "15 14", "9 10", "14 15", "16 11"],
    ["22 21", "21 22", "18 17", "20 19"],
    ["25 26", "27 28", "31 30"],
    ["33 32", "32 33", "35 36", "37 38"],
    ["40 41", "39 45"],
    ["50 49", "49 50"],
]

BASELINE_ANSWER = [
    "3 2", "2 3", "1 4", "9 10", "21 22", "32 33", "49 50",
    "6 2", "24 17", "47 46", "38 37",
    "1 3", "4 5", "17 24", "46 47", "2 8", "25 27", "42 41",
]


def pairs(spec):
    out = []
    for item in spec:
        a, b = item.split()
        out.append((f"r{a}", f"r{b}"))
    return out


def gold_pairs():
    return pairs([p.strip() for p in GOLD.replace("\n", " ").split(";") if p.strip()])


def prompt(ids):
    lines = "\n".join(f"{i}: {TEXTS[int(i[1:]) - 1]}" for i in ids)
    return TEMPLATE.replace("{requirements}", lines)


def sha(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def render(answer, style):
    """Formats pairs the way a chat model might, varying list markers and arrows."""
    if style == 0:
        body = "\n".join(f"{a} --> {b}" for a, b in answer)
        return f"Here are the “requires” pairs I identified:\n\n{body}"
    if style == 1:
        body = "\n".join(f"{k}. {a} --> {b}" for k, (a, b) in enumerate(answer, 1))
        return f"{body}\n\nThese pairs reflect functional prerequisites for release."
    if style == 2:
        body = "\n".join(f"- **{a} --> {b}**" for a, b in answer)
        return f"Requires pairs:\n{body}"
    body = "\n".join(f"* {a} -> {b}" for a, b in answer)
    return f"{body}\n\nNo other dependencies were found in this group."


def main():
    rng = random.Random(20140801)
    OUT.mkdir(parents=True, exist_ok=True)

    with open(OUT / "benchmark.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "text", "value_s1", "value_s2", "value_s3", "value_s4", "design", "development", "qa"])
        shared_s3 = rng.randint(1, 10)
        for k, text in enumerate(TEXTS, 1):
            s3 = shared_s3 if k in (1, 2) else rng.randint(1, 10)
            if k in KNOWN:
                s1, s2, s4, d, dev, qa = KNOWN[k]
            else:
                s1, s2, s4 = (rng.randint(1, 10) for _ in range(3))
                dev = rng.randint(1, 30)
                d = max(1, round(dev * rng.uniform(0.5, 1.2)))
                qa = max(1, round(dev * rng.uniform(0.3, 0.7)))
            w.writerow([f"r_{k}", text, s1, s2, s3, s4, d, dev, qa])

    with open(OUT / "clusters.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["requirement_id", "cluster"])
        for c, (lo, hi) in enumerate(CLUSTERS):
            for k in range(lo, hi + 1):
                w.writerow([f"r{k}", f"c{c}"])

    gold = gold_pairs()
    assert len(gold) == 65 and len(set(gold)) == 65, "gold pairs must be 65 distinct pairs"
    with open(OUT / "gold_pairs.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["from_id", "to_id"])
        w.writerows(gold)

    gold_set = set(gold)
    baseline = pairs(BASELINE_ANSWER)
    clusters = [pairs(a) for a in CLUSTER_ANSWERS]
    cluster_union = {p for c in clusters for p in c}
    for c, (lo, hi) in zip(clusters, CLUSTERS):
        for a, b in c:
            assert lo <= int(a[1:]) <= hi and lo <= int(b[1:]) <= hi, "cluster answers stay inside the cluster"
    assert len(set(baseline)) == 18 and len(cluster_union) == 26
    assert len(set(baseline) | cluster_union) == 37
    assert len(set(baseline) & gold_set) == 5 and len(cluster_union & gold_set) == 7
    assert len((set(baseline) | cluster_union) & gold_set) == 11

    all_ids = [f"r{k}" for k in range(1, 51)]
    fixtures = [{"prompt_sha256": sha(prompt(all_ids)), "response_text": render(baseline, 0)}]
    for c, ((lo, hi), answer) in enumerate(zip(CLUSTERS, clusters)):
        text = render(answer, 1 + c % 3)
        if c == 5:
            # the model also mentions an id outside the list and a self-loop; both are dropped
            text += "\nr40 --> r40\nr51 --> r39"
        fixtures.append(
            {"prompt_sha256": sha(prompt([f"r{k}" for k in range(lo, hi + 1)])), "response_text": text}
        )
    with open(OUT / "fixtures_gpt45.json", "w", encoding="utf-8") as f:
        json.dump(fixtures, f, indent=2, ensure_ascii=False)
        f.write("\n")


if __name__ == "__main__":
    main()
