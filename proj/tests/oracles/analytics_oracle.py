"""Hand-count oracle for the bundled fixture corpus.

Independent of the C++ code: plain csv + str.split + re. Prints the values
frozen into tests/unit/test_analytics.cpp and the acceptance suite.
    python3 tests/oracles/analytics_oracle.py
"""
import csv
import re
from collections import Counter

rows = list(csv.DictReader(open("data/fixture_events.csv", newline="", encoding="utf-8")))
seen, notes = set(), []
for r in rows:
    if r["notes"] not in seen:
        seen.add(r["notes"])
        notes.append((r["notes"], int(r["fatalities"]) > 0))
stop = {w.strip() for w in open("data/stopwords_en.txt", encoding="utf-8")
        if w.strip() and not w.startswith("#")}

print("rows", len(rows), "unique", len(notes), "fatal", sum(f for _, f in notes))
chars = [len(n) for n, _ in notes]
words = [len(n.split()) for n, _ in notes]
print("chars min/total/max", min(chars), sum(chars), max(chars), "mean", sum(chars) / len(chars))
print("words min/total/max", min(words), sum(words), max(words), "mean", sum(words) / len(words))


def counts(texts):
    c = Counter()
    for t in texts:
        for w in re.split(r"[^0-9a-z]+", t.lower()):
            if len(w) > 1 and not w.isdigit() and w not in stop:
                c[w] += 1
    return sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))


for name, texts in [("fatal", [n for n, f in notes if f]), ("nonfatal", [n for n, f in notes if not f])]:
    print(name, counts(texts)[:10])
cloud = counts([n for n, _ in notes])
print("cloud entries", len(cloud), "total", sum(v for _, v in cloud))
print("cloud head", cloud[:12])
