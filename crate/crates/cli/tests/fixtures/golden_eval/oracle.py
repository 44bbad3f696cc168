"""Independent reference for the golden eval fixture.

Rebuilds the expected report for `tablesim eval --embed-provider hashed
--dimension 64 --hash-seed 3 --k 1 --k 3` over corpus.jsonl and pairs.jsonl.
Every table has a single row, so the embedded row needs no RNG.

    python3 oracle.py > /dev/null   # rewrites expected_report.{json,csv}
"""
import json
import math
import re

DIM = 64
HASH_SEED = 3
KS = [1, 3]
M = (1 << 64) - 1


def fnv1a(data):
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & M
    return h


def mix64(z):
    z = (z + 0x9E3779B97F4A7C15) & M
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
    return z ^ (z >> 31)


def embed(text):
    vec = [0.0] * DIM
    for tok in re.findall(r"[A-Za-z0-9]+", text):
        h = mix64(fnv1a(tok.lower().encode()) ^ mix64(HASH_SEED))
        vec[h % DIM] += -1.0 if mix64(h) & 1 else 1.0
    return vec


def cosine(a, b):
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    if na == 0 or nb == 0:
        return 0.0
    return max(-1.0, min(1.0, sum(x * y for x, y in zip(a, b)) / (na * nb)))


def text_of(t):
    return "{}. {}. {}".format(t["title"], ", ".join(t["column_names"]), ", ".join(t["rows"][0]))


def display(x):
    # shortest round-trip digits, integral values without a fraction
    return str(int(x)) if x == int(x) else repr(x)


def main():
    tables = [json.loads(l) for l in open("corpus.jsonl") if l.strip()]
    vecs = {t["id"]: embed(text_of(t)) for t in tables}
    queries = {}
    for l in open("pairs.jsonl"):
        if l.strip():
            p = json.loads(l)
            queries.setdefault(p["anchor_id"], []).append(p["target_id"])
    depth = max(KS)
    per_query = {}
    for q in sorted(queries):
        rel = queries[q]
        cands = [(-cosine(vecs[q], vecs[i]), i) for i in vecs if i != q]
        ranked = [i for _, i in sorted(cands)][:depth]
        metrics = {}
        for k in KS:
            hits = [r for r, i in enumerate(ranked[:k], 1) if i in rel]
            ideal = sum(1 / math.log2(r + 1) for r in range(1, min(len(rel), k) + 1))
            metrics["recall@%d" % k] = len(hits) / len(rel)
            metrics["ndcg@%d" % k] = sum(1 / math.log2(r + 1) for r in hits) / ideal
        ranks = [ranked.index(r) + 1 if r in ranked else None for r in rel]
        per_query[q] = {"metrics": dict(sorted(metrics.items())), "relevant_ranks": ranks}
    names = sorted({n for m in per_query.values() for n in m["metrics"]})
    agg = {n: sum(per_query[q]["metrics"][n] for q in sorted(per_query)) / len(per_query) for n in names}
    report = {"ks": KS, "n_queries": len(per_query), "aggregates": agg, "per_query": per_query}
    with open("expected_report.json", "w") as f:
        f.write(json.dumps(report, indent=2) + "\n")
    cols = [n for k in KS for n in ("recall@%d" % k, "ndcg@%d" % k)]
    with open("expected_report.csv", "w") as f:
        f.write(",".join(["query_id"] + cols) + "\n")
        for q in sorted(per_query):
            f.write(",".join([q] + [display(per_query[q]["metrics"][c]) for c in cols]) + "\n")


if __name__ == "__main__":
    main()
