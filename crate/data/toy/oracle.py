"""Reference outputs for the toy bundle.

Scores every sparse candidate (no early stopping) with plain Python floats
and writes the expected runs to golden/. Run from this directory:

    python3 oracle.py
"""

import struct
from decimal import Decimal

ALPHA = 0.5


def f32(x):
    return struct.unpack("<f", struct.pack("<f", float(x)))[0]


def read_vectors(path, with_index):
    out = {}
    for line in open(path):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        vec = [f32(v) for v in parts[-1].split()]
        if with_index:
            out.setdefault(parts[0], []).append((int(parts[1]), vec))
        else:
            out[parts[0]] = vec
    return out


def read_run(path):
    run = {}
    tag = None
    for line in open(path):
        if not line.strip():
            continue
        qid, _, doc, rank, score, t = line.split()
        tag = tag or t
        run.setdefault(qid, []).append((float(score), int(rank), doc))
    for rows in run.values():
        rows.sort(key=lambda r: (-r[0], r[1]))
    return run, tag


def dot(a, b):
    s = 0.0
    for x, y in zip(a, b):
        s += x * y
    return s


def fmt(score):
    # shortest round-trip digits, plain notation, at least 6 significant
    d = Decimal(repr(score))
    sign, digits, exp = d.as_tuple()
    while len(digits) > 1 and digits[-1] == 0 and exp < 0:
        digits = digits[:-1]
        exp += 1
    sig = len(digits) if any(digits) else 1
    if sig < 6:
        exp -= 6 - sig
        digits = digits + (0,) * (6 - sig)
    text = "".join(map(str, digits))
    if exp >= 0:
        text = text + "0" * exp
        if sig < 6:
            text += "."
    else:
        point = len(text) + exp
        if point <= 0:
            text = "0." + "0" * (-point) + text
        else:
            text = text[:point] + "." + text[point:]
    return ("-" if sign else "") + text


def write_run(path, run, tag):
    with open(path, "w") as f:
        for qid in sorted(run):
            for i, (doc, score) in enumerate(run[qid], 1):
                f.write(f"{qid} Q0 {doc} {i} {fmt(score)} {tag}\n")


def main():
    passages = read_vectors("passages.tsv", True)
    queries = read_vectors("query_vectors.tsv", False)
    sparse, sparse_tag = read_run("sparse.run")
    dense, _ = read_run("dense.run")

    reranked = {}
    for qid, rows in sparse.items():
        q = queries[qid]
        scored = []
        for pos, (s, _, doc) in enumerate(rows):
            phi_d = max(dot(q, p) for _, p in passages[doc])
            scored.append((ALPHA * s + (1 - ALPHA) * phi_d, pos, doc))
        scored.sort(key=lambda r: (-r[0], r[1]))
        reranked[qid] = [(doc, score) for score, _, doc in scored]
    write_run("golden/rerank.run", reranked, "fast-forward")

    hybrid = {}
    for qid, rows in sparse.items():
        d = {doc: s for s, _, doc in dense.get(qid, [])}
        scored = []
        for pos, (s, _, doc) in enumerate(rows):
            score = ALPHA * s + (1 - ALPHA) * d[doc] if doc in d else s
            scored.append((score, pos, doc))
        scored.sort(key=lambda r: (-r[0], r[1]))
        hybrid[qid] = [(doc, score) for score, _, doc in scored]
    write_run("golden/hybrid.run", hybrid, sparse_tag)


if __name__ == "__main__":
    main()
