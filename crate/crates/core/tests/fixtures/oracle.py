#!/usr/bin/env python3
"""Brute-force oracles for the synthetic fixtures.

Deliberately naive: full DP edit distance, all-pairs comparison, plain set
counting. Used by gen_fixtures.py to write the expected values, and runnable
on its own:

    python3 oracle.py synthetic_corpus.txt
"""

import json
import re
import sys
import unicodedata


def read_records(path):
    """Returns [(record_id, [cr lines])] from a tagged export."""
    records = []
    cur_tag = None
    ut, cr = None, []
    with open(path, encoding="utf-8") as f:
        for line in f.read().split("\n"):
            if line.startswith("   ") and cur_tag:
                if cur_tag == "CR":
                    cr.append(line[3:].strip())
                continue
            tag = line[:2]
            cur_tag = tag
            val = line[3:].strip()
            if tag == "CR":
                cr.append(val)
            elif tag == "UT":
                ut = val
            elif tag == "ER":
                records.append((ut, cr))
                ut, cr = None, []
    return records


def count_export(path):
    records = read_records(path)
    distinct = set()
    ncr = {}
    for ut, cr in records:
        for raw in set(cr):
            ncr[raw] = ncr.get(raw, 0) + 1
        distinct.update(cr)
    return {
        "records": len(records),
        "cr_mentions": sum(len(cr) for _, cr in records),
        "distinct_variants": len(distinct),
        "ncr_sum": sum(ncr.values()),
        "max_ncr": max(ncr.values()) if ncr else 0,
    }


def distinct_references(path):
    return sorted({raw for _, cr in read_records(path) for raw in cr})


# ------------------------------------------------------------ reference split

YEAR = re.compile(r"^[12]\d\d\d$")


def split_reference(raw):
    segs = [s.strip() for s in raw.split(",")]
    out = {"author": None, "year": None, "source": None, "volume": None, "page": None, "doi": None}
    if segs and YEAR.match(segs[0]):
        out["year"] = int(segs[0])
        yi = 0
    else:
        out["author"] = segs[0] or None
        yi = next((i for i in range(1, len(segs)) if YEAR.match(segs[i])), None)
        if yi is not None:
            out["year"] = int(segs[yi])
    for i in range(1, len(segs)):
        s = segs[i]
        if i == yi or not s:
            continue
        if s[:3].lower() == "doi" and (s[3:4] == ":" or s[3:4].isspace()):
            if out["doi"] is None:
                out["doi"] = s[4:].strip().strip("[]").strip().lower()
            continue
        tok = lambda p: s[1:] if s.startswith(p) and len(s) > 1 and " " not in s[1:] and any(c.isdigit() for c in s[1:]) else None
        v, p = tok("V"), tok("P")
        if yi is not None and i == yi + 1 and v is None and p is None:
            out["source"] = s
        elif v is not None:
            out["volume"] = out["volume"] or v
        elif p is not None:
            out["page"] = out["page"] or p
    return out


# ----------------------------------------------------------------- similarity

def fold(s):
    s = unicodedata.normalize("NFD", s.lower())
    s = "".join(c for c in s if not unicodedata.combining(c))
    return " ".join(s.split())


def reference_key(author, source):
    return " ".join(x for x in (fold(author or ""), fold(source or "")) if x)


def levenshtein(a, b):
    """Full (len(a)+1) x (len(b)+1) table."""
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
                d[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return d[len(a)][len(b)]


def similarity(a, b):
    m = max(len(a), len(b))
    return 1.0 if m == 0 else 1.0 - levenshtein(a, b) / m


def cluster_partition(raws, threshold, use_volume, use_page, use_doi):
    """Transitive closure of all linked pairs; returns the groups with more
    than one member, each sorted, the list sorted."""
    parts = [split_reference(r) for r in raws]
    keys = [reference_key(p["author"], p["source"]) for p in parts]
    n = len(raws)
    adj = [[] for _ in range(n)]

    def agree(a, b):
        return a is None or b is None or a == b

    for i in range(n):
        for j in range(i + 1, n):
            a, b = parts[i], parts[j]
            if a["year"] != b["year"]:
                continue
            if use_volume and not agree(a["volume"], b["volume"]):
                continue
            if use_page and not agree(a["page"], b["page"]):
                continue
            if use_doi and not agree(a["doi"], b["doi"]):
                continue
            if similarity(keys[i], keys[j]) >= threshold:
                adj[i].append(j)
                adj[j].append(i)
    seen = [False] * n
    groups = []
    for i in range(n):
        if seen[i]:
            continue
        stack, comp = [i], []
        seen[i] = True
        while stack:
            x = stack.pop()
            comp.append(raws[x])
            for y in adj[x]:
                if not seen[y]:
                    seen[y] = True
                    stack.append(y)
        if len(comp) > 1:
            groups.append(sorted(comp))
    return sorted(groups)


def read_records_with_py(path):
    out = []
    with open(path, encoding="utf-8") as f:
        text = f.read()
    for block in text.split("\nER\n"):
        py = None
        for line in block.split("\n"):
            if line.startswith("PY "):
                py = int(line[3:].strip())
        out.append(py)
    return list(zip(out, read_records(path)))


def pipeline(path, rpy, py, threshold, remove_upto):
    """Windows, cluster, merge and removeCR by brute force. Returns the
    surviving {representative raw: ncr} and the per-year NCR over the RPY
    window."""
    citing = {}
    for rec_py, (ut, cr) in read_records_with_py(path):
        if not (py[0] <= rec_py <= py[1]):
            continue
        for raw in cr:
            y = split_reference(raw)["year"]
            if y is None or not (rpy[0] <= y <= rpy[1]):
                continue
            citing.setdefault(raw, set()).add(ut)
    raws = sorted(citing)
    grouped = {r: [r] for r in raws}
    for g in cluster_partition(raws, threshold, True, True, False):
        for r in g:
            del grouped[r]
        rep = sorted(g, key=lambda r: (-len(citing[r]), r))[0]
        grouped[rep] = g
    table = {}
    for rep, members in grouped.items():
        ncr = len(set().union(*(citing[m] for m in members)))
        if ncr > remove_upto:
            table[rep] = ncr
    graph = {y: 0 for y in range(rpy[0], rpy[1] + 1)}
    for rep, ncr in table.items():
        graph[split_reference(rep)["year"]] += ncr
    return table, graph


if __name__ == "__main__":
    for p in sys.argv[1:]:
        print(p, json.dumps(count_export(p), sort_keys=True))
