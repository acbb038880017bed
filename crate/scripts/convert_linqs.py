#!/usr/bin/env python3
"""Convert a LINQS citation dataset (cora / citeseer) to the TSV format the
simulator loads.

The LINQS distribution ships two files per dataset:
  <name>.content : <paper_id> <TAB> <f1..fd binary> <TAB-separated> <class>
  <name>.cites   : <cited> <TAB> <citing>

Output:
  nodes.tsv : node_id <TAB> label_id <TAB> f1 f2 ... fd
  edges.tsv : u <TAB> v   (undirected, deduplicated, u < v)

Paper ids are assigned 0..n-1 in .content order; class names map to label
ids in sorted order. Citations whose endpoints are missing from .content
(citeseer has a handful) and self-citations are dropped with a note, and
reciprocal duplicates are collapsed, so the edge count printed here is the
number of distinct undirected links.

Usage:
  python3 scripts/convert_linqs.py /path/to/cora.content /path/to/cora.cites data/cora
"""

import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 4:
        print(__doc__)
        return 2
    content_path, cites_path, out_dir = sys.argv[1], sys.argv[2], Path(sys.argv[3])
    out_dir.mkdir(parents=True, exist_ok=True)

    ids = {}
    rows = []
    labels = []
    with open(content_path) as f:
        for line in f:
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3:
                continue
            paper, feats, label = parts[0], parts[1:-1], parts[-1]
            ids[paper] = len(rows)
            rows.append(feats)
            labels.append(label)
    label_names = sorted(set(labels))
    label_id = {name: i for i, name in enumerate(label_names)}

    edges = set()
    dangling = 0
    self_loops = 0
    raw = 0
    with open(cites_path) as f:
        for line in f:
            parts = line.split()
            if len(parts) != 2:
                continue
            raw += 1
            a, b = parts
            if a not in ids or b not in ids:
                dangling += 1
                continue
            u, v = ids[a], ids[b]
            if u == v:
                self_loops += 1
                continue
            edges.add((min(u, v), max(u, v)))

    with open(out_dir / "nodes.tsv", "w") as f:
        for i, feats in enumerate(rows):
            f.write(f"{i}\t{label_id[labels[i]]}\t{' '.join(feats)}\n")
    with open(out_dir / "edges.tsv", "w") as f:
        for u, v in sorted(edges):
            f.write(f"{u}\t{v}\n")

    print(f"nodes: {len(rows)}")
    print(f"features: {len(rows[0]) if rows else 0}")
    print(f"classes: {len(label_names)} ({', '.join(label_names)})")
    print(f"citation lines: {raw} (dropped: {dangling} dangling, {self_loops} self)")
    print(f"distinct undirected edges: {len(edges)}")
    print(f"wrote {out_dir}/nodes.tsv and {out_dir}/edges.tsv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
