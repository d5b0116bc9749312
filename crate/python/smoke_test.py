"""Builds the extension with cargo, imports it and runs it on a planted graph.

    python3 python/smoke_test.py
"""

import os
import random
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(["cargo", "build", "-p", "sgr-py", "--release"], cwd=ROOT, check=True)
    target = os.environ.get("CARGO_TARGET_DIR", os.path.join(ROOT, "target"))
    lib = os.path.join(target, "release", "libsgr_py.so")
    dest = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(dest, "sgr_py.so"))
    sys.path.insert(0, dest)


def planted(blocks=3, per_block=20, words=8, seed=0):
    rng = random.Random(seed)
    nodes = [f"v{b}_{i}" for b in range(blocks) for i in range(per_block)]
    block = {v: int(v[1:].split("_")[0]) for v in nodes}
    edges = []
    for i, u in enumerate(nodes):
        for v in nodes[i + 1:]:
            p = 0.3 if block[u] == block[v] else 0.01
            if rng.random() < p:
                edges.append((u, v))
    attrs = []
    for v in nodes:
        for w in rng.sample(range(words), 4):
            attrs.append((v, f"b{block[v]}w{w}", 1.0))
    labels = [(v, f"c{block[v]}") for v in nodes]
    return edges, attrs, labels


def main():
    build()
    import sgr_py

    edges, attrs, labels = planted()
    g = sgr_py.Graph(edges, attrs, labels)
    assert (g.n, g.m) == (60, 24), g
    print(g)

    emb = sgr_py.embed(g, dim=16)
    x = emb.node_vectors()
    assert len(x) == g.n and len(x[0]) == 16
    assert len(emb.attr_vectors()) == g.m

    report = dict(sgr_py.evaluate(emb, g, repeats=3))
    print("clustering", report)
    assert report["nmi"] > 0.8, report

    enhanced = emb.enhance(g, lambda1=0.5, lambda2=0.5)
    report = dict(sgr_py.evaluate(enhanced, g, task="classification", repeats=3, train_fraction=0.3))
    print("classification", report)
    assert report["ac"] > 0.8, report

    for c, words in enumerate(sgr_py.describe(emb, g, keywords=3)):
        print("community", c, words)
        assert len(words) == 3

    assign, _ = sgr_py.kmeans(x, 3, seed=1)
    truth = [int(v[1:].split("_")[0]) for v in g.node_ids]
    assert abs(sgr_py.nmi(assign, assign) - 1.0) < 1e-12
    print("kmeans ac", sgr_py.clustering_accuracy(assign, truth))

    try:
        sgr_py.Graph.load("/nonexistent/edges", "/nonexistent/attrs")
    except OSError as e:
        print("expected:", e)
    else:
        raise AssertionError("missing file accepted")
    print("ok")


if __name__ == "__main__":
    main()
