"""Smoke test for the oncograph Python module.

Build and install with `maturin develop -m crates/python/Cargo.toml`, or copy
`target/release/liboncograph_py.so` to `oncograph.so` on PYTHONPATH after
`cargo build -p oncograph-py --release --features extension-module`.
"""

import math
import sys

import oncograph


def check(cond, msg):
    if not cond:
        sys.exit(f"smoke test failed: {msg}")


def main():
    cohort = oncograph.Cohort.synthetic(seed=42)
    vocab = oncograph.Vocabulary(cohort)
    graph = oncograph.Graph(cohort, vocab)
    print(f"{len(cohort)} patients, {len(vocab)} features, {graph.num_nodes} nodes")
    check(cohort.record(0)["patient_id"] in cohort.report(0), "report lacks the patient id")

    patients = graph.patient_nodes()
    labels = graph.labels()
    train, val, test = oncograph.stratified_split([labels[i] for i in patients], seed=42)
    train, val, test = ([patients[i] for i in s] for s in (train, val, test))

    model = oncograph.GnnModel("gcn", graph.num_features, hidden_dim=16, epochs=60, seed=1)
    trace = model.fit(graph, train, val)
    classes, probs = model.predict(graph, test)
    check(all(abs(sum(row) - 1.0) < 1e-9 for row in probs), "probabilities do not sum to 1")
    m = oncograph.metrics([labels[i] for i in test], classes)
    print(f"GCN: {len(trace)} epochs, test accuracy {m['accuracy']:.3f}")
    check(m["accuracy"] > 0.5, "GCN accuracy too low")

    small = oncograph.Graph.from_edges(4, [(0, 1), (1, 2)], [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]])
    gat = oncograph.GnnModel("gat", 2, hidden_dim=4, heads=2, seed=3)
    for layer in gat.attention(small):
        check(len(layer) == 2, "expected two heads")

    x = vocab.encode(cohort)
    y = cohort.labels()
    nb = oncograph.Baseline("naive-bayes")
    nb.fit(x, y)
    acc = oncograph.metrics(y, nb.predict(x))["accuracy"]
    print(f"Naive Bayes training accuracy {acc:.3f}")
    check(acc > 0.5, "naive Bayes accuracy too low")

    auc = oncograph.roc_auc([[0.9, 0.1], [0.2, 0.8], [0.4, 0.6]], [0, 1, 1], 1)
    check(auc is not None and math.isclose(auc, 1.0), f"unexpected AUC {auc}")
    print("ok")


if __name__ == "__main__":
    main()
