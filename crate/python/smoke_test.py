"""Smoke test for the privrec Python extension.

Install first:  pip install --no-build-isolation -e crates/python
Then run:       python python/smoke_test.py
"""

import math

import privrec


def check(cond, msg):
    if not cond:
        raise SystemExit(f"FAIL: {msg}")
    print(f"ok   {msg}")


def main():
    acc = privrec.accuracy_upper_bound(400_000_000, 100, 0.99, 150, 0.1)
    check(abs(acc - 0.46) < 0.005, f"trade-off bound {acc:.4f}")

    g = privrec.Graph(5, [(0, 1), (0, 2), (1, 3), (2, 3), (1, 4)])
    check((g.node_count, g.edge_count) == (5, 5), repr(g))
    u = privrec.utility_vector(g, 0)
    check(u == [(3, 2.0), (4, 1.0)], f"common neighbors {u}")

    probs = privrec.exponential_distribution([v for _, v in u], math.log(2))
    check(abs(sum(probs) - 1) < 1e-12 and abs(probs[0] - 2 / 3) < 1e-12, f"exponential {probs}")
    acc = privrec.expected_accuracy(probs, [v for _, v in u])
    check(abs(acc - 5 / 6) < 1e-12, f"expected accuracy {acc}")

    p2 = privrec.laplace_distribution([1.0, 0.0], 1.0)
    closed = privrec.laplace_two_node_probability(1.0, 1.0)
    check(abs(p2[0] - closed) < 1e-9, f"two-candidate Laplace {p2[0]:.6f}")

    x = privrec.smoothing_x(1.0, 4)
    check(abs(privrec.smoothing_epsilon(x, 4) - 1.0) < 1e-12, f"smoothing weight {x:.6f}")

    report = privrec.audit_mechanism(g, 0, "exponential", epsilon=0.5)
    check(report["passed"], f"exponential audit ratio {report['max_log_ratio']:.4f}")

    synth = privrec.Graph.synthetic(500, 3, seed=1)
    rows = privrec.run_experiment(synth, [0.5, 1.0], sample_fraction=0.05, trials=200, seed=7)
    check(len(rows) == 2 * 25, f"{len(rows)} experiment rows")
    check(all(r["exp_acc"] <= r["bound_acc"] + 0.01 for r in rows if not r["skipped"]), "accuracy within bound")

    try:
        privrec.utility_vector(g, 0, utility="katz")
    except ValueError:
        check(True, "unknown utility rejected")
    else:
        check(False, "unknown utility rejected")
    print("smoke test passed")


if __name__ == "__main__":
    main()
