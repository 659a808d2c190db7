"""Regenerates the frozen Shapiro-Wilk and paired t-test reference values
used in tests/stats_reference.rs (scipy.stats as the reference implementation)."""
import numpy as np
from scipy import stats


def formula_sample(n, a, b):
    # integer arithmetic only, so the Rust side reproduces it exactly
    return [((i * a) % 997) / 997.0 + ((i * b) % 13) / 13.0 for i in range(1, n + 1)]


def sw_fixtures():
    rng = np.random.default_rng(20241014)
    out = []
    out.append(("n3", [1.0, 2.0, 4.0]))
    out.append(("n4", [0.5, 1.25, 1.5, 3.0]))
    out.append(("n5", [2.1, 3.4, 1.9, 5.6, 2.8]))
    out.append(("n7", [10.0, 11.5, 9.75, 12.25, 10.5, 14.0, 30.0]))
    out.append(("n11", [round(v, 6) for v in rng.normal(0, 1, 11)]))
    out.append(("n12", [round(v, 6) for v in rng.normal(5, 2, 12)]))
    out.append(("n20_exp", [round(v, 6) for v in rng.exponential(1.0, 20)]))
    out.append(("n30_uniform", [round(v, 6) for v in rng.uniform(-1, 1, 30)]))
    out.append(("n50", [round(v, 6) for v in rng.normal(0, 3, 50)]))
    out.append(("n64_ties", [float(v) for v in rng.integers(0, 6, 64)]))
    out.append(("formula200", formula_sample(200, 7919, 5)))
    out.append(("formula1000", formula_sample(1000, 104729, 3)))
    return out


def tt_fixtures():
    rng = np.random.default_rng(7)
    out = []
    out.append(("pairs10", [0.81, 0.84, 0.79, 0.86, 0.83, 0.85, 0.80, 0.82, 0.87, 0.84],
                [0.78, 0.80, 0.79, 0.81, 0.80, 0.83, 0.77, 0.80, 0.82, 0.81]))
    out.append(("pairs2", [1.0, 3.0], [0.0, 0.5]))
    out.append(("pairs3", [5.0, 6.0, 7.5], [5.5, 5.0, 7.0]))
    for i in range(8):
        n = [4, 5, 8, 10, 15, 25, 40, 100][i]
        a = [round(v, 6) for v in rng.normal(0, 1, n)]
        b = [round(v + 0.3 * (i % 3) + 0.1 * rng.normal(), 6) for v in a]
        out.append((f"rand{i}_n{n}", a, b))
    return out


if __name__ == "__main__":
    import json
    sw = []
    for name, x in sw_fixtures():
        w, p = stats.shapiro(x)
        sw.append({"name": name, "sample": [float(v) for v in x], "w": float(w), "p": float(p)})
    tt = []
    for name, a, b in tt_fixtures():
        r = stats.ttest_rel(a, b)
        tt.append({"name": name, "a": [float(v) for v in a], "b": [float(v) for v in b],
                   "t": float(r.statistic), "p": float(r.pvalue)})
    with open("stats_reference.json", "w") as f:
        json.dump({"shapiro_wilk": sw, "paired_t": tt}, f, indent=1)
