"""Writes data/surrogate_base.csv, a synthetic stand-in for the 335-study
heart-failure mortality base used by the plasmode grid.

Covariate ranges and missing counts follow the published descriptives of the
original data; joint structure and outcomes are made up. Do not use it for
substantive conclusions.
"""

import json
from pathlib import Path

import numpy as np

ROWS = 335
SEED = 20240611

rng = np.random.default_rng(SEED)
root = Path(__file__).resolve().parent.parent

time = rng.integers(1981, 2015, ROWS)
ts = (time - time.mean()) / time.std()
multi = rng.random(ROWS) < 0.55 + 0.1 * np.tanh(ts)
trial = rng.random(ROWS) < np.where(multi, 0.45, 0.2)
male = np.clip(rng.beta(6.0, 3.0, ROWS) + 0.02 * ts, 0.075, 0.986)
age = np.clip(rng.normal(70.0, 7.0, ROWS) + 2.0 * ts, 51.86, 89.0)
disc = rng.random(ROWS) < 0.5
sbp = np.clip(rng.normal(124.0, 11.0, ROWS) - 0.3 * (age - 70.0), 90.0, 170.0)
n = np.maximum(20, np.round(np.exp(rng.normal(5.6, 1.0, ROWS)))).astype(int)

za = (age - age.mean()) / age.std()
zm = (male - male.mean()) / male.std()
eta = -1.0 - 0.25 * disc + 0.2 * za - 0.1 * zm - 0.05 * ts + rng.normal(0.0, 0.4, ROWS)
p = 1.0 / (1.0 + np.exp(-eta))
v = 1.0 / (n * p * (1.0 - p))
y = eta + rng.normal(0.0, np.sqrt(v))


def with_missing(values, count, fmt):
    out = [fmt(x) for x in values]
    for i in rng.choice(ROWS, count, replace=False):
        out[i] = "NA"
    return out


cols = {
    "study": [f"S{i + 1:03d}" for i in range(ROWS)],
    "y": [f"{x:.6f}" for x in y],
    "v": [f"{x:.6f}" for x in v],
    "n": [str(x) for x in n],
    "Time": [str(x) for x in time],
    "Multi": ["multi" if x else "mono" for x in multi],
    "Trial": ["trial" if x else "survey" for x in trial],
    "Male": with_missing(male, 16, lambda x: f"{x:.3f}"),
    "Age": with_missing(age, 23, lambda x: f"{x:.2f}"),
    "Disc": with_missing(disc, 34, lambda x: "yes" if x else "no"),
    "SBP": with_missing(sbp, 190, lambda x: f"{x:.1f}"),
}

with open(root / "data" / "surrogate_base.csv", "w") as f:
    f.write(",".join(cols) + "\n")
    for i in range(ROWS):
        f.write(",".join(c[i] for c in cols.values()) + "\n")

schema = {
    "y": "y",
    "v": "v",
    "n": "n",
    "covariates": [
        {"name": "Time", "scale": "metric"},
        {"name": "Trial", "scale": "binary", "reference": "survey"},
        {"name": "Male", "scale": "metric"},
        {"name": "Age", "scale": "metric"},
        {"name": "SBP", "scale": "metric"},
        {"name": "Multi", "scale": "binary", "reference": "mono"},
        {"name": "Disc", "scale": "binary", "reference": "no"},
    ],
}
with open(root / "data" / "surrogate_schema.json", "w") as f:
    json.dump(schema, f, indent=2)
    f.write("\n")
