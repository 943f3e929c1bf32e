#!/usr/bin/env python3
"""Rebuild the a9a binary classification set from the raw UCI Adult training file.

a9a is the 32561-row Adult training split with every attribute one-hot encoded
into 123 binary features: the six continuous attributes are quantized (five
quantile bins, or zero / nonzero for the two capital columns) and the eight
categorical attributes get one indicator per level. Missing values ('?') set no
feature. Labels are +1 for '>50K' and -1 otherwise.

Bin edges are the empirical quintiles of this file, so individual rows can
differ from the LIBSVM-distributed copy; shape, sparsity and label balance match.

    python3 scripts/make_a9a.py adult.data data/a9a.gz
"""

import gzip
import sys

import numpy as np

CONTINUOUS_QUINTILES = {"age", "fnlwgt", "education-num", "hours-per-week"}
CONTINUOUS_ZERO_NONZERO = {"capital-gain", "capital-loss"}

COLUMNS = [
    ("age", None),
    ("workclass", ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
                   "Local-gov", "State-gov", "Without-pay", "Never-worked"]),
    ("fnlwgt", None),
    ("education", ["Bachelors", "Some-college", "11th", "HS-grad", "Prof-school",
                   "Assoc-acdm", "Assoc-voc", "9th", "7th-8th", "12th", "Masters",
                   "1st-4th", "10th", "Doctorate", "5th-6th", "Preschool"]),
    ("education-num", None),
    ("marital-status", ["Married-civ-spouse", "Divorced", "Never-married", "Separated",
                        "Widowed", "Married-spouse-absent", "Married-AF-spouse"]),
    ("occupation", ["Tech-support", "Craft-repair", "Other-service", "Sales",
                    "Exec-managerial", "Prof-specialty", "Handlers-cleaners",
                    "Machine-op-inspct", "Adm-clerical", "Farming-fishing",
                    "Transport-moving", "Priv-house-serv", "Protective-serv",
                    "Armed-Forces"]),
    ("relationship", ["Wife", "Own-child", "Husband", "Not-in-family", "Other-relative",
                      "Unmarried"]),
    ("race", ["White", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other", "Black"]),
    ("sex", ["Female", "Male"]),
    ("capital-gain", None),
    ("capital-loss", None),
    ("hours-per-week", None),
    ("native-country", ["United-States", "Cambodia", "England", "Puerto-Rico", "Canada",
                        "Germany", "Outlying-US(Guam-USVI-etc)", "India", "Japan", "Greece",
                        "South", "China", "Cuba", "Iran", "Honduras", "Philippines",
                        "Italy", "Poland", "Jamaica", "Vietnam", "Mexico", "Portugal",
                        "Ireland", "France", "Dominican-Republic", "Laos", "Ecuador",
                        "Taiwan", "Haiti", "Columbia", "Hungary", "Guatemala",
                        "Nicaragua", "Scotland", "Thailand", "Yugoslavia", "El-Salvador",
                        "Trinadad&Tobago", "Peru", "Hong", "Holand-Netherlands"]),
]


def read_rows(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            parts = [p.strip() for p in line.strip().rstrip(".").split(",")]
            if len(parts) != 15:
                continue
            rows.append(parts)
    return rows


def main(src, dst):
    rows = read_rows(src)
    edges = {}
    for col, (name, _) in enumerate(COLUMNS):
        if name in CONTINUOUS_QUINTILES:
            values = np.array([float(r[col]) for r in rows])
            edges[name] = np.unique(np.percentile(values, [20, 40, 60, 80]))
            # Integer-valued columns can collapse quintile edges; pad to exactly five bins.
            while len(edges[name]) < 4:
                edges[name] = np.append(edges[name], edges[name][-1] + 1)

    out = []
    for r in rows:
        base = 1
        feats = []
        for col, (name, levels) in enumerate(COLUMNS):
            raw = r[col]
            if name in CONTINUOUS_QUINTILES:
                feats.append(base + int(np.searchsorted(edges[name], float(raw), side="right")))
                base += 5
            elif name in CONTINUOUS_ZERO_NONZERO:
                feats.append(base + (0 if float(raw) == 0 else 1))
                base += 2
            else:
                if raw in levels:
                    feats.append(base + levels.index(raw))
                base += len(levels)
        assert base == 124, base
        label = "+1" if r[14].startswith(">50K") else "-1"
        out.append(label + " " + " ".join(f"{f}:1" for f in sorted(feats)))

    payload = ("\n".join(out) + "\n").encode()
    if dst.endswith(".gz"):
        with open(dst, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
            fh.write(payload)
    else:
        with open(dst, "wb") as fh:
            fh.write(payload)
    print(f"wrote {len(out)} rows to {dst}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
