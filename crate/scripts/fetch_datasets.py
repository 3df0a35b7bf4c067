#!/usr/bin/env python3
"""Export the Wine and Breast Cancer data sets as headered CSV files.

Both data sets ship with scikit-learn, so no network access is needed:

    python3 scripts/fetch_datasets.py [OUT_DIR]

Writes OUT_DIR/wine.csv and OUT_DIR/breast_cancer.csv (default OUT_DIR=data).
The label column is called "class" and holds the class names.
"""
import csv
import os
import sys

from sklearn.datasets import load_breast_cancer, load_wine


def export(bunch, path):
    names = [n.replace(" ", "_") for n in bunch.feature_names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ["class"])
        for row, target in zip(bunch.data, bunch.target):
            writer.writerow([repr(float(v)) for v in row] + [bunch.target_names[target]])
    print(f"wrote {path}: {bunch.data.shape[0]} rows, {bunch.data.shape[1]} features")


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "data"
    os.makedirs(out, exist_ok=True)
    export(load_wine(), os.path.join(out, "wine.csv"))
    export(load_breast_cancer(), os.path.join(out, "breast_cancer.csv"))


if __name__ == "__main__":
    main()
