#!/usr/bin/env python3
"""Convert the public dataset files into the headered CSVs fedad-bench reads.

  prepare_data.py thyroid    thyroid.mat                  OUT_DIR
  prepare_data.py arrhythmia arrhythmia.mat               OUT_DIR
  prepare_data.py kdd10      kddcup.data_10_percent       OUT_DIR
  prepare_data.py nslkdd     KDDTrain+.txt KDDTest+.txt   OUT_DIR
"""

import csv
import gzip
import json
import sys
from pathlib import Path

SCHEMAS = Path(__file__).resolve().parent.parent / "schemas"


def header(name):
    schema = json.loads((SCHEMAS / f"{name}.json").read_text())
    cols = [f["name"] for f in schema["features"]] + [schema["label_column"]]
    return cols + schema.get("ignore_columns", [])


def from_mat(name, src, out):
    from scipy.io import loadmat

    mat = loadmat(src)
    x, y = mat["X"], mat["y"].ravel()
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header(name))
        for row, label in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


def from_text(name, sources, out):
    cols = header(name)
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for src in sources:
            opener = gzip.open if str(src).endswith(".gz") else open
            with opener(src, "rt") as g:
                for row in csv.reader(g):
                    if not row:
                        continue
                    if len(row) != len(cols):
                        sys.exit(f"{src}: expected {len(cols)} columns, got {len(row)}")
                    w.writerow(row)


def main(argv):
    if len(argv) < 4 or argv[1] not in ("thyroid", "arrhythmia", "kdd10", "nslkdd"):
        sys.exit(__doc__)
    name, sources, out_dir = argv[1], argv[2:-1], Path(argv[-1])
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / f"{name}.csv"
    if name in ("thyroid", "arrhythmia"):
        from_mat(name, sources[0], out)
    else:
        from_text(name, sources, out)
    print(out)


if __name__ == "__main__":
    main(sys.argv)
