"""Report files: JSON and CSV writers/readers shared by the CLI and the plots."""

import csv
import json

import numpy as np


class ReportError(ValueError):
    """A report file is missing fields or has the wrong shape."""


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=False)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ReportError(f"{path}: invalid JSON ({exc})") from None


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path, expected_header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != list(expected_header):
        raise ReportError(f"{path}: expected header {','.join(expected_header)}")
    body = rows[1:]
    if any(len(r) != len(expected_header) for r in body):
        raise ReportError(f"{path}: ragged rows")
    return body


def latent_label(name):
    return "original" if name == "original" else int(name)


# embedding: t,x,y,cluster
EMBED_HEADER = ("t", "x", "y", "cluster")


def write_embedding(path, points, labels):
    write_csv(path, EMBED_HEADER,
              ([t, float(p[0]), float(p[1]), int(c)] for t, (p, c) in enumerate(zip(points, labels))))


def read_embedding(path):
    body = read_csv(path, EMBED_HEADER)
    if not body:
        raise ReportError(f"{path}: no points")
    arr = np.array([[float(v) for v in r] for r in body])
    return arr[:, 0].astype(int), arr[:, 1:3], arr[:, 3].astype(int)


def pca_record(name, ratios):
    return {"latent_dim": latent_label(name), "ratios": [float(r) for r in ratios]}


def cca_record(name_a, name_b, result):
    return {"pair": [str(name_a), str(name_b)],
            "correlations": [float(c) for c in result.correlations],
            "effective_rank": int(result.effective_rank)}


# tucker
SWEEP_HEADER = ("r", "entropy_truth", "entropy_model", "relerr_truth", "relerr_model")
FACTOR_HEADER = ("component", "abs_pearson")


def write_entropy_sweep(path, sweep):
    write_csv(path, SWEEP_HEADER, ([int(r[0])] + list(r[1:]) for r in sweep.rows()))


def read_entropy_sweep(path):
    body = read_csv(path, SWEEP_HEADER)
    if not body:
        raise ReportError(f"{path}: empty sweep")
    return np.array([[float(v) for v in r] for r in body])


def write_factor_comparison(path, values):
    write_csv(path, FACTOR_HEADER, ([i, float(v)] for i, v in enumerate(values)))


def read_factor_comparison(path):
    body = read_csv(path, FACTOR_HEADER)
    if not body:
        raise ReportError(f"{path}: no components")
    return np.array([float(r[1]) for r in body])


def ablation_record(result):
    return {
        "baseline_mse": result.baseline_mse,
        "per_dim": [{"dim": d, "total_mse": float(result.total_mse[d]),
                     "e_t": [float(v) for v in result.e_t[d]]}
                    for d in range(result.total_mse.size)],
    }
