"""Synthetic trial data shaped like the two motivating studies.

Neither generator reproduces real study data. They exist so the ingestion
transforms (slope and percentile outcomes, string treatment codes, missing
values) and both estimation pipelines can run end to end.
"""

from __future__ import annotations

import csv

import numpy as np

HRSD_WEEKS = (0, 1, 2, 3, 4, 6, 8, 10, 12)


def _write(columns: dict[str, np.ndarray | list], path) -> None:
    names = list(columns)
    n = len(columns[names[0]])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for i in range(n):
            row = []
            for c in names:
                v = columns[c][i]
                if isinstance(v, str):
                    row.append(v)
                elif isinstance(v, (int, np.integer)):
                    row.append(str(int(v)))
                elif np.isnan(v):
                    row.append("NA")
                else:
                    row.append(f"{float(v):.6f}")
            w.writerow(row)


def catie_like(n: int = 1000, seed: int = 7) -> dict[str, np.ndarray]:
    """Two-stage columns: baseline dummies, shifted percentile covariates, raw end-of-study scores.

    Stage-2 treatment strongly helps symptoms for patients with high recent
    symptom scores and raises weight for patients with high recent BMI, so a
    sizeable group faces a symptom/weight trade-off at stage 2.
    """
    rng = np.random.default_rng(seed)
    td = (rng.random(n) < 0.15).astype(int)
    exacer = (rng.random(n) < 0.25).astype(int)
    panss1 = rng.uniform(-50, 50, n)
    bmi1 = rng.uniform(-50, 50, n)
    a1 = np.where(rng.random(n) < 0.5, 1, -1)
    panss2 = np.clip(0.8 * panss1 - 2.0 * a1 + rng.normal(0, 12, n), -50, 50)
    bmi2 = np.clip(0.9 * bmi1 + 1.5 * a1 + rng.normal(0, 8, n), -50, 50)
    a2 = np.where(rng.random(n) < 0.5, 1, -1)

    panss_base = rng.normal(75, 15, n)
    bmi_base = rng.normal(29, 6, n)
    # higher raw score is worse for both outcomes
    panss_end = (75 + 0.25 * panss2 - 3.0 * td + 1.0 * exacer + 1.5 * a1
                 - a2 * (2.0 + 1.2 * panss2) + rng.normal(0, 6, n))
    bmi_end = (29 + 0.10 * bmi2 + 0.2 * td - 0.3 * a1
               + a2 * (0.1 - 0.02 * bmi2) + rng.normal(0, 1.2, n))
    return {
        "td": td, "exacer": exacer, "panss1": panss1, "bmi1": bmi1, "a1": a1,
        "panss2": panss2, "bmi2": bmi2, "a2": a2,
        "panss_end": panss_end, "bmi_end": bmi_end, "panss_base": panss_base, "bmi_base": bmi_base,
    }


def nefazodone_like(n: int = 450, seed: int = 11) -> dict[str, np.ndarray | list]:
    """One-stage columns with weekly HRSD (some visits missing), PF at week 12, string treatment."""
    rng = np.random.default_rng(seed)
    hamd = rng.normal(26, 4, n)
    rolfun = rng.uniform(0, 100, n)
    phyfun = rng.uniform(20, 100, n)
    gender = (rng.random(n) < 0.65).astype(int)
    slpsc = rng.uniform(0, 6, n)
    genhel = rng.uniform(10, 100, n)
    mdage = rng.uniform(10, 50, n)
    dyst = (rng.random(n) < 0.4).astype(int)
    a = np.where(rng.random(n) < 0.5, 1, -1)
    trt = ["Drug+CBT" if v == 1 else "Drug" for v in a]

    slope = -0.8 - 0.01 * (hamd - 26) - a * (0.25 + 0.004 * (rolfun - 50)) + rng.normal(0, 0.25, n)
    cols: dict[str, np.ndarray | list] = {
        "hamd": hamd, "rolfun": rolfun, "phyfun": phyfun, "gender": gender, "slpsc": slpsc,
        "genhel": genhel, "mdage": mdage, "dyst": dyst, "trt": trt,
    }
    for w in HRSD_WEEKS:
        vals = hamd + slope * w + rng.normal(0, 1.5, n)
        if w > 0:
            vals[rng.random(n) < 0.12] = np.nan
        cols[f"hrsd_w{w}"] = vals
    pf12 = (0.8 * phyfun + 0.1 * genhel - 2.0 * dyst + a * (1.0 + 1.6 * (slpsc - 3) - 0.05 * (phyfun - 60))
            + rng.normal(0, 6, n))
    pf12[rng.random(n) < 0.25] = np.nan
    cols["pf12"] = pf12
    return cols


def write_catie_like(path, n: int = 1000, seed: int = 7) -> None:
    _write(catie_like(n, seed), path)


def write_nefazodone_like(path, n: int = 450, seed: int = 11) -> None:
    _write(nefazodone_like(n, seed), path)
