"""Regenerate the synthetic CSV fixtures under data/.

Both files are deterministic. The Treasury-like panel mimics only the
shape of the real daily yields data (12 maturity columns, a positive
volatility index, 1019 complete rows plus a few incomplete ones); the
values themselves are synthetic. The second fixture is a noiseless
two-factor panel exported from the simulation generators, used by CLI
examples that need a known answer.
"""

import os
import sys
from datetime import date, timedelta

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ffselect.simlab import gen_scenario1  # noqa: E402

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data")

MATURITIES = ["1_mo", "2_mo", "3_mo", "6_mo", "1_yr", "2_yr",
              "3_yr", "5_yr", "7_yr", "10_yr", "20_yr", "30_yr"]
TAU = np.array([1 / 12, 2 / 12, 3 / 12, 6 / 12, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 20.0, 30.0])

COMPLETE_ROWS = 1019
INCOMPLETE_ROWS = 6


def business_days(start: date, count: int) -> list[date]:
    out, day = [], start
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day)
        day += timedelta(days=1)
    return out


def make_treasury(path: str) -> None:
    rng = np.random.default_rng(20181016)
    total = COMPLETE_ROWS + INCOMPLETE_ROWS
    days = business_days(date(2018, 10, 16), total)

    # volatility index: mean-reverting log level, always positive
    log_vix = np.empty(total)
    log_vix[0] = np.log(20.0)
    for t in range(1, total):
        log_vix[t] = 0.98 * log_vix[t - 1] + 0.02 * np.log(19.0) + 0.06 * rng.standard_normal()
    vix = np.exp(log_vix)

    # level, slope and curvature drift slowly; the level leans on volatility
    level = 1.8 + 0.012 * np.cumsum(rng.standard_normal(total)) + 0.35 * (log_vix - np.log(19.0))
    slope = 0.9 + 0.010 * np.cumsum(rng.standard_normal(total))
    curve = 0.4 + 0.008 * np.cumsum(rng.standard_normal(total))
    decay = np.exp(-TAU / 3.0)
    yields = (
        level[:, None]
        - slope[:, None] * decay[None, :]
        + curve[:, None] * (TAU * np.exp(-TAU / 3.0))[None, :]
        + 0.03 * rng.standard_normal((total, len(TAU)))
    )
    yields = np.maximum(yields, 0.01)

    # knock one maturity out of a few scattered rows
    incomplete = rng.choice(total, size=INCOMPLETE_ROWS, replace=False)
    gap_col = rng.integers(0, len(TAU), size=INCOMPLETE_ROWS)
    gaps = dict(zip(incomplete.tolist(), gap_col.tolist()))

    lines = ["date,vix," + ",".join(MATURITIES)]
    for t in range(total):
        cells = [days[t].isoformat(), f"{vix[t]:.2f}"]
        for s in range(len(TAU)):
            cells.append("" if gaps.get(t) == s else f"{yields[t, s]:.2f}")
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path}: {total} data rows ({COMPLETE_ROWS} complete)")


def make_noiseless_panel(path: str) -> None:
    rng = np.random.default_rng(7)
    panel, truth = gen_scenario1(200, 8, 0.0, "e1", rng)
    names = ["u"] + [f"s{j + 1:02d}" for j in range(panel.m)]
    lines = [",".join(names)]
    for i in range(panel.n):
        cells = [repr(float(panel.u[i]))] + [repr(float(panel.y[i, j])) for j in range(panel.m)]
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path}: {panel.n} rows, {panel.m} series, true order {truth.p0}")


def main() -> None:
    os.makedirs(OUT_DIR, exist_ok=True)
    make_treasury(os.path.join(OUT_DIR, "treasury_synthetic.csv"))
    make_noiseless_panel(os.path.join(OUT_DIR, "s1_theta0.csv"))


if __name__ == "__main__":
    main()
