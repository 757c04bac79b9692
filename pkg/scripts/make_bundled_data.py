"""Regenerate the bundled 24-bus case and the synthetic demand years.

    python scripts/make_bundled_data.py

Writes ``rts24.case``, ``demand_history.csv`` (reference year used for
climatology) and ``demand_observed.csv`` (study year) into
``src/seasonplan/data``. Output is fully determined by ``SEED``.
"""

from pathlib import Path

import numpy as np

SEED = 24
OUT = Path(__file__).resolve().parents[1] / "src" / "seasonplan" / "data"

# RTS-24 branch data: from, to, reactance (pu on 100 MVA), rating (MW)
BRANCHES = [
    (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175), (2, 4, 0.1267, 175),
    (2, 6, 0.1920, 175), (3, 9, 0.1190, 175), (3, 24, 0.0839, 400), (4, 9, 0.1037, 175),
    (5, 10, 0.0883, 175), (6, 10, 0.0605, 175), (7, 8, 0.0614, 175), (8, 9, 0.1651, 175),
    (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400), (10, 11, 0.0839, 400),
    (10, 12, 0.0839, 400), (11, 13, 0.0476, 500), (11, 14, 0.0418, 500), (12, 13, 0.0476, 500),
    (12, 23, 0.0966, 500), (13, 23, 0.0865, 500), (14, 16, 0.0389, 500), (15, 16, 0.0173, 500),
    (15, 21, 0.0490, 500), (15, 21, 0.0490, 500), (15, 24, 0.0519, 500), (16, 17, 0.0259, 500),
    (16, 19, 0.0231, 500), (17, 18, 0.0144, 500), (17, 22, 0.1053, 500), (18, 21, 0.0259, 500),
    (18, 21, 0.0259, 500), (19, 20, 0.0396, 500), (19, 20, 0.0396, 500), (20, 23, 0.0216, 500),
    (20, 23, 0.0216, 500), (21, 22, 0.0678, 500),
]

# RTS-24 bus loads at system peak (MW), used as demand shares
BUS_LOAD = {1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175, 10: 195,
            13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128}

# id, bus, fuel, p_min, p_max, RU, RD, UT, DT, startup, fixed, blocks, budget
UNITS = [
    ("N18", 18, "nuclear", 400, 400, 40, 40, 168, 168, 50000, 400, "400:5.5", ""),
    ("N21", 21, "nuclear", 400, 400, 40, 40, 168, 168, 50000, 400, "400:5.6", ""),
    ("H22", 22, "hydro", 30, 300, 150, 150, 1, 1, 100, 10, "300:1.0", "97200"),
    ("C1", 1, "coal", 90, 228, 60, 60, 8, 8, 2200, 180, "90:17.0|69:18.5|69:20.0", ""),
    ("C16", 16, "coal", 120, 310, 80, 80, 8, 8, 3000, 220, "124:16.5|93:18.0|93:19.5", ""),
    ("C23A", 23, "coal", 120, 310, 80, 80, 12, 12, 3000, 220, "124:15.5|93:17.0|93:18.5", ""),
    ("C23B", 23, "coal", 140, 350, 70, 70, 24, 24, 4000, 250, "140:15.0|105:16.5|105:18.0", ""),
    ("G7", 7, "gas", 100, 300, 150, 150, 4, 4, 1200, 150, "100:26.0|100:28.0|100:30.0", ""),
    ("G13", 13, "gas", 200, 591, 300, 300, 4, 4, 2500, 250, "200:25.0|200:27.0|191:29.0", ""),
    ("G2", 2, "gas", 40, 216, 216, 216, 1, 1, 300, 60, "108:44.0|108:49.0", ""),
]

# units already online when a month starts: id, u0, g0, ut0, dt0
INITIAL = [("N18", 1, 400, 168, 0), ("N21", 1, 400, 168, 0), ("C23B", 1, 140, 24, 0),
           ("C23A", 1, 120, 12, 0)]

# hour-of-day shapes (fraction of daily peak), RTS-style
WINTER = [.67, .63, .60, .59, .59, .60, .74, .86, .95, .96, .96, .95,
          .95, .95, .93, .94, .99, 1.0, 1.0, .96, .91, .83, .73, .63]
SUMMER = [.64, .60, .58, .56, .56, .58, .64, .76, .87, .95, .99, 1.0,
          .99, 1.0, 1.0, .97, .96, .96, .93, .92, .92, .93, .87, .72]
# monthly peak level relative to the annual peak
MONTH_PEAK = [0.95, 0.92, 0.80, 0.74, 0.78, 0.88, 0.96, 0.93, 0.79, 0.73, 0.84, 0.97]
ANNUAL_PEAK = 2650.0
SHAPE_FLOOR = 0.65  # overnight trough relative to the daily peak
SUMMER_WEIGHT = [0.0, 0.0, 0.2, 0.4, 0.7, 1.0, 1.0, 1.0, 0.8, 0.4, 0.1, 0.0]


def write_case() -> None:
    total = sum(BUS_LOAD.values())
    lines = ["# 24-bus test system derived from the IEEE RTS-24 single area.",
             "# Fleet aggregated per generator bus; coal is about 35% of capacity.",
             "[meta]", "name,rts24", "reference_bus,13", "base_mva,100.0", "", "[buses]"]
    lines += [str(b) for b in range(1, 25)]
    lines += ["", "[lines]", "# id,from_bus,to_bus,susceptance_pu,capacity_mw"]
    for k, (f, t, x, cap) in enumerate(BRANCHES, start=1):
        lines.append(f"L{k},{f},{t},{1.0 / x!r},{float(cap)!r}")
    lines += ["", "[generators]",
              "# id,bus,fuel,p_min,p_max,ramp_up,ramp_down,min_up,min_down,"
              "startup_cost,fixed_cost,blocks,energy_budget"]
    for row in UNITS:
        lines.append(",".join(str(x) for x in row))
    lines += ["", "[shares]", "# bus,fraction of system demand"]
    shares = {b: mw / total for b, mw in BUS_LOAD.items()}
    # absorb rounding into the largest share so the fractions sum to 1
    drift = 1.0 - sum(shares.values())
    shares[18] += drift
    lines += [f"{b},{f!r}" for b, f in shares.items()]
    lines += ["", "[initial]", "# unit,u0,g0,ut0,dt0"]
    lines += [",".join(str(x) for x in row) for row in INITIAL]
    (OUT / "rts24.case").write_text("\n".join(lines) + "\n")


def demand_year(rng: np.random.Generator) -> np.ndarray:
    """One 360-day year of hourly system demand (12 months x 720 h)."""
    days = 360
    weather = np.zeros(days)
    for d in range(1, days):
        weather[d] = 0.65 * weather[d - 1] + rng.normal(0.0, 0.06)
    out = np.zeros(days * 24)
    winter, summer = np.array(WINTER), np.array(SUMMER)
    for d in range(days):
        m = d // 30
        shape = SUMMER_WEIGHT[m] * summer + (1 - SUMMER_WEIGHT[m]) * winter
        weekend = (d % 7) in (5, 6)
        level = ANNUAL_PEAK * MONTH_PEAK[m] * (0.86 if weekend else 1.0)
        # weather moves the whole day and stretches the peak above the base
        z = weather[d]
        shape = SHAPE_FLOOR + (1 - SHAPE_FLOOR) * (shape - shape.min()) / (1.0 - shape.min())
        profile = SHAPE_FLOOR + (shape - SHAPE_FLOOR) * (1.0 + 2.0 * z)
        hourly = level * (1.0 + z) * profile * (1.0 + rng.normal(0.0, 0.008, 24))
        out[d * 24:(d + 1) * 24] = hourly
    return np.clip(out, 1000.0, 3150.0)


def write_demand(name: str, series: np.ndarray) -> None:
    rows = ["hour,demand_mw"] + [f"{t},{x:.3f}" for t, x in enumerate(series)]
    (OUT / name).write_text("\n".join(rows) + "\n")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)
    write_case()
    write_demand("demand_history.csv", demand_year(rng))
    write_demand("demand_observed.csv", demand_year(rng))


if __name__ == "__main__":
    main()
