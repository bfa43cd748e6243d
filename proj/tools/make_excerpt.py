#!/usr/bin/env python3
"""Writes a 10,000-row household power excerpt in the UCI layout.

The series is synthetic: a daily load cycle, autocorrelated noise and
sub-metered appliance runs. About 1.25% of the rows are '?' gaps away from the
file edges, and Global_intensity is exactly 4 x Global_active_power.
"""

import argparse
import datetime as dt

import numpy as np


def ar1(rng, n, phi, scale):
    e = rng.normal(0.0, scale, n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + e[i]
        out[i] = acc
    return out


def appliance(rng, n, rate, length, level):
    on = np.zeros(n)
    i = 0
    while i < n:
        i += int(rng.exponential(1.0 / rate))
        if i >= n:
            break
        run = int(rng.integers(length[0], length[1] + 1))
        on[i : i + run] = level
        i += run
    return on


def build(rows, seed):
    rng = np.random.default_rng(seed)
    t = np.arange(rows)
    hours = (17 + 24 / 60 + t / 60.0) % 24
    daily = 0.35 + 0.9 * np.clip(np.sin((hours - 6) / 24 * 2 * np.pi), 0, None) ** 2
    evening = 0.8 * np.exp(-0.5 * ((hours - 20) / 1.5) ** 2)

    sm1 = np.round(appliance(rng, rows, 1 / 400, (15, 60), 1) * rng.uniform(20, 38, rows))
    sm2 = np.round(appliance(rng, rows, 1 / 150, (20, 90), 1) * rng.uniform(1, 3, rows))
    sm3 = np.round(np.clip(6 + 11 * (hours > 6) * (hours < 23) + ar1(rng, rows, 0.995, 0.6), 0, 20))

    other = np.clip(daily + evening + ar1(rng, rows, 0.97, 0.05), 0.05, None)
    gap = np.round((sm1 + sm2 + sm3) * 60 / 1000 + other, 3)
    grp = np.round(np.clip(0.12 + 0.04 * np.sin(hours / 24 * 2 * np.pi) + ar1(rng, rows, 0.95, 0.02), 0, None), 3)
    volt = np.round(241.5 - 1.6 * gap + ar1(rng, rows, 0.98, 0.15), 2)

    missing = np.zeros(rows, dtype=bool)
    target = round(0.0125 * rows)
    while missing.sum() < target:
        start = int(rng.integers(200, rows - 200))
        run = int(rng.integers(1, 11))
        missing[start : start + min(run, target - int(missing.sum()))] = True
    return gap, grp, volt, sm1, sm2, sm3, missing


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/household_power_excerpt.txt")
    ap.add_argument("--rows", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=20061216)
    args = ap.parse_args()

    gap, grp, volt, sm1, sm2, sm3, missing = build(args.rows, args.seed)
    start = dt.datetime(2006, 12, 16, 17, 24)
    with open(args.out, "w", newline="\n") as f:
        f.write("Date;Time;Global_active_power;Global_reactive_power;Voltage;Global_intensity;"
                "Sub_metering_1;Sub_metering_2;Sub_metering_3\n")
        for i in range(args.rows):
            ts = start + dt.timedelta(minutes=i)
            stamp = f"{ts.day}/{ts.month}/{ts.year};{ts:%H:%M:%S}"
            if missing[i]:
                f.write(stamp + ";?;?;?;?;?;?;?\n")
                continue
            milli = int(round(gap[i] * 1000))
            f.write(f"{stamp};{milli // 1000}.{milli % 1000:03d};{grp[i]:.3f};{volt[i]:.3f};"
                    f"{4 * milli // 1000}.{4 * milli % 1000:03d};{sm1[i]:.3f};{sm2[i]:.3f};{sm3[i]:.3f}\n")


if __name__ == "__main__":
    main()
