#!/usr/bin/env python3
"""Calibration harness for the fuel-allocation knot tables.

Runs the reference scenarios (world-record replication, strategy sweep,
lactate-class comparison) against candidate knot tables and prints a
scorecard with the target windows.  Edit CANDIDATES below, run, repeat;
when every line shows OK, copy the values into
src/paceopt/data/glyc_knots_v1.txt and bump the version note.

Usage: python tools/calibrate_glyc.py [--skip-sweep]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from paceopt.bioenergetics import Mesh, RunnerParams, distance
from paceopt.glyc import GlycCurve
from paceopt.nutrition import builtin_strategy, world_record_strategy
from paceopt.solver import SolveStatus, solve
from paceopt.transcription import assemble, unpack

RATIOS = (0.0, 0.3, 0.6, 0.8, 0.9, 1.0)

CANDIDATES = {
    "good": (0.30, 0.34, 0.45, 0.62, 0.79, 1.00),
    "average": (0.30, 0.48, 0.59, 0.76, 0.92, 1.00),
    "bad": (0.30, 0.55, 0.66, 0.83, 0.96, 1.00),
}

SWEEP_TARGETS = {
    0: 40.0, 1: 40.7, 2: 41.4, 3: 42.0, 4: 42.6, 5: 43.1, 6: 46.0, 7: 52.9,
    8: 40.7, 9: 40.5, 10: 42.5, 11: 45.1, 12: 43.2, 13: 45.6, 14: 43.1, 15: 43.7,
}


def curve_for(vla: str) -> GlycCurve:
    return GlycCurve(ratios=RATIOS, fractions=CANDIDATES[vla], label=vla)


def run_instance(p, strategy, t_final, tv_weight, vla):
    mesh = Mesh.minute_grid(t_final)
    prob = assemble(p, strategy, mesh, tv_weight, curve=curve_for(vla))
    rep = solve(prob)
    traj, _, _ = unpack(prob, rep.x)
    return rep, traj


def flag(ok: bool) -> str:
    return "OK  " if ok else "FAIL"


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--skip-sweep", action="store_true")
    args = ap.parse_args()

    t0 = time.time()
    p = RunnerParams()

    # World-record replication: distance 42.5 +-3%, plateau V within 5% of
    # 357, plateau f within 5% of 2.14e4 over [5,115], E_G(T) <= 1.
    rep, traj = run_instance(p, world_record_strategy(), 120, 0.5, "good")
    d = rep.distance_km
    vbar = float(np.median(traj.v[5:116]))
    fbar = float(np.median(traj.f[5:115]))
    print(f"[WR ] {rep.status.value:10s} dist {d:6.2f} km "
          f"{flag(abs(d - 42.5) <= 0.03 * 42.5)} | "
          f"V {vbar:6.1f} {flag(abs(vbar - 357) <= 0.05 * 357)} | "
          f"f {fbar:8.0f} {flag(abs(fbar - 2.14e4) <= 0.05 * 2.14e4)} | "
          f"E_G(T) {traj.eg[-1]:.3f} {flag(traj.eg[-1] <= 1.0)}")

    # Constant-force reference: distance near 42.5, E_G(T) near 0.
    from paceopt.bioenergetics import simulate
    fconst = np.full(120, 21420.0)
    fconst[0] = 357.0
    ref = simulate(fconst, world_record_strategy(), p, Mesh.minute_grid(120),
                   curve=curve_for("good"))
    print(f"[ref] const-21420 dist {distance(ref):6.2f} km  E_G(T) {ref.eg[-1]:7.3f}")

    # Lactate-class comparison at T=120: ordering plus 7-12% good-vs-bad.
    dist_tbl = {}
    for vla in ("good", "average", "bad"):
        for label, strat in (("none", None), ("4x100", builtin_strategy(4, 120))):
            pv = RunnerParams(vla=vla)
            rep, traj = run_instance(pv, strat, 120, 0.5, vla)
            dist_tbl[vla, label] = rep.distance_km
            print(f"[vla] {vla:7s} {label:5s} {rep.status.value:10s} "
                  f"dist {rep.distance_km:6.2f}")
    for label in ("none", "4x100"):
        g, a, b = (dist_tbl[v, label] for v in ("good", "average", "bad"))
        gain = (g - b) / b * 100.0
        print(f"[vla] {label:5s} order {flag(g > a > b)} "
              f"good-vs-bad {gain:5.2f}% {flag(7.0 <= gain <= 12.0)}")

    if not args.skip_sweep:
        dists = {}
        for idx in range(16):
            pv = RunnerParams(vla="average")
            rep, traj = run_instance(pv, builtin_strategy(idx, 135), 135, 0.5,
                                     "average")
            dists[idx] = rep.distance_km
            tgt = SWEEP_TARGETS[idx]
            err = (rep.distance_km - tgt) / tgt * 100.0
            print(f"[swp] s{idx:<2d} {rep.status.value:10s} dist {rep.distance_km:6.2f} "
                  f"target {tgt:5.1f} err {err:+5.2f}% {flag(abs(err) <= 5.0)}")
        inc = all(dists[i] < dists[i + 1] for i in range(7))
        gains = [dists[i + 1] - dists[i] for i in range(5)]
        iso = max(abs(dists[a] - dists[b]) for a, b in ((5, 12), (5, 14), (12, 14)))
        print(f"[swp] s0..s7 increasing {flag(inc)} | gains s1..s5 "
              f"{['%.2f' % g for g in gains]} {flag(all(0.3 <= g <= 0.9 for g in gains))} | "
              f"s7 max {flag(dists[7] == max(dists.values()))} | "
              f"isocaloric spread {iso:.3f} {flag(iso <= 0.3)}")

    print(f"total {time.time() - t0:.0f} s")


if __name__ == "__main__":
    main()
