#!/usr/bin/env python3
"""Routine recommendation walkthrough.

Generates a small synthetic household population, reconstructs room state
from the raw event log, computes per-minute usage frequency profiles, and
extracts recommended routines with the knee-threshold cutoff. Compares the
recommendations against the generator's planted schedule and saves a
cutoff chart for one entity.
"""

from datetime import date
from pathlib import Path

import numpy as np

from lumirec.ingest import read_event_log, reconstruct_state
from lumirec.routine import frequency_profile, knee_threshold, recommend_routine
from lumirec.synth import default_population, generate, load_ground_truth
from lumirec.util import minutes_to_hhmm

OUT = Path(__file__).parent / "demo_output" / "routine"
WINDOW = (date(2019, 1, 1), date(2019, 12, 31))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    print("=== Generating a 30-household population (full-year window) ===")
    specs = default_population(seed=7, households=30)
    result = generate(specs, WINDOW, seed=7, out_dir=OUT)
    print(f"wrote {result.n_events} events for {result.n_households} households\n")

    events, report = read_event_log(result.events_path.read_text().splitlines())
    print(f"parsed {report.parsed}/{report.total} events "
          f"({report.households} households, {report.rooms} rooms)")
    states = reconstruct_state(events, WINDOW)
    truth = load_ground_truth(result.ground_truth_path)

    print("\n=== Recommended routines vs planted windows (first 6 entities) ===")
    shown = 0
    errors = []
    for (hub, room), state in sorted(states.items()):
        profile = frequency_profile(state)
        plan = recommend_routine(profile)
        planted = sorted((w[0], w[1]) for w in
                         truth["households"][hub]["rooms"][room.value]["windows"])
        got = [f"{minutes_to_hhmm(s)}-{minutes_to_hhmm(e)}" for s, e in plan.intervals]
        want = [f"{minutes_to_hhmm(s)}-{minutes_to_hhmm(e)}" for s, e in planted]
        if len(plan.intervals) == len(planted):
            errors.extend(abs(a - b) for (a, c), (b, d) in zip(plan.intervals, planted)
                          for a, b in [(a, b), (c, d)])
        if shown < 6:
            print(f"  {hub}/{room.value}: recommended {got}  planted {want}  "
                  f"(threshold {plan.threshold:.2f})")
            shown += 1
    print(f"\nendpoint error over all entities: mean {np.mean(errors):.1f} min, "
          f"max {np.max(errors):.0f} min")

    # Fig-1-style chart: sorted frequency curve with the knee cutoff.
    hub, room = sorted(states)[0]
    profile = frequency_profile(states[(hub, room)])
    knee = knee_threshold(profile.values)
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4))
        curve = np.sort(profile.values)[::-1]
        left.plot(curve, lw=1.5)
        left.axhline(knee.threshold, color="crimson", ls="--",
                     label=f"cutoff {knee.threshold:.2f}")
        left.set_xlabel("minute rank")
        left.set_ylabel("on-frequency")
        left.set_title("sorted usage curve and knee cutoff")
        left.legend()
        right.plot(profile.values, lw=0.8)
        right.axhline(knee.threshold, color="crimson", ls="--")
        right.set_xlabel("minute of day")
        right.set_title(f"{hub}/{room.value} daily profile")
        fig.tight_layout()
        out = OUT / "usage_cutoff.png"
        fig.savefig(out, dpi=120)
        print(f"saved chart: {out}")
    except ImportError:
        print("matplotlib unavailable; skipped the chart")


if __name__ == "__main__":
    main()
