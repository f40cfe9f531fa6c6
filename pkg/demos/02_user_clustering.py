#!/usr/bin/env python3
"""User segmentation walkthrough.

Builds winsorized usage vectors with geography/room one-hots, sweeps k with
the inertia elbow, and checks how well the recovered clusters match the
generator's planted personas. Saves the elbow curve and per-cluster usage
CDFs.
"""

from datetime import date
from pathlib import Path

import numpy as np

from lumirec.clustering import build_cluster_vector, cdf_rows, country_table, select_k
from lumirec.ingest import read_event_log, reconstruct_state
from lumirec.metrics import adjusted_rand_index
from lumirec.routine import frequency_profile
from lumirec.synth import default_population, generate, load_ground_truth

OUT = Path(__file__).parent / "demo_output" / "clustering"
WINDOW = (date(2019, 1, 1), date(2019, 6, 30))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    print("=== Population and profiles ===")
    specs = default_population(seed=7, households=60)
    result = generate(specs, WINDOW, seed=7, out_dir=OUT)
    events, _ = read_event_log(result.events_path.read_text().splitlines())
    states = reconstruct_state(events, WINDOW)
    truth = load_ground_truth(result.ground_truth_path)
    profiles = [frequency_profile(s) for _, s in sorted(states.items())]
    print(f"{len(profiles)} (household, room) entities\n")

    countries = country_table(truth["households"][p.household]["country"]
                              for p in profiles)
    vectors = np.stack([
        build_cluster_vector(p, truth["households"][p.household]["country"],
                             countries).concat()
        for p in profiles
    ])
    print(f"cluster vectors: {vectors.shape[1]} dims "
          f"(1440 usage + {len(countries)} countries + 2 rooms)")

    print("\n=== Elbow sweep over k = 1..10 ===")
    selection = select_k(vectors, range(1, 11), seed=3, n_init=6)
    for k, inertia in selection.inertia_curve:
        marker = "  <- selected" if k == selection.k else ""
        print(f"  k={k:2d}  inertia {inertia:12.2f}{marker}")

    labels = selection.model.labels_
    persona_names = sorted({info["persona"] for info in truth["households"].values()})
    planted = [persona_names.index(truth["households"][p.household]["persona"])
               for p in profiles]
    ari = adjusted_rand_index(planted, labels)
    print(f"\nadjusted Rand index against planted personas: {ari:.3f}")

    print("\ncluster composition (rows = clusters, cols = personas):")
    table = np.zeros((selection.k, len(persona_names)), dtype=int)
    for label, persona in zip(labels, planted):
        table[label, persona] += 1
    header = "        " + "  ".join(f"{n:>10s}" for n in persona_names)
    print(header)
    for c in range(selection.k):
        print(f"  c{c}:  " + "  ".join(f"{v:10d}" for v in table[c]))

    assignment = {(p.household, p.room): int(c) for p, c in zip(profiles, labels)}
    rows = cdf_rows(profiles, assignment)

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, (left, right) = plt.subplots(1, 2, figsize=(11, 4))
        ks = [k for k, _ in selection.inertia_curve]
        inertias = [v for _, v in selection.inertia_curve]
        left.plot(ks, inertias, "o-")
        left.axvline(selection.k, color="crimson", ls="--",
                     label=f"selected k={selection.k}")
        left.set_xlabel("k")
        left.set_ylabel("inertia")
        left.set_title("elbow over inertia")
        left.legend()
        colors = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple"]
        by_entity = {}
        for household, room, cluster, x, f in rows:
            by_entity.setdefault((household, room, cluster), []).append((x, f))
        for (_, _, cluster), points in by_entity.items():
            xs, fs = zip(*points)
            right.plot(xs, fs, color=colors[cluster % len(colors)], alpha=0.25, lw=0.8)
        right.set_xlabel("usage frequency")
        right.set_ylabel("CDF")
        right.set_title("usage CDFs colored by cluster")
        fig.tight_layout()
        out = OUT / "clusters.png"
        fig.savefig(out, dpi=120)
        print(f"\nsaved chart: {out}")
    except ImportError:
        print("\nmatplotlib unavailable; skipped the chart")


if __name__ == "__main__":
    main()
