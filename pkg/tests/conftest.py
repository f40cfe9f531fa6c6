"""Shared fixtures: small synthetic populations run through the full stack."""

from datetime import date, timedelta

import pytest

from lumirec.experiments import ExperimentData
from lumirec.features import build_feature_rows, fit_codes
from lumirec.ingest import read_event_log, reconstruct_state
from lumirec.synth import default_population, generate, load_ground_truth


def build_pipeline_inputs(tmp_dir, households=45, days=90, seed=7):
    """Generate a population and push it through ingest + features."""
    window = (date(2019, 1, 1), date(2019, 1, 1) + timedelta(days=days - 1))
    specs = default_population(seed, households=households)
    result = generate(specs, window, seed=seed, out_dir=tmp_dir)
    events, _ = read_event_log(result.events_path.read_text().splitlines())
    states = reconstruct_state(events, window)
    truth = load_ground_truth(result.ground_truth_path)
    geo = {hub: (info["city"], info["country"])
           for hub, info in truth["households"].items()}
    rows = build_feature_rows(states.values(), geo)
    return states, rows, truth


@pytest.fixture(scope="session")
def small_population(tmp_path_factory):
    """45 households over 90 days: states, feature rows, ground truth."""
    out = tmp_path_factory.mktemp("population")
    return build_pipeline_inputs(out)


@pytest.fixture(scope="session")
def small_experiment_data(small_population):
    _, rows, _ = small_population
    return ExperimentData.from_rows(rows, fit_codes(rows), scene_count=9)
