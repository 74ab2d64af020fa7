import json

import numpy as np
import pytest

from stylematch.config import RunConfig
from stylematch.lexicon import (
    ApproxSummaryScorer,
    bundled_acronyms_path,
    bundled_dictionary_path,
    load_dictionary,
)
from stylematch.metrics import record_to_row
from stylematch.pipeline import ProjectInputs, process_project
from stylematch.regression import build_design, ols_fit
from stylematch.synth import (
    PlantedModel,
    SynthError,
    SynthSpec,
    generate_corpus,
    generate_synthetic,
)


def _small_spec(**kwargs):
    defaults = dict(
        n_projects=8,
        seed=11,
        tokens_per_side=(150, 250),
        devs_range=(4, 6),
        prs_per_month=1,
    )
    defaults.update(kwargs)
    return SynthSpec(**defaults)


def _cfg():
    return RunConfig(
        projects=[],
        dictionary_path=bundled_dictionary_path(),
        acronyms_path=bundled_acronyms_path(),
        summary_mode="approx",
    )


def _rows_for(corpus):
    dictionary = load_dictionary(bundled_dictionary_path())
    scorer = ApproxSummaryScorer()
    cfg = _cfg()
    rows = []
    for proj in corpus.projects:
        out = process_project(
            ProjectInputs(meta=proj.meta, events=proj.events, contributors=proj.contributors),
            cfg,
            dictionary,
            scorer,
        )
        rows.append((proj, out.record))
    return rows


class TestGuards:
    def test_zero_elite_fraction_aborts(self):
        with pytest.raises(SynthError, match="elite_fraction"):
            _small_spec(elite_fraction=0.0).validate()

    def test_negative_target_percentage_aborts(self):
        spec = _small_spec()
        spec.category_base["articles"] = -1.0
        with pytest.raises(SynthError, match="negative"):
            spec.validate()


class TestDeterminism:
    def test_same_seed_same_corpus(self):
        a = generate_corpus(_small_spec())
        b = generate_corpus(_small_spec())
        assert [p.truth.lsm for p in a.projects] == [p.truth.lsm for p in b.projects]
        assert [len(p.events) for p in a.projects] == [len(p.events) for p in b.projects]
        ts_a = [e.timestamp for e in a.projects[0].events]
        ts_b = [e.timestamp for e in b.projects[0].events]
        assert ts_a == ts_b

    def test_disk_output_deterministic(self, tmp_path):
        generate_synthetic(_small_spec(n_projects=2), tmp_path / "a")
        generate_synthetic(_small_spec(n_projects=2), tmp_path / "b")
        for name in ("ground_truth.json", "run.toml"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestPipelineRecovery:
    def test_pipeline_rederives_planted_lsm_exactly(self):
        corpus = generate_corpus(_small_spec())
        for proj, record in _rows_for(corpus):
            assert record.flags == []
            assert record.lsm == pytest.approx(proj.truth.lsm, abs=1e-12)

    def test_zero_noise_recovery(self):
        # beta = (10, 4) for new_c on lsm0 at zero noise: quantization of the
        # commit schedule is the only residual, so the fit is near-exact
        spec = _small_spec(
            n_projects=40,
            seed=5,
            planted={
                "new_c": PlantedModel(intercept=10.0, lin=4.0),
                "bct": PlantedModel(intercept=8.0),
                "new_b": PlantedModel(intercept=4.0),
                "bfr": PlantedModel(intercept=0.7),
            },
            noise_scales={"new_c": 0.0, "bct": 0.0, "new_b": 0.0, "bfr": 0.0},
        )
        corpus = generate_corpus(spec)
        rows = [record_to_row(rec) for _, rec in _rows_for(corpus)]
        usable = [r for r in rows if r.complete]
        design = build_design(usable, ["lsm0"], outcome="new_c")
        fit = ols_fit(design)
        assert fit.r_squared > 0.999
        beta = dict(zip(fit.columns, fit.beta))
        assert beta["lsm0"] == pytest.approx(4.0, abs=0.3)

    def test_realized_outcomes_match_events(self):
        corpus = generate_corpus(_small_spec())
        for proj, record in _rows_for(corpus):
            assert record.outcomes.new_c == pytest.approx(
                proj.truth.outcomes_realized["new_c"], abs=1e-9
            )
            assert record.outcomes.bct == pytest.approx(
                proj.truth.outcomes_realized["bct"], abs=1e-6
            )


class TestDiskLayout:
    def test_bundle_contents(self, tmp_path):
        corpus = generate_synthetic(_small_spec(n_projects=2), tmp_path)
        assert (tmp_path / "ground_truth.json").exists()
        assert (tmp_path / "run.toml").exists()
        slug = corpus.projects[0].meta.name.replace("/", "__")
        assert (tmp_path / slug / "events.jsonl").exists()
        assert (tmp_path / slug / "contributors.json").exists()
        assert (tmp_path / slug / "meta.toml").exists()
        truth = json.loads((tmp_path / "ground_truth.json").read_text())
        assert len(truth["projects"]) == 2

    def test_archive_parses_back(self, tmp_path):
        from stylematch.events import read_event_stream

        corpus = generate_synthetic(_small_spec(n_projects=1), tmp_path)
        slug = corpus.projects[0].meta.name.replace("/", "__")
        events = read_event_stream(tmp_path / slug / "events.jsonl", "ArchiveJsonl")
        assert len(events) == len(corpus.projects[0].events)
        kinds_disk = sorted({e.kind for e in events})
        kinds_mem = sorted({e.kind for e in corpus.projects[0].events})
        assert kinds_disk == kinds_mem


def test_power_calibration_produces_positive_noise():
    spec = _small_spec(
        n_projects=30,
        planted={
            "new_c": PlantedModel(intercept=8.0, lin=3.0),
            "bct": PlantedModel(intercept=8.0),
            "new_b": PlantedModel(intercept=4.0),
            "bfr": PlantedModel(intercept=0.7),
        },
        power_target=0.95,
    )
    corpus = generate_corpus(spec)
    assert corpus.noise_scales["new_c"] > 0
