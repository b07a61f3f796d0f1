import numpy as np

from pedeval.categorize import GtCategory, categorize_frame
from pedeval.config import load_config
from pedeval.geometry import BBox
from pedeval.ingestion import load_detections, load_ground_truth
from pedeval.labels import CITYSCAPES_LABELS
from pedeval.runner import load_dataset
from pedeval.synth import (SYNTH_CONFIG, OccluderActor, PedActor, SceneSpec,
                           oracle_categorize, random_scene, render,
                           write_fixture)

CAR = CITYSCAPES_LABELS["car"]


def scene(actors, seed=0):
    return SceneSpec(actors=tuple(actors), seed=seed, frame_id="s")


def expect(spec, categories):
    rendered = render(spec)
    assert rendered.expected.categories == categories
    part = categorize_frame(rendered.frame, SYNTH_CONFIG)
    assert part.categories == categories
    assert oracle_categorize(rendered.frame, SYNTH_CONFIG).categories == categories
    return rendered


class TestConstructedScenes:
    def test_tall_unoccluded_pedestrian_is_foreground(self):
        expect(scene([PedActor(BBox(10, 10, 24, 50), 24001)]),
               [GtCategory.FOREGROUND])

    def test_short_unoccluded_pedestrian_is_background(self):
        expect(scene([PedActor(BBox(10, 10, 20, 40), 24001)]),
               [GtCategory.BACKGROUND])

    def test_pedestrian_mostly_behind_car_is_environment(self):
        # back pedestrian: car hides 220/300 of the box (above the 0.7 gate),
        # a second pedestrian keeps the crowd share at 20/80 = 0.25
        back = PedActor(BBox(10, 10, 20, 40), 24001)
        front = PedActor(BBox(10, 32, 20, 38), 24002)
        car = OccluderActor(BBox(0, 10, 30, 32), CAR)
        expect(scene([back, front, car]),
               [GtCategory.ENVIRONMENT, GtCategory.BACKGROUND])

    def test_solo_pedestrian_behind_car_is_ambiguous(self):
        # without other person pixels the crowd share is 1.0, above the
        # relaxed bound, so the cross-test reports ambiguity
        back = PedActor(BBox(10, 10, 20, 40), 24001)
        car = OccluderActor(BBox(0, 10, 30, 34), CAR)
        expect(scene([back, car]), [GtCategory.AMBIGUOUS])

    def test_stacked_pedestrians_at_45_percent_coverage_are_crowd(self):
        back = PedActor(BBox(10, 5, 20, 45), 24001)   # 400 px
        front = PedActor(BBox(10, 5, 20, 23), 24002)  # hides 180 px (45%)
        expect(scene([back, front]),
               [GtCategory.CROWD, GtCategory.BACKGROUND])

    def test_truncated_pedestrian(self):
        # 100 of 140 unclipped pixels outside the image; remaining pixels
        # are shared with another pedestrian to keep the crowd share low
        back = PedActor(BBox(-10, 10, 4, 20), 24001)
        front = PedActor(BBox(0, 10, 4, 18), 24002)
        rendered = render(scene([back, front]))
        vis = rendered.expected.visibility[0]
        assert vis.out_of_image == 100
        assert rendered.expected.categories[0] == GtCategory.ENVIRONMENT


class TestRenderConsistency:
    def test_seeded_scenes_are_reproducible(self):
        a = render(random_scene(123))
        b = render(random_scene(123))
        assert a.frame.gt == b.frame.gt
        assert a.frame.detections == b.frame.detections
        assert np.array_equal(a.frame.masks.semantic, b.frame.masks.semantic)
        assert np.array_equal(a.frame.masks.instance, b.frame.masks.instance)
        assert a.expected.categories == b.expected.categories

    def test_analytic_counts_match_mask_counts(self):
        for seed in range(300):
            rendered = render(random_scene(seed))
            part = categorize_frame(rendered.frame, SYNTH_CONFIG)
            assert part.visibility == rendered.expected.visibility
            assert part.categories == rendered.expected.categories
            assert part.residual_candidates == \
                rendered.expected.residual_candidates

    def test_detection_budget(self):
        for seed in range(100):
            frame = render(random_scene(seed)).frame
            assert len(frame.detections) <= 8
            assert all(0 < d.score <= 1 for d in frame.detections)


class TestFixtureWriter:
    def test_written_files_load_back_identically(self, tmp_path):
        scenes = [render(random_scene(seed)) for seed in (5, 6, 7)]
        paths = write_fixture(str(tmp_path), scenes)

        gt_records = load_ground_truth(paths["ground_truth"])
        assert [rec.frame_id for rec in gt_records] == \
            [s.frame.frame_id for s in scenes]
        for rec, s in zip(gt_records, scenes):
            assert rec.boxes == s.frame.gt

        det_records = load_detections(paths["detections"])
        by_id = {r.frame_id: r.detections for r in det_records}
        for s in scenes:
            if s.frame.detections:
                assert by_id[s.frame.frame_id] == s.frame.detections

        cfg = load_config(paths["config"])
        dataset = load_dataset(cfg)
        for frame, s in zip(dataset.frames, scenes):
            assert np.array_equal(frame.masks.semantic, s.frame.masks.semantic)
            assert np.array_equal(frame.masks.instance, s.frame.masks.instance)

    def test_fixture_config_reproduces_scene_settings(self, tmp_path):
        scenes = [render(random_scene(9))]
        paths = write_fixture(str(tmp_path), scenes)
        cfg = load_config(paths["config"])
        assert cfg.categorizer_config() == SYNTH_CONFIG
