import json

import numpy as np
import pytest

from bimaff import extraction, masks
from bimaff.extraction import (
    ContactState,
    KeyframeMasks,
    NoContactError,
    PipelineConfig,
    SequenceAnnotation,
    StageError,
    classify_taxonomy,
    complete_mask_ir,
    complete_mask_vs,
    extract_affordance,
    inpaint_hands,
    propagate_masks,
    run_pipeline,
    select_inpaint_window,
)
from bimaff.masks import BinaryMask
from bimaff.oracles import OracleError, OracleProtocolError, OracleSession
from bimaff.taxonomy import TaxonomyLabel

from synth import (
    SceneSpec,
    build_scene,
    make_oracle_set,
    rect_mask,
    standard_scenes,
    worker_command,
    write_scene_files,
)


@pytest.fixture
def identity_session():
    def _make(kind):
        return OracleSession(kind, worker_command("identity"))
    return _make


def single_frame_sequence():
    frame = np.zeros((8, 10), dtype=np.uint8)
    mask = BinaryMask.from_array(rect_mask(10, 8, (2, 2, 5, 5)))
    return SequenceAnnotation(
        sequence_id="single",
        frames=[frame],
        keyframes={0: KeyframeMasks(hand_left=mask, objects={"cup": mask})},
        contact={0: ContactState(left_in_contact=True, left_object="cup")},
        narration="take cup",
    )


class TestOracleSession:
    def test_identity_round_trip(self, identity_session):
        with identity_session("completer_vs") as session:
            img = np.arange(24, dtype=np.uint8).reshape(4, 6)
            mask = BinaryMask.from_array(rect_mask(6, 4, (1, 1, 3, 2)))
            [out] = session.request_masks(
                expected=1, expected_size=(6, 4),
                frames=[img, img], masks=[mask], params={})
            assert out == mask

    def test_wrong_size_is_protocol_error(self):
        with OracleSession("propagator", worker_command("wrong_size")) as session:
            with pytest.raises(OracleProtocolError):
                session.request_masks(
                    expected=1, expected_size=(10, 8),
                    masks=[BinaryMask.empty(10, 8)],
                    params={"keyframe_index": 0, "frame_indices": [0]})

    def test_unlaunchable_command(self):
        session = OracleSession("inpainter", ["/nonexistent/oracle-binary"])
        with pytest.raises(OracleError):
            session.request(params={})

    def test_worker_error_response(self, tmp_path):
        plates = tmp_path / "plates.json"
        plates.write_text("{}")
        with OracleSession(
                "inpainter", worker_command("clean_plate", "--plates", str(plates))) as session:
            with pytest.raises(OracleError, match="no clean plate"):
                session.request_image(
                    expected_shape=(4, 4),
                    frames=[np.zeros((4, 4), dtype=np.uint8)],
                    masks=[BinaryMask.full(4, 4)],
                    params={"target_index": 0, "window_indices": [0]})

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            OracleSession("segmenter", ["true"])


class TestPropagate:
    def test_single_frame_identity(self, identity_session):
        seq = single_frame_sequence()
        with identity_session("propagator") as session:
            dense = propagate_masks(seq, session)
        assert dense[0]["hand_left"] == seq.keyframes[0].hand_left
        assert dense[0]["object:cup"] == seq.keyframes[0].objects["cup"]

    def test_translating_square_matches_known_motion(self):
        spec = SceneSpec(
            sequence_id="move", narration="slide box",
            objects={"box": (100, (4, 4, 12, 12))},
            hands={"left": (10, 6, 16, 10)},
            contact={"left": "box"},
            shift=(2, 1), n_frames=4,
        )
        fixture = build_scene(spec)
        source = fixture.sequence.keyframes[0].objects["box"].to_array()
        with OracleSession("propagator",
                           worker_command("shift", "--dx", "2", "--dy", "1")) as session:
            dense = propagate_masks(fixture.sequence, session)
        h, w = source.shape
        for i in range(4):
            expected = np.zeros_like(source)
            expected[i:, 2 * i:] = source[:h - i, :w - 2 * i]
            assert np.array_equal(dense[i]["object:box"].to_array(), expected)

    def test_wrong_size_propagator(self):
        seq = single_frame_sequence()
        with OracleSession("propagator", worker_command("wrong_size")) as session:
            with pytest.raises(OracleProtocolError):
                propagate_masks(seq, session)

    def test_kind_mismatch(self, identity_session):
        with identity_session("inpainter") as session:
            with pytest.raises(ValueError):
                propagate_masks(single_frame_sequence(), session)


class TestInpaint:
    def test_window_selection(self):
        assert select_inpaint_window(5, 10) == [2, 3, 4, 5]
        assert select_inpaint_window(1, 10) == [0, 1, 2, 3]
        assert select_inpaint_window(0, 2) == [0, 1]
        assert select_inpaint_window(6, 10, stride=2) == [0, 2, 4, 6]
        assert select_inpaint_window(3, 10, stride=2) == [0, 1, 2, 3]

    def test_empty_hand_masks_identity(self, identity_session):
        frames = [np.full((6, 6), k, dtype=np.uint8) for k in range(4)]
        hands = [BinaryMask.empty(6, 6)] * 4
        with identity_session("inpainter") as session:
            out = inpaint_hands(frames, hands, 2, session)
        assert np.array_equal(out, frames[2])

    def test_clean_plate_restores_occlusion(self, tmp_path):
        fixture = build_scene(standard_scenes()[0])
        plates_path = tmp_path / "plates.json"
        write_scene_files(fixture, tmp_path / "seqs", plates_path)
        seq = fixture.sequence
        hands = [seq.keyframes[0].hand_left] * len(seq.frames)
        with OracleSession("inpainter",
                           worker_command("clean_plate", "--plates", str(plates_path))) as session:
            out = inpaint_hands(seq.frames, hands, fixture.target_frame, session,
                                context={"sequence": seq.sequence_id})
        assert np.array_equal(out, fixture.plates[fixture.target_frame])

    def test_non_hand_pixels_bit_identical(self, tmp_path):
        # a hostile oracle that rewrites the whole frame must still leave
        # everything outside the halo-dilated hand region untouched
        fixture = build_scene(standard_scenes()[1])
        seq = fixture.sequence
        plates_path = tmp_path / "plates.json"
        wild = {f"{seq.sequence_id}/{i}": np.full_like(seq.frames[0], 255)
                for i in fixture.plates}
        from bimaff import images as img_mod
        plates_path.write_text(json.dumps(
            {k: img_mod.encode_payload(v) for k, v in wild.items()}))
        hand = seq.keyframes[0].hand_right
        hands = [hand] * len(seq.frames)
        with OracleSession("inpainter",
                           worker_command("clean_plate", "--plates", str(plates_path))) as session:
            out = inpaint_hands(seq.frames, hands, fixture.target_frame, session,
                                halo=2, context={"sequence": seq.sequence_id})
        region = hand.dilate(2).to_array()
        target = seq.frames[fixture.target_frame]
        assert np.array_equal(out[~region], target[~region])
        assert (out[region] == 255).all()


class TestCompletion:
    def test_identity_oracle_returns_input(self, identity_session):
        img = np.zeros((8, 8), dtype=np.uint8)
        mask = BinaryMask.from_array(rect_mask(8, 8, (1, 1, 4, 4)))
        with identity_session("completer_vs") as session:
            assert complete_mask_vs(img, img, mask, session) == mask

    def test_appearance_completer_restores_hidden_part(self):
        # mug with its handle hidden behind the hand in the original frame
        w, h = 20, 14
        full_mug = rect_mask(w, h, (4, 3, 14, 10))
        hand = rect_mask(w, h, (10, 5, 13, 8))
        original = np.zeros((h, w), dtype=np.uint8)
        original[full_mug] = 100
        original[hand] = 200
        inpainted = np.zeros((h, w), dtype=np.uint8)
        inpainted[full_mug] = 100
        visible = BinaryMask.from_array(full_mug & ~hand)
        with OracleSession("completer_vs", worker_command("appearance")) as session:
            completed = complete_mask_vs(original, inpainted, visible, session)
        assert completed == BinaryMask.from_array(full_mug)

    def test_vs_empty_input_rejected(self, identity_session):
        img = np.zeros((4, 4), dtype=np.uint8)
        with identity_session("completer_vs") as session:
            with pytest.raises(ValueError):
                complete_mask_vs(img, img, BinaryMask.empty(4, 4), session)

    def test_ir_empty_hand_is_identity(self, identity_session):
        mask = BinaryMask.from_array(rect_mask(6, 6, (0, 0, 2, 2)))
        with identity_session("completer_ir") as session:
            assert complete_mask_ir(mask, BinaryMask.empty(6, 6), session) == mask

    def test_ir_fills_occluding_strip(self):
        w, h = 16, 12
        rect = rect_mask(w, h, (3, 2, 12, 9))
        strip = rect_mask(w, h, (3, 5, 12, 6))  # horizontal band through the rect
        visible = BinaryMask.from_array(rect & ~strip)
        hand = BinaryMask.from_array(strip)
        with OracleSession("completer_ir", worker_command("convex_fill")) as session:
            completed = complete_mask_ir(visible, hand, session)
        assert completed == BinaryMask.from_array(rect)

    def test_ir_outside_hand_unchanged(self):
        w, h = 16, 12
        visible = BinaryMask.from_array(rect_mask(w, h, (1, 1, 5, 5)))
        hand = BinaryMask.from_array(rect_mask(w, h, (8, 8, 11, 11)))
        with OracleSession("completer_ir", worker_command("convex_fill")) as session:
            completed = complete_mask_ir(visible, hand, session)
        outside = hand.complement()
        assert completed.intersect(outside) == visible.intersect(outside)


class TestExtractAffordance:
    def test_disjoint_hand_and_object(self):
        hand = BinaryMask.from_array(rect_mask(16, 16, (0, 0, 3, 3)))
        obj = BinaryMask.from_array(rect_mask(16, 16, (10, 10, 15, 15)))
        assert extract_affordance([obj], hand).is_empty()

    def test_grip_region_survives(self):
        hand = BinaryMask.from_array(rect_mask(20, 20, (6, 6, 14, 14)))
        obj = BinaryMask.from_array(rect_mask(20, 20, (2, 2, 10, 10)))
        out = extract_affordance([obj], hand)
        assert out == BinaryMask.from_array(rect_mask(20, 20, (6, 6, 10, 10)))

    def test_specks_removed_blob_kept(self):
        w = h = 24
        blob = rect_mask(w, h, (4, 4, 11, 11))
        arr = blob.copy()
        arr[1, 20] = True   # isolated speck
        arr[20, 1] = True   # isolated speck
        overlap = BinaryMask.from_array(arr)
        out = extract_affordance([overlap], BinaryMask.full(w, h))
        assert out == BinaryMask.from_array(blob)

    def test_result_single_component(self, rng):
        for _ in range(10):
            hand = BinaryMask.from_array(rng.random((18, 18)) < 0.4)
            obj = BinaryMask.from_array(rng.random((18, 18)) < 0.4)
            out = extract_affordance([obj], hand)
            assert len(masks.connected_components(out)) <= 1
            assert hand.dilate(1).contains(out)


class TestTaxonomy:
    def test_left_only(self):
        contact = {0: ContactState(left_in_contact=True, left_object="bottle")}
        assert classify_taxonomy(contact) is TaxonomyLabel.UNIMANUAL_LEFT

    def test_same_object_symmetric(self):
        contact = {0: ContactState(True, "dough", True, "dough")}
        assert classify_taxonomy(contact) is TaxonomyLabel.BIMANUAL_SYMMETRIC

    def test_different_objects_asymmetric(self):
        contact = {0: ContactState(True, "bowl", True, "bottle")}
        assert classify_taxonomy(contact) is TaxonomyLabel.BIMANUAL_ASYMMETRIC

    def test_hands_meet_on_object_across_frames(self):
        contact = {
            0: ContactState(True, "pan", False, None),
            3: ContactState(False, None, True, "pan"),
        }
        assert classify_taxonomy(contact) is TaxonomyLabel.BIMANUAL_SYMMETRIC

    def test_no_contact_rejected(self):
        with pytest.raises(NoContactError):
            classify_taxonomy({0: ContactState()})


class TestPipeline:
    @pytest.mark.parametrize("spec", standard_scenes(), ids=lambda s: s.sequence_id)
    def test_end_to_end_exact(self, tmp_path, spec):
        fixture = build_scene(spec)
        plates = tmp_path / "plates.json"
        shifts = tmp_path / "shifts.json"
        write_scene_files(fixture, tmp_path / "seqs", plates, shifts)
        with make_oracle_set(plates, shifts_path=shifts) as oracles:
            result = run_pipeline(fixture.sequence, oracles)
        assert result.rejected is None
        assert result.record.taxonomy.value == fixture.expected_taxonomy
        assert result.record.left_mask == fixture.expected_left
        assert result.record.right_mask == fixture.expected_right

    def test_bimanual_yields_two_masks(self, tmp_path):
        fixture = build_scene(standard_scenes()[2])
        plates = tmp_path / "plates.json"
        write_scene_files(fixture, tmp_path / "seqs", plates)
        with make_oracle_set(plates) as oracles:
            result = run_pipeline(fixture.sequence, oracles)
        assert result.record.taxonomy is TaxonomyLabel.BIMANUAL_SYMMETRIC
        assert not result.record.left_mask.is_empty()
        assert not result.record.right_mask.is_empty()

    def test_empty_affordance_rejected(self, tmp_path):
        spec = SceneSpec(
            sequence_id="no_overlap", narration="reach shelf",
            objects={"shelf": (100, (2, 2, 12, 8))},
            hands={"left": (30, 30, 44, 40)},   # far from the object
            contact={"left": "shelf"},
        )
        fixture = build_scene(spec)
        plates = tmp_path / "plates.json"
        write_scene_files(fixture, tmp_path / "seqs", plates)
        with make_oracle_set(plates) as oracles:
            result = run_pipeline(fixture.sequence, oracles)
        assert result.rejected == "empty-affordance-mask"

    def test_blacklisted_narration_rejected(self, tmp_path):
        spec = standard_scenes()[0]
        spec = SceneSpec(**{**spec.__dict__, "narration": "look at mug"})
        fixture = build_scene(spec)
        plates = tmp_path / "plates.json"
        write_scene_files(fixture, tmp_path / "seqs", plates)
        with make_oracle_set(plates) as oracles:
            result = run_pipeline(fixture.sequence, oracles)
        assert result.rejected == "blacklisted-narration"

    def test_deterministic(self, tmp_path):
        fixture = build_scene(standard_scenes()[3])
        plates = tmp_path / "plates.json"
        write_scene_files(fixture, tmp_path / "seqs", plates)
        outputs = []
        for _ in range(2):
            with make_oracle_set(plates) as oracles:
                result = run_pipeline(fixture.sequence, oracles)
            from bimaff.dataset import record_to_line
            outputs.append(
                record_to_line(result.record) + json.dumps(result.provenance, sort_keys=True))
        assert outputs[0] == outputs[1]

    def test_stage_error_names_stage_and_sequence(self, tmp_path):
        fixture = build_scene(standard_scenes()[0])
        oracles = make_oracle_set(tmp_path / "missing_plates.json")
        oracles.propagator = OracleSession("propagator", worker_command("wrong_size"))
        with oracles:
            with pytest.raises(StageError) as err:
                run_pipeline(fixture.sequence, oracles)
        assert err.value.stage == "propagate"
        assert err.value.sequence_id == "seq_left"

    def test_strategy_divergence_on_ghost_handle(self, tmp_path):
        # an object made of two bars; the gap between them is covered by the
        # hand but genuinely empty in the clean plate (nothing to restore)
        spec = SceneSpec(
            sequence_id="ghost", narration="take rack",
            objects={"rack": (100, [(4, 4, 7, 16), (14, 4, 17, 16)])},
            hands={"left": (8, 6, 13, 14)},
            contact={"left": "rack"},
        )
        fixture = build_scene(spec)
        plates = tmp_path / "plates.json"
        write_scene_files(fixture, tmp_path / "seqs", plates)
        vs = make_oracle_set(plates, strategy="vs")
        ir = make_oracle_set(plates, strategy="ir")
        with vs, ir:
            report = extraction.compare_completion_strategies(fixture.sequence, vs, ir)
        assert report["diverged"]
        assert report["hands"]["left"]["ir_area"] > report["hands"]["left"]["vs_area"]


class TestSequenceValidation:
    def test_contact_names_must_exist(self):
        frame = np.zeros((4, 4), dtype=np.uint8)
        with pytest.raises(ValueError, match="unknown"):
            SequenceAnnotation(
                sequence_id="bad",
                frames=[frame],
                keyframes={0: KeyframeMasks(objects={})},
                contact={0: ContactState(left_in_contact=True, left_object="ghost")},
                narration="x",
            )

    def test_frame_index_bounds(self):
        frame = np.zeros((4, 4), dtype=np.uint8)
        with pytest.raises(ValueError, match="out of range"):
            SequenceAnnotation(
                sequence_id="bad",
                frames=[frame],
                keyframes={3: KeyframeMasks()},
                contact={},
                narration="x",
            )

    def test_json_round_trip(self, tmp_path):
        fixture = build_scene(standard_scenes()[0])
        write_scene_files(fixture, tmp_path, tmp_path / "plates.json")
        loaded = SequenceAnnotation.from_file(tmp_path / "seq_left.json")
        assert loaded.sequence_id == "seq_left"
        assert loaded.keyframes[0].hand_left == fixture.sequence.keyframes[0].hand_left
        assert np.array_equal(loaded.frames[1], fixture.sequence.frames[1])
