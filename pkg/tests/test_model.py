import dataclasses
import json

import pytest
from hypothesis import given, strategies as st

from svs.model import (
    AnomalyEvent,
    AnomalyKind,
    BBoxTlwh,
    CameraConfig,
    Detection,
    FeatureVector,
    FrameObservation,
    GLOBAL_RECORD_KEYS,
    GlobalRecord,
    Pose,
    ValidationError,
    bbox_corners,
    bbox_foot_point,
    bbox_iou,
    load_camera_configs,
)

boxes = st.builds(
    BBoxTlwh,
    x=st.floats(-1e3, 1e3),
    y=st.floats(-1e3, 1e3),
    w=st.floats(0.01, 1e3),
    h=st.floats(0.01, 1e3),
)


class TestBBox:
    def test_corners(self):
        assert bbox_corners(BBoxTlwh(10, 20, 30, 40)) == (
            (10, 20), (40, 20), (10, 60), (40, 60))

    def test_corners_unit(self):
        assert bbox_corners(BBoxTlwh(0, 0, 1, 1)) == ((0, 0), (1, 0), (0, 1), (1, 1))

    def test_degenerate_width_rejected(self):
        with pytest.raises(ValidationError):
            BBoxTlwh(5, 5, 0, 10)

    def test_foot_point(self):
        assert bbox_foot_point(BBoxTlwh(10, 20, 30, 40)) == (25, 60)
        assert bbox_foot_point(BBoxTlwh(0, 0, 2, 2)) == (1, 2)
        assert bbox_foot_point(BBoxTlwh(-4, 0, 8, 2)) == (0, 2)

    def test_iou_identical(self):
        b = BBoxTlwh(3, 4, 5, 6)
        assert bbox_iou(b, b) == 1.0

    def test_iou_disjoint(self):
        assert bbox_iou(BBoxTlwh(0, 0, 1, 1), BBoxTlwh(5, 5, 1, 1)) == 0.0

    def test_iou_overlap_third(self):
        # oracle: rasterized area count on a 0.01 grid gives inter 2, union 6
        a, b = BBoxTlwh(0, 0, 2, 2), BBoxTlwh(1, 0, 2, 2)
        assert bbox_iou(a, b) == pytest.approx(1 / 3, abs=1e-12)

    @given(boxes, boxes)
    def test_iou_symmetric_and_bounded(self, a, b):
        iou = bbox_iou(a, b)
        assert iou == bbox_iou(b, a)
        assert 0.0 <= iou <= 1.0

    @given(boxes)
    def test_corners_roundtrip(self, b):
        (tlx, tly), _, _, (brx, bry) = bbox_corners(b)
        assert tlx == b.x and tly == b.y
        assert brx - tlx == pytest.approx(b.w, rel=1e-9, abs=1e-9)
        assert bry - tly == pytest.approx(b.h, rel=1e-9, abs=1e-9)


def test_iou_rasterized_oracle():
    a, b = BBoxTlwh(0, 0, 2, 2), BBoxTlwh(1, 0, 2, 2)
    step = 0.01
    inter = union = 0
    n = int(3 / step)
    for i in range(n):
        for j in range(n):
            x, y = i * step + step / 2, j * step + step / 2
            in_a = a.x <= x < a.x + a.w and a.y <= y < a.y + a.h
            in_b = b.x <= x < b.x + b.w and b.y <= y < b.y + b.h
            inter += in_a and in_b
            union += in_a or in_b
    assert bbox_iou(a, b) == pytest.approx(inter / union, abs=1e-3)


class TestPose:
    def test_requires_17_keypoints(self):
        with pytest.raises(ValidationError):
            Pose(((1.0, 2.0, 0.5),) * 16)

    def test_conf_range(self):
        with pytest.raises(ValidationError):
            Pose(((1.0, 2.0, 1.5),) * 17)

    def test_mean_confidence(self):
        p = Pose(tuple((0.0, 0.0, 0.5) for _ in range(17)))
        assert p.mean_confidence() == pytest.approx(0.5)


class TestObservation:
    def test_score_range(self):
        with pytest.raises(ValidationError):
            FrameObservation("cam-1", 0, 0, (), frame_anomaly_score=120.0)

    def test_negative_frame(self):
        with pytest.raises(ValidationError):
            FrameObservation("cam-1", -1, 0, (), frame_anomaly_score=0.0)

    def test_detection_conf_range(self):
        with pytest.raises(ValidationError):
            Detection("person", 1.2, BBoxTlwh(0, 0, 1, 1))


class TestGlobalRecord:
    def test_roundtrip_lossless(self):
        r = GlobalRecord(7, 1000, "cam-1", BBoxTlwh(1, 2, 3, 4), 42.5,
                         ("walking",), ("bag",))
        assert GlobalRecord.from_json(r.to_json()) == r

    def test_serialized_keys_exact(self):
        r = GlobalRecord(1, 0, "cam-1", BBoxTlwh(0, 0, 1, 1), 0.0)
        assert set(json.loads(r.to_json())) == set(GLOBAL_RECORD_KEYS)

    def test_extra_field_rejected(self):
        r = GlobalRecord(1, 0, "cam-1", BBoxTlwh(0, 0, 1, 1), 0.0)
        doc = json.loads(r.to_json())
        doc["face_id"] = "x"
        with pytest.raises(ValidationError):
            GlobalRecord.from_json(json.dumps(doc))

    def test_score_range(self):
        with pytest.raises(ValidationError):
            GlobalRecord(1, 0, "cam-1", BBoxTlwh(0, 0, 1, 1), 120.0)

    def test_nonpositive_id(self):
        with pytest.raises(ValidationError):
            GlobalRecord(0, 0, "cam-1", BBoxTlwh(0, 0, 1, 1), 0.0)


# field names that could plausibly carry image payloads
IMAGE_LIKE = {"image", "frame_data", "pixels", "jpeg", "png", "crop", "face",
              "face_id", "snapshot", "thumbnail"}


def test_schema_audit_no_image_fields():
    for typ in (BBoxTlwh, Pose, FeatureVector, Detection, FrameObservation,
                GlobalRecord, AnomalyEvent, CameraConfig):
        names = {f.name for f in dataclasses.fields(typ)}
        assert not names & IMAGE_LIKE, f"{typ.__name__} carries image-like field"


class TestCameraConfig:
    def test_singular_homography_rejected(self):
        with pytest.raises(ValidationError):
            CameraConfig("c", "l", "c", (1, 0, 0, 2, 0, 0, 3, 0, 0), (0, 0, 1, 1))

    def test_bad_extent(self):
        with pytest.raises(ValidationError):
            CameraConfig("c", "l", "c", (1, 0, 0, 0, 1, 0, 0, 0, 1), (1, 0, 0, 1))

    def test_load_toml(self):
        text = """
[[cameras]]
camera_id = "cam-1"
location_id = "lobby"
display_name = "Lobby West"
homography = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
bev_extent = [0.0, 0.0, 50.0, 50.0]
live = false
"""
        cams = load_camera_configs(text)
        assert len(cams) == 1
        assert cams[0].camera_id == "cam-1"
        assert cams[0].live is False
        assert cams[0].bev_extent == (0.0, 0.0, 50.0, 50.0)


def test_anomaly_event_doc_keys():
    ev = AnomalyEvent(AnomalyKind.BEHAVIORAL, "cam-1", 10, 90.0, "msg", "firearm")
    assert set(ev.to_doc()) == {"kind", "category", "camera_id", "record_time",
                                "value", "message"}
