import json

import pytest

from svs.model import BBoxTlwh, Detection, FeatureVector, Pose


def make_pose(conf: float = 1.0) -> Pose:
    return Pose(tuple((10.0 + i, 20.0 + i, conf) for i in range(17)))


def make_detection(cls="person", conf=0.9, bbox=(0, 0, 10, 20), pose_conf=1.0,
                   feature=None) -> Detection:
    return Detection(
        cls=cls,
        conf=conf,
        bbox=BBoxTlwh(*bbox),
        pose=make_pose(pose_conf),
        feature=FeatureVector(tuple(feature)) if feature is not None else None,
    )


def trace_line(frame, ts_ms, camera_id="cam-1", detections=(), score=0.0,
               actions=(), objects=(), **extra):
    doc = {
        "frame": frame,
        "ts_ms": ts_ms,
        "camera_id": camera_id,
        "detections": list(detections),
        "frame_anomaly_score": score,
        "actions": list(actions),
        "objects": list(objects),
    }
    doc.update(extra)
    return json.dumps(doc)


def trace_detection(cls="person", conf=0.9, tlwh=(0, 0, 10, 20), pose_conf=0.8,
                    feature=None):
    d = {
        "class": cls,
        "conf": conf,
        "tlwh": list(tlwh),
        "pose": [[1.0, 2.0, pose_conf]] * 17,
    }
    if feature is not None:
        d["feature"] = list(feature)
    return d
