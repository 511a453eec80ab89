"""Toy one-stream tracker: embeddings, shared backbone, fusion, head, training."""

from quadscan.tracker.data import (
    CropSpec,
    TrainSampler,
    box_to_crop,
    crop_resize,
    crop_to_frame,
    extract_group,
    load_corpus_split,
)
from quadscan.tracker.loss import LossTerms, focal_loss, giou_pairwise, tracking_loss
from quadscan.tracker.model import (
    MODALITY_ORDER,
    VOCAB,
    HeadOutput,
    ModalTokenSet,
    TrackerConfig,
    TrackerModel,
    backbone_forward,
    build_tracker,
    decode_boxes,
    embed,
    encode_targets,
    gaussian_radius,
    load_tracker,
    merge_and_predict,
    patchify,
    sentence_to_ids,
    set_fusion_paths,
)
from quadscan.tracker.track import track_sequence
from quadscan.tracker.train import PRESETS, TrainResult, TrainSchedule, get_preset, train

__all__ = [
    "CropSpec",
    "HeadOutput",
    "LossTerms",
    "MODALITY_ORDER",
    "ModalTokenSet",
    "PRESETS",
    "TrackerConfig",
    "TrackerModel",
    "TrainResult",
    "TrainSampler",
    "TrainSchedule",
    "VOCAB",
    "backbone_forward",
    "box_to_crop",
    "build_tracker",
    "crop_resize",
    "crop_to_frame",
    "decode_boxes",
    "embed",
    "encode_targets",
    "extract_group",
    "focal_loss",
    "gaussian_radius",
    "get_preset",
    "giou_pairwise",
    "load_corpus_split",
    "load_tracker",
    "merge_and_predict",
    "patchify",
    "sentence_to_ids",
    "set_fusion_paths",
    "track_sequence",
    "tracking_loss",
    "train",
]
