"""Video-to-feature-sequence extraction for the dual-stream classifier."""

from .augment import TRANSFORMS, AugmentPlan, TransformParams, augment_frame
from .backbone import EfficientNetBackbone, TinyBackbone, build_backbone
from .clips import ClipSpec, parse_listing, probe_clip, sample_frames, sample_indices
from .faces import FaceDetector, crop_face, fallback_box
from .pipeline import ExtractionResult, extract_features, run_extraction

__version__ = "0.1.0"
