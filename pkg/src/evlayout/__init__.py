"""Event-camera room-layout toolkit: simulator, representations, ETDF, SFFM, metrics."""

from __future__ import annotations

from .errors import EvLayoutError, NumericError, ValidationError
from .events import (Event, EventStream, TimeWindow, parse_event_stream, read_events, save_events,
                     slice_window, validate_stream, write_event_stream)
from .layout import Junction, LayoutAnnotation, LineSegment, SEGMENT_LABELS
from .simulator import (MotionProfile, Pose, SensorConfig, SimulationResult, WireframeScene,
                        generate_events, imu_angular_speed)
from .representations import (DenseTensor, ec_sae, event_count_image, event_spike_tensor,
                              surface_of_active_events, voxel_grid)
from .etdf import (EtdfMap, etdf_map, fit_poisson_rate, kl_divergence, patch_distribution,
                   pixel_temporal_histogram, poisson_count_prob, same_edge_mask)
from .sffm import AttentionParams, attention_weights, fuse_scores, sffm_forward, sffm_gradients
from .metrics import (ApReport, DetectionSet, Scored, compute_jap, compute_sap, evaluate,
                      greedy_match, rescale_to_eval)
from .annotations import (SequenceManifest, bin_sequences, label_stats, load_annotation,
                          load_manifest, parse_annotation, write_annotation)

__version__ = "0.1.0"
