//! Online multi-rate fusion: a timestamp-ordered event stream of IMU samples
//! with occasional position and orientation truths in, one pose per fine
//! sample out.

pub mod event;
pub mod replay;
pub mod state;

pub use event::{check_event, format_event_line, parse_event_line, preprocess, NormalizedEvent, SensorEvent, WireEvent};
pub use replay::{dataset_events, format_pose_line, replay, run_stream, Replay, ReplaySummary, TruthSidecar, WirePose};
pub use state::{
    Counters, FusionModels, FusionState, OrientationPredictor, PoseOut, PositionPredictor, Source, Status,
    StepOutput, WarmupNotice,
};
