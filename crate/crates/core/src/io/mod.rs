//! Configuration, run manifests, NDJSON trajectories and snapshots.

mod config;
mod manifest;
mod snapshot;
mod trajectory;

pub use config::{known_keys, Settings, Value, ENV_PREFIX};
pub use manifest::{manifest_path, RunManifest};
pub use snapshot::{load_snapshot, save_snapshot, snapshot_bytes, snapshot_from_bytes, SNAPSHOT_VERSION};
pub use trajectory::{emit_trajectory, read_trajectory, TrajectoryRow};
