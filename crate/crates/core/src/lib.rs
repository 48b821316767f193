//! Few-shot point cloud segmentation with refined open-vocabulary
//! pseudo-labels.
//!
//! Raw per-point predictions from a vision-language model are filtered by
//! prototype agreement ([`select`]), extended to unlabeled points by
//! thresholded nearest-prototype assignment ([`infill`]), and support
//! samples are pasted next to base scenes for training ([`nbmix`]).
//! [`bench`] builds base/novel splits from class frequencies, [`metrics`]
//! scores segmentations, and [`sim`] produces synthetic rooms with
//! controlled prediction noise.

pub mod bench;
pub mod cli;
pub mod embed;
pub mod error;
pub mod infill;
pub mod io;
pub mod metrics;
pub mod nbmix;
pub mod pipeline;
pub mod ply;
pub mod prototype;
pub mod scene;
pub mod select;
pub mod sim;
pub mod spatial;

pub use embed::{
    EmbeddingMatrix, FeatureProvider, FileProvider, SyntheticProvider, SyntheticProviderConfig,
};
pub use error::{Error, Result};
pub use infill::{infill, InfillConfig};
pub use metrics::{summary, ConfusionMatrix, MetricSummary};
pub use nbmix::{mix, MixConfig};
pub use pipeline::{refine_scene, RefineConfig};
pub use prototype::{support_prototypes, PrototypeSet, SupportSet, SupportShot};
pub use scene::{voxelize, ClassSchema, PointCloudScene, VoxelConfig, UNLABELED};
pub use select::{ps_refine, SelectionConfig};
