//! Distributed person re-identification over per-camera gallery shards.
//!
//! Each camera owns a [`GalleryShard`] that can report its best cosine match
//! for a query. A single [`IdentityRegistry`] turns the local maxima into an
//! identity decision, fuses attributes and allocates new ids. [`cmc_map`] and
//! [`calibrate_threshold`] evaluate and tune the decision threshold offline.

mod feature;
mod gallery;
mod identity;
mod io;
mod metrics;
mod synth;

pub use feature::{AttributeVector, Feature, FrameInfo};
pub use gallery::{Gallery, GalleryShard, LocalMatch, SearchMode};
pub use identity::{fuse_attributes, global_decide, Decision, IdentityId, IdentityRegistry, PersonInstance, ReidSystem, DEFAULT_BETA, DEFAULT_THRESHOLD};
pub use io::{read_gallery_csv, write_gallery_csv, write_metrics_csv};
pub use metrics::{calibrate_threshold, cmc_map, CmcReport, JunkRule, LabeledFeature};
pub use synth::{SyntheticStream, DEFAULT_FEATURE_DIM};
