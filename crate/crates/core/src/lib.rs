//! Two-stage outpatient appointment scheduling.
//!
//! Stage one groups patients into priority classes: [`ingest`] reads and
//! normalizes the patient table, [`features`] picks a feature subset by
//! entropy ranking plus a forward wrapper search, and [`clustering`] runs
//! K-means or Ward agglomerative clustering behind a common [`Clusterer`]
//! trait.
//!
//! Stage two schedules the classes over a rolling booking horizon. [`mdp`]
//! holds the Markov decision process (with exact value iteration for toy
//! instances), [`fluid`] solves its linear-program fluid relaxation with the
//! simplex solver in [`lp`] and extracts a quota table, and [`sim`] evaluates
//! quota tables and other [`BookingPolicy`] implementations by Monte Carlo.

pub mod clustering;
pub mod error;
pub mod features;
pub mod fluid;
pub mod ingest;
pub mod lp;
pub mod mdp;
pub mod sim;

pub use clustering::{Clusterer, ClustererRegistry, ClusteringResult};
pub use error::{Error, Result};
pub use ingest::{FeatureMatrix, FeatureSchema, PatientRecord};
pub use sim::{BookingPolicy, PolicyRegistry};
