//! Labeled multi-object smoothing with generalized labeled multi-Bernoulli
//! posteriors over association histories, approximated by Gibbs sampling
//! over a moving window of scans.

pub mod assignment;
pub mod association;
pub mod error;
pub mod experiment;
pub mod gibbs;
pub mod hypothesis;
pub mod metrics;
pub mod models;
pub mod sim;
pub mod smoother;
pub mod trajectory;

pub use association::{AssociationHistory, AssociationMap, Label, LabeledStateSet};
pub use error::{GlmbError, Result};
pub use experiment::{run_mode, score, Mode, ModeRun, ScanScore};
pub use gibbs::GibbsConfig;
pub use hypothesis::{Context, Hypothesis};
pub use metrics::{ospa, ospa2, Ospa, OspaParams, Track};
pub use models::{BirthComponent, BirthModel, Gaussian, Models, MotionModel, Region, SensorModel};
pub use sim::{Dataset, Scenario, SpawnEvent};
pub use smoother::{Estimate, PosteriorBank, Refinement, Smoother, SmootherConfig, TrackEstimate};
pub use trajectory::{TrajectoryCache, TrajectoryPosterior};
