//! Robust Markov decision processes with data-driven L1 ambiguity sets.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: tabular MDPs, exact policy evaluation and nominal value iteration.
//! - [`lp`]: a small dense two-phase simplex solver.
//! - [`geometry`]: worst-case linear minimisation over an L1 ball and the
//!   minimum-radius center problem for a family of hyperplanes.
//! - [`robust`]: robust Bellman backups and robust value iteration.
//! - [`posterior`]: transition datasets and posterior samplers.
//! - [`sets`]: Hoeffding, Bayesian credible interval and value-function-guided
//!   (RSVF) ambiguity set construction.

pub mod error;
pub mod geometry;
pub mod lp;
pub mod mdp;
pub mod posterior;
pub mod robust;
pub mod seed;
pub mod sets;

pub use error::{Error, Result};
pub use geometry::{l1_distance, min_radius_center, worst_case_l1, HyperplaneTarget, L1AmbiguitySet};
pub use mdp::{evaluate_policy, return_of, solve_nominal, Policy, TabularMDP, TransitionModel, ValueFunction};
pub use robust::{robust_bellman, robust_evaluate, solve_robust, AmbiguousMDP, RobustSolution};
pub use posterior::{PosteriorSampleSet, TransitionDataset};
pub use sets::{build_bci, build_hoeffding, build_mean, build_rsvf, hyperplane_level, ConfidenceBudget, RsvfOptions, RsvfTrace, Termination};
