//! Protocol engine and simulator for quantum key distribution over
//! Fibonacci-valued orbital angular momentum states.
//!
//! The crate computes exact joint-outcome probability distributions for the
//! legitimate parties and an intercept-resend eavesdropper from
//! first-principles state projections, derives the security quantities
//! (disturbance, mutual information, retained fraction, secret key rate),
//! and simulates the protocol trial by trial, including the classical
//! reconciliation exchange.
//!
//! Layered bottom-up:
//!
//! * [`fib`] — index arithmetic for the alphabet ladder.
//! * [`ket`] — sparse state algebra (kets, inner products, projections),
//!   generic over `f64` and exact `Q(√2, i)` scalars ([`num`]).
//! * [`protocol`] — configuration, the entangled source, detector banks,
//!   and the outcome-index layout.
//! * [`analytic`] — the joint probability matrices P₀, P_E, their mixture
//!   and difference.
//! * [`infometrics`] — disturbance, entropies, I_AB, I_AE, r(η), key rate.
//! * [`montecarlo`] — seeded trial-by-trial simulation, reconciliation,
//!   empirical estimation, and the security check.

pub mod analytic;
pub mod fib;
pub mod infometrics;
pub mod ket;
pub mod montecarlo;
pub mod num;
pub mod protocol;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    /// Input outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub use analytic::{
    delta, joint_prob_no_eve, joint_prob_no_eve_exact, joint_prob_with_eve,
    joint_prob_with_eve_exact, mix, Block, DeltaMatrix, EveModel, ExactJointMatrix,
    JointProbabilityMatrix,
};
pub use fib::{fib, fib_value, FibIndex};
pub use infometrics::{
    disturbance, eve_information, key_rate, metrics_at, mutual_information,
    retained_fraction, sweep, SecurityMetrics,
};
pub use ket::{inner_product, project_alice, project_bob, BiphotonKet, OamKet};
pub use montecarlo::{
    empirical_matrix, empirical_matrix_normalized, eve_guess, key_agreement_rate,
    reconcile, run_simulation, sample_trial, security_check, Normalization,
    RngStream, SecurityCheck, SecurityVerdict, SimulationOutput, SimulationParams,
    TrialRecord, TrialSampler,
};
pub use protocol::{
    detector_bank, outcome_from_index, outcome_index, outcome_labels, source_state,
    superposition_ket, Basis, DetectorSpec, Outcome, ProtocolConfig, RawOutcome,
};
