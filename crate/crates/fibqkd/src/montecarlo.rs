//! Trial-by-trial protocol simulation: sampling, interception,
//! reconciliation, key extraction, empirical matrices, and the security
//! check.
//!
//! Sampling follows the physical sequence. Alice's basis is a fair coin and
//! her outcome is drawn from the projection weights of the source state;
//! with probability η Eve measures Bob's conditional state in a random
//! basis and forwards her detector state; Bob measures whatever arrives in
//! his own random basis. All randomness comes from counter-based ChaCha
//! streams so that a (seed, stream) pair fully determines the draw
//! sequence, and workers own disjoint streams.

use crate::analytic::{self, JointProbabilityMatrix};
use crate::fib::{fib, FibIndex};
use crate::ket::Ket;
use crate::protocol::{
    bank_entries, source_pairs, Basis, Outcome, ProtocolConfig, RawOutcome,
};
use crate::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Reproducible RNG handle: one logical stream per worker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Classical message Alice broadcasts during reconciliation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicalMessage {
    OneBit(u8),
    TwoBits(u8),
}

impl fmt::Display for ClassicalMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassicalMessage::OneBit(b) => write!(f, "{b}"),
            ClassicalMessage::TwoBits(b) => write!(f, "{}{}", (b >> 1) & 1, b & 1),
        }
    }
}

impl Serialize for ClassicalMessage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ClassicalMessage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bits: Option<Vec<u8>> = s
            .chars()
            .map(|c| match c {
                '0' => Some(0u8),
                '1' => Some(1u8),
                _ => None,
            })
            .collect();
        match bits.as_deref() {
            Some([b]) => Ok(ClassicalMessage::OneBit(*b)),
            Some([hi, lo]) => Ok(ClassicalMessage::TwoBits(hi << 1 | lo)),
            _ => Err(serde::de::Error::custom("expected 1 or 2 binary digits")),
        }
    }
}

/// Eve's raw interception record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EveAction {
    pub basis: Basis,
    pub outcome: RawOutcome,
}

/// Everything one protocol trial produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub alice_basis: Basis,
    pub bob_basis: Basis,
    pub eve_action: Option<EveAction>,
    pub alice_outcome: Outcome,
    pub bob_outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classical_bits: Option<ClassicalMessage>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alice_key: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bob_key: Option<u64>,
    pub retained: bool,
    /// Reserved for the security-check subset; excluded from key material.
    pub check: bool,
}

/// Cumulative-weight table for inverse-CDF sampling over bank indices.
#[derive(Clone, Debug)]
struct Dist {
    cum: Vec<f64>,
    items: Vec<usize>,
}

impl Dist {
    fn build(weights: impl Iterator<Item = (usize, f64)>) -> Dist {
        let mut cum = Vec::new();
        let mut items = Vec::new();
        let mut acc = 0.0;
        for (idx, w) in weights {
            if w > 0.0 {
                acc += w;
                cum.push(acc);
                items.push(idx);
            }
        }
        // May be empty for unreachable branches (e.g. the conditional of an
        // Alice outcome with zero marginal weight); sampling asserts instead.
        Dist { cum, items }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> usize {
        let total = *self
            .cum
            .last()
            .expect("sampled an unreachable (zero-mass) branch");
        let target = rng.random::<f64>() * total;
        let pos = self.cum.partition_point(|&c| c <= target);
        self.items[pos.min(self.items.len() - 1)]
    }
}

/// Precomputed sampling tables for one protocol configuration.
pub struct TrialSampler {
    cfg: ProtocolConfig,
    /// Detector identities per basis (index space of the distributions).
    raws: [Vec<RawOutcome>; 2],
    /// Alice marginal per basis.
    alice: [Dist; 2],
    /// cond[alice_basis][target_basis][alice_idx]: outcome distribution of a
    /// measurement on Bob's conditional state (used by Eve and by Bob when
    /// no interception happens).
    cond: [[Vec<Dist>; 2]; 2],
    /// resend[eve_basis][target_basis][eve_idx]: Bob's outcome distribution
    /// on Eve's resent detector state.
    resend: [[Vec<Dist>; 2]; 2],
    check_fraction: f64,
}

fn basis_slot(b: Basis) -> usize {
    match b {
        Basis::L => 0,
        Basis::D => 1,
    }
}

impl TrialSampler {
    pub fn new(cfg: &ProtocolConfig) -> Result<TrialSampler, Error> {
        cfg.validate()?;
        Self::with_check_fraction(cfg, 0.0)
    }

    /// Sampler that additionally marks each trial for the security-check
    /// subset with the given probability.
    pub fn with_check_fraction(
        cfg: &ProtocolConfig,
        check_fraction: f64,
    ) -> Result<TrialSampler, Error> {
        cfg.validate()?;
        if !(0.0..1.0).contains(&check_fraction) {
            return Err(Error::Domain(
                "check fraction must lie in [0, 1)".into(),
            ));
        }
        let psi = source_pairs::<f64>(cfg);
        let banks = [
            bank_entries::<f64>(Basis::L, cfg),
            bank_entries::<f64>(Basis::D, cfg),
        ];
        let raws = [
            banks[0].iter().map(|e| e.raw).collect::<Vec<_>>(),
            banks[1].iter().map(|e| e.raw).collect::<Vec<_>>(),
        ];

        // Alice marginals: weight(a) = povm(a) · ‖⟨a|ψ⟩_A‖².
        let alice = [0, 1].map(|b| {
            Dist::build(banks[b].iter().enumerate().map(|(i, det)| {
                let residual = psi.alice_overlap(&det.ket);
                (i, det.povm_factor * residual.norm_sqr())
            }))
        });

        // measurement distribution of `state` in `target` basis
        let measure = |state: &Ket<f64>, target: usize| -> Dist {
            Dist::build(banks[target].iter().enumerate().map(|(i, det)| {
                (
                    i,
                    det.povm_factor
                        * crate::ket::inner_product(&det.ket, state).norm_sqr(),
                )
            }))
        };

        let cond = [0, 1].map(|ab| {
            [0, 1].map(|tb| {
                banks[ab]
                    .iter()
                    .map(|det| measure(&psi.alice_overlap(&det.ket), tb))
                    .collect::<Vec<_>>()
            })
        });

        let resend = [0, 1].map(|eb| {
            [0, 1].map(|tb| {
                banks[eb]
                    .iter()
                    .map(|det| measure(&det.ket, tb))
                    .collect::<Vec<_>>()
            })
        });

        Ok(TrialSampler {
            cfg: *cfg,
            raws,
            alice,
            cond,
            resend,
            check_fraction,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    /// Draws one trial. Draw order per trial: check mark, Alice basis,
    /// Alice outcome, (interception coin, Eve basis, Eve outcome when
    /// enabled), Bob basis, Bob outcome.
    pub fn sample_trial(&self, rng: &mut ChaCha12Rng) -> TrialRecord {
        let cfg = &self.cfg;
        let check = self.check_fraction > 0.0 && rng.random_bool(self.check_fraction);
        let alice_basis = if rng.random_bool(0.5) { Basis::L } else { Basis::D };
        let ab = basis_slot(alice_basis);
        let alice_idx = self.alice[ab].sample(rng);

        let eve_action = if cfg.eve_enabled {
            let intercept = cfg.eta > 0.0 && rng.random_bool(cfg.eta);
            if intercept {
                let eve_basis = if rng.random_bool(0.5) { Basis::L } else { Basis::D };
                let eb = basis_slot(eve_basis);
                let eve_idx = self.cond[ab][eb][alice_idx].sample(rng);
                Some((eve_basis, eve_idx))
            } else {
                None
            }
        } else {
            None
        };

        let bob_basis = if rng.random_bool(0.5) { Basis::L } else { Basis::D };
        let bb = basis_slot(bob_basis);
        let bob_idx = match eve_action {
            Some((eve_basis, eve_idx)) => {
                self.resend[basis_slot(eve_basis)][bb][eve_idx].sample(rng)
            }
            None => self.cond[ab][bb][alice_idx].sample(rng),
        };

        let alice_outcome = self.raws[ab][alice_idx].to_outcome(cfg);
        let bob_outcome = self.raws[bb][bob_idx].to_outcome(cfg);
        let retained = !matches!(
            alice_outcome,
            Outcome::OutOfRangeL | Outcome::OutOfRangeD
        ) && !matches!(bob_outcome, Outcome::OutOfRangeL | Outcome::OutOfRangeD);

        TrialRecord {
            alice_basis,
            bob_basis,
            eve_action: eve_action.map(|(basis, idx)| EveAction {
                basis,
                outcome: self.raws[basis_slot(basis)][idx],
            }),
            alice_outcome,
            bob_outcome,
            classical_bits: None,
            alice_key: None,
            bob_key: None,
            retained,
            check,
        }
    }
}

/// Convenience wrapper matching the one-shot operation signature.
pub fn sample_trial(sampler: &TrialSampler, stream: RngStream) -> TrialRecord {
    sampler.sample_trial(&mut stream.rng())
}

// ---------------------------------------------------------------------------
// Reconciliation codes
// ---------------------------------------------------------------------------

/// Bit Alice broadcasts when both parties measured eigenstates. Alternates
/// at index distance 2 so Bob can split his two neighbor candidates.
pub fn ll_bit(m: u32) -> u8 {
    u8::from(m % 4 == 0 || m % 4 == 3)
}

/// Two-bit code for the eigenstate index in mixed-basis trials: period-3
/// cycle 01, 10, 00 anchored at m0. Callers only pass alphabet indices, so
/// m ≥ m0 always holds.
pub fn ld_code(m: u32, m0: u32) -> u8 {
    debug_assert!(m >= m0);
    match (m - m0) % 3 {
        0 => 0b01,
        1 => 0b10,
        _ => 0b00,
    }
}

/// Two-bit code for a superposition slot: period-8 pairing 00 00 01 01 10
/// 10 11 11 anchored at slot 1.
pub fn dd_code(n: u32) -> u8 {
    (((n - 1) % 8) / 2) as u8
}

fn eigen_index(outcome: Outcome) -> Option<u32> {
    match outcome {
        Outcome::EigenDetect { m } => Some(m.get()),
        _ => None,
    }
}

fn slot_index(outcome: Outcome) -> Option<u32> {
    match outcome {
        Outcome::CDetect { n } | Outcome::DDetect { n } => Some(n.get()),
        _ => None,
    }
}

/// Alice's nominal value index: the eigenstate index in L, the detector
/// slot in D (both detector types of a slot signal the same key symbol).
fn nominal_index(outcome: Outcome) -> Option<u32> {
    eigen_index(outcome).or_else(|| slot_index(outcome))
}

/// Candidate indices for the sender's value given the receiver's outcome,
/// before alphabet pruning. Offsets follow the nonzero-overlap structure of
/// the source and detector states.
fn candidate_offsets(alice_basis: Basis, receiver: Outcome) -> (u32, Vec<i64>) {
    let (own, offsets): (u32, Vec<i64>) = match (alice_basis, receiver) {
        (Basis::L, Outcome::EigenDetect { m }) => (m.get(), vec![-1, 1]),
        (Basis::L, Outcome::CDetect { n } | Outcome::DDetect { n }) => {
            (n.get(), vec![-2, 0, 2])
        }
        (Basis::D, Outcome::EigenDetect { m }) => (m.get(), vec![-2, 0, 2]),
        (Basis::D, Outcome::CDetect { n } | Outcome::DDetect { n }) => {
            (n.get(), vec![-3, -1, 1, 3])
        }
        _ => (0, vec![]),
    };
    (own, offsets)
}

fn candidates(alice_basis: Basis, receiver: Outcome, cfg: &ProtocolConfig) -> Vec<u32> {
    let (own, offsets) = candidate_offsets(alice_basis, receiver);
    offsets
        .into_iter()
        .filter_map(|off| {
            let idx = own as i64 + off;
            (idx >= 1).then_some(idx as u32)
        })
        .filter(|&idx| cfg.in_alphabet(idx))
        .collect()
}

/// The code Alice attaches to her value for the given basis pair.
fn alice_message(
    alice_basis: Basis,
    bob_basis: Basis,
    alice_value: u32,
    cfg: &ProtocolConfig,
) -> ClassicalMessage {
    match (alice_basis, bob_basis) {
        (Basis::L, Basis::L) => ClassicalMessage::OneBit(ll_bit(alice_value)),
        (Basis::L, Basis::D) => ClassicalMessage::TwoBits(ld_code(alice_value, cfg.m0)),
        (Basis::D, _) => ClassicalMessage::TwoBits(dd_code(alice_value)),
    }
}

fn code_matches(
    message: ClassicalMessage,
    alice_basis: Basis,
    candidate: u32,
    cfg: &ProtocolConfig,
) -> bool {
    match (message, alice_basis) {
        (ClassicalMessage::OneBit(b), Basis::L) => ll_bit(candidate) == b,
        (ClassicalMessage::TwoBits(c), Basis::L) => ld_code(candidate, cfg.m0) == c,
        (ClassicalMessage::TwoBits(c), Basis::D) => dd_code(candidate) == c,
        _ => false,
    }
}

/// Runs the classical exchange on a retained trial, filling the message and
/// both key symbols. Reconciliation can fail (no candidate matches the
/// code); the trial then carries the message but no keys.
pub fn reconcile(trial: &TrialRecord, cfg: &ProtocolConfig) -> Result<TrialRecord, Error> {
    if !trial.retained {
        return Err(Error::Contract(
            "reconcile requires a retained trial".into(),
        ));
    }
    let alice_value = nominal_index(trial.alice_outcome)
        .ok_or_else(|| Error::Contract("retained trial lacks an Alice value".into()))?;
    let message = alice_message(trial.alice_basis, trial.bob_basis, alice_value, cfg);

    let cands = candidates(trial.alice_basis, trial.bob_outcome, cfg);
    let mut matches = cands
        .into_iter()
        .filter(|&c| code_matches(message, trial.alice_basis, c, cfg));
    let decoded = match (matches.next(), matches.next()) {
        (Some(c), None) => Some(c),
        _ => None, // ambiguous or no match: reconciliation failed
    };

    let mut out = trial.clone();
    out.classical_bits = Some(message);
    if let Some(bob_value) = decoded {
        out.alice_key = Some(fib(FibIndex::new(alice_value)?));
        out.bob_key = Some(fib(FibIndex::new(bob_value)?));
    }
    Ok(out)
}

/// Eve's decoded key guess: she applies the same candidate-and-code rules
/// Bob uses, around her own detector outcome, after hearing Alice's bits.
/// Ties (possible only in the one-bit case) break toward the lower index.
pub fn eve_guess(trial: &TrialRecord, cfg: &ProtocolConfig) -> Option<u64> {
    let action = trial.eve_action?;
    let message = trial.classical_bits?;
    let own = match action.outcome {
        RawOutcome::Eigen { m } => m,
        RawOutcome::C { n } | RawOutcome::D { n } => n,
    };
    let offsets: Vec<i64> = match (trial.alice_basis, action.basis) {
        (Basis::L, Basis::L) => vec![-1, 1],
        (Basis::L, Basis::D) => vec![-2, 0, 2],
        (Basis::D, Basis::L) => vec![-2, 0, 2],
        (Basis::D, Basis::D) => vec![-3, -1, 1, 3],
    };
    let decoded = offsets
        .into_iter()
        .filter_map(|off| {
            let idx = own as i64 + off;
            (idx >= 1).then_some(idx as u32)
        })
        .filter(|&idx| cfg.in_alphabet(idx))
        .find(|&c| code_matches(message, trial.alice_basis, c, cfg));
    decoded.map(|c| fib(FibIndex::new(c).expect("alphabet index")))
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// How an empirical histogram is turned into a probability matrix.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Normalization {
    /// Divide by the retained-trial count: quadrant masses are empirical.
    Global,
    /// Give each basis-combination block mass exactly 1/4, matching the
    /// analytic convention.
    BlockQuarter,
}

/// Raw outcome-pair counts on the matrix layout.
#[derive(Clone, Debug)]
pub struct OutcomeHistogram {
    dim: usize,
    counts: Vec<u64>,
    pub discarded: u64,
}

impl OutcomeHistogram {
    pub fn new(cfg: &ProtocolConfig) -> Self {
        let dim = cfg.outcome_count();
        OutcomeHistogram {
            dim,
            counts: vec![0; dim * dim],
            discarded: 0,
        }
    }

    pub fn record(&mut self, trial: &TrialRecord, cfg: &ProtocolConfig) {
        let i = crate::protocol::outcome_index(trial.alice_outcome, cfg)
            .expect("aggregated outcome");
        let j = crate::protocol::outcome_index(trial.bob_outcome, cfg)
            .expect("aggregated outcome");
        let n = cfg.n as usize;
        let oor = [1, n + 2];
        if oor.contains(&i) && oor.contains(&j) {
            self.discarded += 1;
        } else {
            self.counts[(j - 1) * self.dim + (i - 1)] += 1;
        }
    }

    pub fn merge(&mut self, other: &OutcomeHistogram) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.discarded += other.discarded;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn to_matrix(
        &self,
        cfg: &ProtocolConfig,
        norm: Normalization,
    ) -> Result<JointProbabilityMatrix, Error> {
        let dim = self.dim;
        if self.total() == 0 {
            return Err(Error::Domain("empty histogram".into()));
        }
        let mut data = vec![0.0; dim * dim];
        match norm {
            Normalization::Global => {
                let total = self.total() as f64;
                for (slot, &c) in data.iter_mut().zip(&self.counts) {
                    *slot = c as f64 / total;
                }
            }
            Normalization::BlockQuarter => {
                let n = cfg.n as usize;
                let mut quad_totals = [[0u64; 2]; 2];
                for j in 1..=dim {
                    for i in 1..=dim {
                        let (qa, qb) = analytic::quadrant_of(j, i, n);
                        quad_totals[basis_slot(qa)][basis_slot(qb)] +=
                            self.counts[(j - 1) * dim + (i - 1)];
                    }
                }
                for j in 1..=dim {
                    for i in 1..=dim {
                        let (qa, qb) = analytic::quadrant_of(j, i, n);
                        let qt = quad_totals[basis_slot(qa)][basis_slot(qb)];
                        if qt > 0 {
                            data[(j - 1) * dim + (i - 1)] = 0.25
                                * self.counts[(j - 1) * dim + (i - 1)] as f64
                                / qt as f64;
                        }
                    }
                }
            }
        }
        Ok(JointProbabilityMatrix::from_parts(cfg.n, cfg.m0, data))
    }
}

/// Normalized outcome-pair histogram over the matrix layout, excluding
/// events out of range for both parties.
pub fn empirical_matrix(
    trials: &[TrialRecord],
    cfg: &ProtocolConfig,
) -> Result<JointProbabilityMatrix, Error> {
    empirical_matrix_normalized(trials, cfg, Normalization::Global)
}

pub fn empirical_matrix_normalized(
    trials: &[TrialRecord],
    cfg: &ProtocolConfig,
    norm: Normalization,
) -> Result<JointProbabilityMatrix, Error> {
    if trials.is_empty() {
        return Err(Error::Domain("empirical matrix needs at least one trial".into()));
    }
    let mut hist = OutcomeHistogram::new(cfg);
    for t in trials {
        hist.record(t, cfg);
    }
    hist.to_matrix(cfg, norm)
}

/// Fraction of retained, reconciled trials whose key symbols agree.
pub fn key_agreement_rate(trials: &[TrialRecord]) -> Result<f64, Error> {
    let mut reconciled = 0u64;
    let mut agree = 0u64;
    let mut any_retained = false;
    for t in trials {
        if t.retained {
            any_retained = true;
            if let (Some(a), Some(b)) = (t.alice_key, t.bob_key) {
                reconciled += 1;
                agree += u64::from(a == b);
            }
        }
    }
    if !any_retained {
        return Err(Error::Domain("no retained trials".into()));
    }
    if reconciled == 0 {
        return Err(Error::Domain("no reconciled trials".into()));
    }
    Ok(agree as f64 / reconciled as f64)
}

// ---------------------------------------------------------------------------
// Security check
// ---------------------------------------------------------------------------

/// Verdict of the statistical eavesdropper test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SecurityVerdict {
    Clean,
    EveDetected,
    /// Check subset too small for the threshold rule.
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SecurityCheck {
    pub checked_trials: u64,
    pub empirical_disturbance: f64,
    pub threshold: f64,
    pub null_mean: f64,
    pub null_std: f64,
    pub verdict: SecurityVerdict,
}

/// Smallest check subset the null calibration accepts.
pub const MIN_CHECK_TRIALS: u64 = 200;

/// Null runs used to set the detection threshold.
pub const NULL_CALIBRATION_RUNS: usize = 1000;

/// Estimates the null distribution of the empirical disturbance at the
/// given retained-sample size by resampling the no-Eve matrix, and returns
/// its mean and standard deviation.
pub fn calibrate_null_disturbance(
    cfg: &ProtocolConfig,
    p0: &JointProbabilityMatrix,
    subset_size: u64,
    runs: usize,
    seed: u64,
    workers: u32,
) -> (f64, f64) {
    let dim = cfg.outcome_count();
    // cumulative cell distribution of P0 (its zero cells never fire)
    let mut cum = Vec::with_capacity(dim * dim);
    let mut cells = Vec::with_capacity(dim * dim);
    let mut acc = 0.0;
    for (idx, &p) in p0.data().iter().enumerate() {
        if p > 0.0 {
            acc += p;
            cum.push(acc);
            cells.push(idx);
        }
    }
    let samples: Vec<f64> = run_on_workers(runs as u64, workers, |run_range, _| {
        let mut local = Vec::with_capacity((run_range.end - run_range.start) as usize);
        for run in run_range {
            let mut rng = RngStream {
                seed,
                // dedicated stream family for calibration runs
                stream_id: (1 << 32) + run,
            }
            .rng();
            let mut hist = OutcomeHistogram::new(cfg);
            for _ in 0..subset_size {
                let target = rng.random::<f64>() * acc;
                let pos = cum.partition_point(|&c| c <= target);
                let cell = cells[pos.min(cells.len() - 1)];
                hist.counts[cell] += 1;
            }
            let emp = hist
                .to_matrix(cfg, Normalization::BlockQuarter)
                .expect("nonempty");
            let dp = analytic::delta(&emp, p0).expect("matching layout");
            local.push(dp.frobenius());
        }
        local
    })
    .concat();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples
        .iter()
        .map(|s| (s - mean) * (s - mean))
        .sum::<f64>()
        / (samples.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Compares the check subset against the analytic no-Eve matrix. The
/// detection threshold is the null mean plus three standard deviations,
/// calibrated by resampling at the observed subset size.
pub fn security_check(
    trials: &[TrialRecord],
    cfg: &ProtocolConfig,
    null_seed: u64,
) -> Result<SecurityCheck, Error> {
    let mut hist = OutcomeHistogram::new(cfg);
    let mut count = 0u64;
    for t in trials.iter().filter(|t| t.check) {
        hist.record(t, cfg);
        count += 1;
    }
    security_check_from_histogram(&hist, count, cfg, null_seed, 1)
}

fn security_check_from_histogram(
    hist: &OutcomeHistogram,
    count: u64,
    cfg: &ProtocolConfig,
    null_seed: u64,
    workers: u32,
) -> Result<SecurityCheck, Error> {
    if count < MIN_CHECK_TRIALS {
        return Ok(SecurityCheck {
            checked_trials: count,
            empirical_disturbance: f64::NAN,
            threshold: f64::NAN,
            null_mean: f64::NAN,
            null_std: f64::NAN,
            verdict: SecurityVerdict::Inconclusive,
        });
    }
    let p0 = analytic::joint_prob_no_eve(cfg)?;
    let emp = hist.to_matrix(cfg, Normalization::BlockQuarter)?;
    let observed = analytic::delta(&emp, &p0)?.frobenius();
    // The statistic depends only on retained counts, so the null is
    // calibrated at the observed retained-sample size.
    let (null_mean, null_std) = calibrate_null_disturbance(
        cfg,
        &p0,
        hist.total(),
        NULL_CALIBRATION_RUNS,
        null_seed,
        workers,
    );
    let threshold = null_mean + 3.0 * null_std;
    Ok(SecurityCheck {
        checked_trials: count,
        empirical_disturbance: observed,
        threshold,
        null_mean,
        null_std,
        verdict: if observed > threshold {
            SecurityVerdict::EveDetected
        } else {
            SecurityVerdict::Clean
        },
    })
}

// ---------------------------------------------------------------------------
// Full simulation driver
// ---------------------------------------------------------------------------

/// Parameters of one simulation run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationParams {
    pub trials: u64,
    pub seed: u64,
    pub workers: u32,
    /// Probability a trial joins the security-check subset.
    pub check_fraction: f64,
    /// Keep per-trial records (memory-heavy for large runs).
    #[serde(default)]
    pub collect_log: bool,
}

impl SimulationParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.trials < 1 {
            return Err(Error::Domain("at least one trial required".into()));
        }
        if self.workers < 1 {
            return Err(Error::Domain("at least one worker required".into()));
        }
        if !(0.0..1.0).contains(&self.check_fraction) {
            return Err(Error::Domain("check fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Aggregated results of a simulation run.
#[derive(Clone, Debug)]
pub struct SimulationOutput {
    pub params: SimulationParams,
    /// Histogram over all trials.
    pub histogram: OutcomeHistogram,
    /// Histogram over the security-check subset only.
    pub check_histogram: OutcomeHistogram,
    pub check_trials: u64,
    pub retained_key_trials: u64,
    pub reconciled: u64,
    pub key_matches: u64,
    pub reconcile_failures: u64,
    pub eve_intercepts: u64,
    pub eve_guesses: u64,
    pub eve_correct: u64,
    pub security: SecurityCheck,
    pub log: Option<Vec<TrialRecord>>,
}

impl SimulationOutput {
    pub fn key_agreement_rate(&self) -> f64 {
        if self.reconciled == 0 {
            f64::NAN
        } else {
            self.key_matches as f64 / self.reconciled as f64
        }
    }

    /// Eve's decoded-key accuracy over intercepted, reconciled trials.
    pub fn eve_accuracy(&self) -> f64 {
        if self.eve_guesses == 0 {
            f64::NAN
        } else {
            self.eve_correct as f64 / self.eve_guesses as f64
        }
    }

    pub fn empirical(
        &self,
        cfg: &ProtocolConfig,
        norm: Normalization,
    ) -> Result<JointProbabilityMatrix, Error> {
        self.histogram.to_matrix(cfg, norm)
    }
}

/// Splits `total` items across workers and runs `body` on each chunk in its
/// own thread; results come back in worker order.
fn run_on_workers<T: Send>(
    total: u64,
    workers_hint: u32,
    body: impl Fn(std::ops::Range<u64>, u32) -> T + Sync,
) -> Vec<T> {
    let workers = workers_hint.max(1).min(total.max(1) as u32);
    let base = total / workers as u64;
    let rem = total % workers as u64;
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        let mut start = 0u64;
        for w in 0..workers {
            let len = base + u64::from((w as u64) < rem);
            let range = start..start + len;
            start += len;
            let body = &body;
            handles.push(scope.spawn(move || body(range, w)));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

struct WorkerTally {
    histogram: OutcomeHistogram,
    check_histogram: OutcomeHistogram,
    check_trials: u64,
    retained_key_trials: u64,
    reconciled: u64,
    key_matches: u64,
    reconcile_failures: u64,
    eve_intercepts: u64,
    eve_guesses: u64,
    eve_correct: u64,
    log: Vec<TrialRecord>,
}

/// Runs the full protocol simulation with deterministic per-worker RNG
/// streams. The output is a pure function of (config, params).
pub fn run_simulation(
    cfg: &ProtocolConfig,
    params: &SimulationParams,
) -> Result<SimulationOutput, Error> {
    cfg.validate()?;
    params.validate()?;
    let sampler = TrialSampler::with_check_fraction(cfg, params.check_fraction)?;

    let tallies = run_on_workers(params.trials, params.workers, |range, worker| {
        let mut rng = RngStream {
            seed: params.seed,
            stream_id: worker as u64,
        }
        .rng();
        let mut t = WorkerTally {
            histogram: OutcomeHistogram::new(cfg),
            check_histogram: OutcomeHistogram::new(cfg),
            check_trials: 0,
            retained_key_trials: 0,
            reconciled: 0,
            key_matches: 0,
            reconcile_failures: 0,
            eve_intercepts: 0,
            eve_guesses: 0,
            eve_correct: 0,
            log: Vec::new(),
        };
        for _ in range {
            let mut trial = sampler.sample_trial(&mut rng);
            t.histogram.record(&trial, cfg);
            if trial.eve_action.is_some() {
                t.eve_intercepts += 1;
            }
            if trial.check {
                t.check_trials += 1;
                t.check_histogram.record(&trial, cfg);
            } else if trial.retained {
                // key material: retained trials outside the check subset
                t.retained_key_trials += 1;
                trial = reconcile(&trial, cfg).expect("retained trial");
                match (trial.alice_key, trial.bob_key) {
                    (Some(a), Some(b)) => {
                        t.reconciled += 1;
                        t.key_matches += u64::from(a == b);
                        if trial.eve_action.is_some() {
                            t.eve_guesses += 1;
                            if eve_guess(&trial, cfg) == Some(a) {
                                t.eve_correct += 1;
                            }
                        }
                    }
                    _ => t.reconcile_failures += 1,
                }
            }
            if params.collect_log {
                t.log.push(trial);
            }
        }
        t
    });

    let mut histogram = OutcomeHistogram::new(cfg);
    let mut check_histogram = OutcomeHistogram::new(cfg);
    let mut out = SimulationOutput {
        params: *params,
        histogram: OutcomeHistogram::new(cfg),
        check_histogram: OutcomeHistogram::new(cfg),
        check_trials: 0,
        retained_key_trials: 0,
        reconciled: 0,
        key_matches: 0,
        reconcile_failures: 0,
        eve_intercepts: 0,
        eve_guesses: 0,
        eve_correct: 0,
        security: SecurityCheck {
            checked_trials: 0,
            empirical_disturbance: f64::NAN,
            threshold: f64::NAN,
            null_mean: f64::NAN,
            null_std: f64::NAN,
            verdict: SecurityVerdict::Inconclusive,
        },
        log: params.collect_log.then(Vec::new),
    };
    for t in tallies {
        histogram.merge(&t.histogram);
        check_histogram.merge(&t.check_histogram);
        out.check_trials += t.check_trials;
        out.retained_key_trials += t.retained_key_trials;
        out.reconciled += t.reconciled;
        out.key_matches += t.key_matches;
        out.reconcile_failures += t.reconcile_failures;
        out.eve_intercepts += t.eve_intercepts;
        out.eve_guesses += t.eve_guesses;
        out.eve_correct += t.eve_correct;
        if let Some(log) = out.log.as_mut() {
            log.extend(t.log);
        }
    }
    out.security = if params.check_fraction > 0.0 {
        security_check_from_histogram(
            &check_histogram,
            out.check_trials,
            cfg,
            params.seed,
            params.workers,
        )?
    } else {
        out.security
    };
    out.histogram = histogram;
    out.check_histogram = check_histogram;
    Ok(out)
}

/// Conditional experiment: a photon prepared in the eigenstate |F_m⟩ heads
/// to Bob, Eve intercepts in the superposition basis and resends, Bob
/// measures eigenstates. Returns Bob's outcome counts by mode index.
pub fn eigenstate_intercept_distribution(
    cfg: &ProtocolConfig,
    m: FibIndex,
    trials: u64,
    seed: u64,
    workers: u32,
) -> Result<BTreeMap<u32, u64>, Error> {
    cfg.validate()?;
    let banks = [
        bank_entries::<f64>(Basis::L, cfg),
        bank_entries::<f64>(Basis::D, cfg),
    ];
    let mut state = Ket::new();
    state.add(m.get(), crate::num::Cx::real(1.0));
    let eve_dist = Dist::build(banks[1].iter().enumerate().map(|(i, det)| {
        (
            i,
            det.povm_factor * crate::ket::inner_product(&det.ket, &state).norm_sqr(),
        )
    }));
    let resend: Vec<Dist> = banks[1]
        .iter()
        .map(|det| {
            Dist::build(banks[0].iter().enumerate().map(|(i, l)| {
                (
                    i,
                    l.povm_factor * crate::ket::inner_product(&l.ket, &det.ket).norm_sqr(),
                )
            }))
        })
        .collect();

    let maps = run_on_workers(trials, workers, |range, worker| {
        let mut rng = RngStream {
            seed,
            stream_id: worker as u64,
        }
        .rng();
        let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
        for _ in range {
            let e = eve_dist.sample(&mut rng);
            let b = resend[e].sample(&mut rng);
            if let RawOutcome::Eigen { m } = banks[0][b].raw {
                *counts.entry(m).or_insert(0) += 1;
            }
        }
        counts
    });
    let mut total: BTreeMap<u32, u64> = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            *total.entry(k).or_insert(0) += v;
        }
    }
    Ok(total)
}
