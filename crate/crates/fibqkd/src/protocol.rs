//! Protocol configuration, source state, detector banks, and the outcome
//! index layout.
//!
//! Detector slots in the superposition (𝔻) basis are keyed by the key index
//! they signal: slot n fires C for the superposition S_n = (|F_{n−1}⟩ +
//! |F_{n+1}⟩)/√2 (key value F_n) and D for the antisymmetric partner. The
//! bottom slot n = 1 interferes the two lowest modes (values 1 and 2), which
//! keeps the detector POVM a uniform double cover of every mode: Σ_n ½(|C_n⟩⟨C_n|
//! + |D_n⟩⟨D_n|) = 1. Eigenstate (𝕃) detections are keyed by the mode index
//! itself.

use crate::fib::FibIndex;
use crate::ket::{BiphotonKet, BipartiteKet, Ket, OamKet};
use crate::num::{inv_sqrt2, Cx, Field};
use crate::Error;
use serde::{Deserialize, Serialize};

/// Measurement basis: eigenstate sorting (L) or superposition
/// interferometry (D).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
pub enum Basis {
    L,
    D,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::L, Basis::D];
}

/// A single measurement outcome, aggregated to the alphabet window.
///
/// `EigenDetect(m)` and the two detector variants are only constructed for
/// indices inside the alphabet; anything outside collapses to the
/// out-of-range tag of its basis.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Outcome {
    EigenDetect { m: FibIndex },
    CDetect { n: FibIndex },
    DDetect { n: FibIndex },
    OutOfRangeL,
    OutOfRangeD,
}

impl Outcome {
    pub fn basis(&self) -> Basis {
        match self {
            Outcome::EigenDetect { .. } | Outcome::OutOfRangeL => Basis::L,
            _ => Basis::D,
        }
    }
}

/// Protocol parameters.
///
/// `pump_lo..=pump_hi` are the Fibonacci indices of the pump components;
/// pump component n splits into the value pair (F_{n−1}, F_{n−2}). The
/// lowest admissible component is n = 2, which splits F₂ = 2 into two
/// unit-OAM photons.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ProtocolConfig {
    /// Alphabet size (count of key symbols).
    pub n: u32,
    /// Lowest alphabet Fibonacci index.
    pub m0: u32,
    pub pump_lo: u32,
    pub pump_hi: u32,
    /// Eavesdropping fraction η ∈ [0, 1].
    pub eta: f64,
    pub eve_enabled: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig::new(8, 2)
    }
}

impl ProtocolConfig {
    /// Config with the default pump margin [m0, m0+N+2].
    pub fn new(n: u32, m0: u32) -> Self {
        ProtocolConfig {
            n,
            m0,
            pump_lo: m0,
            pump_hi: m0 + n + 2,
            eta: 0.0,
            eve_enabled: false,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self.eve_enabled = eta > 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n < 2 {
            return Err(Error::Domain("alphabet size must be at least 2".into()));
        }
        if self.m0 < 2 {
            return Err(Error::Domain(
                "m0 must be at least 2 so that index m0-1 exists".into(),
            ));
        }
        if self.pump_lo < 2 {
            return Err(Error::Domain(
                "pump_lo must be at least 2: lower components have no photon pair".into(),
            ));
        }
        if self.pump_lo > self.m0 {
            return Err(Error::Domain("pump_lo must not exceed m0".into()));
        }
        if self.pump_hi < self.m0 + self.n + 1 {
            return Err(Error::Domain(
                "pump_hi too small for a uniform in-alphabet marginal \
                 (needs at least m0+N+1)"
                    .into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::Domain("eta must lie in [0, 1]".into()));
        }
        FibIndex::new(self.m0 + self.n - 1)?;
        Ok(())
    }

    /// Number of matrix outcome indices, 3N+2.
    pub fn outcome_count(&self) -> usize {
        3 * self.n as usize + 2
    }

    pub fn alphabet(&self) -> std::ops::RangeInclusive<u32> {
        self.m0..=self.m0 + self.n - 1
    }

    pub fn in_alphabet(&self, idx: u32) -> bool {
        self.alphabet().contains(&idx)
    }

    /// Highest mode index any party can observe (source top plus one
    /// intercept-resend hop).
    pub fn mode_cap(&self) -> u32 {
        self.pump_hi + 1
    }
}

/// Raw detector identity before out-of-range aggregation.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum RawOutcome {
    Eigen { m: u32 },
    C { n: u32 },
    D { n: u32 },
}

impl RawOutcome {
    pub fn basis(&self) -> Basis {
        match self {
            RawOutcome::Eigen { .. } => Basis::L,
            _ => Basis::D,
        }
    }

    /// Aggregates to an alphabet-windowed [`Outcome`].
    pub fn to_outcome(self, cfg: &ProtocolConfig) -> Outcome {
        match self {
            RawOutcome::Eigen { m } if cfg.in_alphabet(m) => Outcome::EigenDetect {
                m: FibIndex::new(m).expect("validated index"),
            },
            RawOutcome::Eigen { .. } => Outcome::OutOfRangeL,
            RawOutcome::C { n } if cfg.in_alphabet(n) => Outcome::CDetect {
                n: FibIndex::new(n).expect("validated index"),
            },
            RawOutcome::D { n } if cfg.in_alphabet(n) => Outcome::DDetect {
                n: FibIndex::new(n).expect("validated index"),
            },
            _ => Outcome::OutOfRangeD,
        }
    }
}

/// Modes interfered by superposition slot n.
pub(crate) fn slot_modes(n: u32) -> (u32, u32) {
    if n == 1 {
        (1, 2)
    } else {
        (n - 1, n + 1)
    }
}

/// C-detector ket for slot n: (i/√2)(|F_{n−1}⟩ + |F_{n+1}⟩) = i·|S_n⟩.
pub(crate) fn c_slot_ket<F: Field>(n: u32) -> Ket<F> {
    let (lo, hi) = slot_modes(n);
    let h = inv_sqrt2::<F>();
    let mut k = Ket::new();
    k.add(lo, Cx::imag(h.clone()));
    k.add(hi, Cx::imag(h));
    k
}

/// D-detector ket for slot n: (1/√2)(|F_{n+1}⟩ − |F_{n−1}⟩).
pub(crate) fn d_slot_ket<F: Field>(n: u32) -> Ket<F> {
    let (lo, hi) = slot_modes(n);
    let h = inv_sqrt2::<F>();
    let mut k = Ket::new();
    k.add(lo, Cx::real(-h.clone()));
    k.add(hi, Cx::real(h));
    k
}

/// The normalized superposition |S_n⟩ = (|F_{n−1}⟩ + |F_{n+1}⟩)/√2.
pub fn superposition_ket(n: FibIndex) -> Result<OamKet, Error> {
    if n.get() < 2 {
        return Err(Error::Domain(
            "superposition index must be at least 2".into(),
        ));
    }
    let h = inv_sqrt2::<f64>();
    let mut k = Ket::new();
    k.add(n.get() - 1, Cx::real(h));
    k.add(n.get() + 1, Cx::real(h));
    Ok(k)
}

/// One detector of a measurement bank.
#[derive(Clone, Debug)]
pub struct DetectorSpec {
    /// Raw identity (may lie outside the alphabet).
    pub raw: RawOutcome,
    /// Alphabet-aggregated outcome this firing reports.
    pub outcome: Outcome,
    /// The state whose projection the detector registers.
    pub ket: OamKet,
    /// POVM weight multiplying |⟨ket|φ⟩|²; 1 in the L bank, 1/2 in the D bank
    /// (each mode feeds two interferometers).
    pub povm_factor: f64,
}

pub(crate) struct BankEntry<F: Field> {
    pub raw: RawOutcome,
    pub ket: Ket<F>,
    pub povm_factor: F,
}

pub(crate) fn bank_entries<F: Field>(basis: Basis, cfg: &ProtocolConfig) -> Vec<BankEntry<F>> {
    let mut out = Vec::new();
    match basis {
        Basis::L => {
            for m in 1..=cfg.mode_cap() {
                let mut ket = Ket::new();
                ket.add(m, Cx::real(F::one()));
                out.push(BankEntry {
                    raw: RawOutcome::Eigen { m },
                    ket,
                    povm_factor: F::one(),
                });
            }
        }
        Basis::D => {
            let half = F::from_ratio(1, 2);
            for n in 1..=cfg.mode_cap() + 1 {
                out.push(BankEntry {
                    raw: RawOutcome::C { n },
                    ket: c_slot_ket(n),
                    povm_factor: half.clone(),
                });
                out.push(BankEntry {
                    raw: RawOutcome::D { n },
                    ket: d_slot_ket(n),
                    povm_factor: half.clone(),
                });
            }
        }
    }
    out
}

/// Full detector bank for a basis over the extended mode range; detectors
/// outside the alphabet report the out-of-range outcome of the basis.
pub fn detector_bank(basis: Basis, cfg: &ProtocolConfig) -> Vec<DetectorSpec> {
    bank_entries::<f64>(basis, cfg)
        .into_iter()
        .map(|e| DetectorSpec {
            raw: e.raw,
            outcome: e.raw.to_outcome(cfg),
            ket: e.ket,
            povm_factor: e.povm_factor,
        })
        .collect()
}

pub(crate) fn source_pairs<F: Field>(cfg: &ProtocolConfig) -> BipartiteKet<F> {
    let one = Cx::real(F::one());
    let mut psi = BipartiteKet::new();
    for n in cfg.pump_lo..=cfg.pump_hi {
        if n == 2 {
            // F₂ = 2 splits into two unit-OAM photons; both orderings are the
            // same basis state, entering once.
            psi.add(1, 1, one.clone());
        } else if n >= 3 {
            psi.add(n - 1, n - 2, one.clone());
            psi.add(n - 2, n - 1, one.clone());
        }
    }
    psi
}

/// The normalized biphoton source state
/// ψ ∝ Σ_n (|F_{n−1}⟩_A|F_{n−2}⟩_B + |F_{n−2}⟩_A|F_{n−1}⟩_B).
pub fn source_state(cfg: &ProtocolConfig) -> Result<BiphotonKet, Error> {
    cfg.validate()?;
    source_pairs::<f64>(cfg).normalized()
}

/// Maps an outcome to its matrix index in [1, 3N+2].
///
/// 1 ↔ out-of-range (L); 2..N+1 ↔ eigenstates F_{m0}..F_{m0+N−1};
/// N+2 ↔ out-of-range (D); N+2k+3 / N+2k+4 ↔ the C / D detector of
/// alphabet slot m0+k.
pub fn outcome_index(outcome: Outcome, cfg: &ProtocolConfig) -> Result<usize, Error> {
    let n = cfg.n as usize;
    let check = |idx: FibIndex| -> Result<usize, Error> {
        if cfg.in_alphabet(idx.get()) {
            Ok((idx.get() - cfg.m0) as usize)
        } else {
            Err(Error::Domain(format!(
                "index {idx} outside the alphabet; use the out-of-range outcome"
            )))
        }
    };
    Ok(match outcome {
        Outcome::OutOfRangeL => 1,
        Outcome::EigenDetect { m } => 2 + check(m)?,
        Outcome::OutOfRangeD => n + 2,
        Outcome::CDetect { n: slot } => n + 2 * check(slot)? + 3,
        Outcome::DDetect { n: slot } => n + 2 * check(slot)? + 4,
    })
}

/// Inverse of [`outcome_index`].
pub fn outcome_from_index(index: usize, cfg: &ProtocolConfig) -> Result<Outcome, Error> {
    let n = cfg.n as usize;
    if index < 1 || index > 3 * n + 2 {
        return Err(Error::Domain(format!(
            "outcome index {index} outside [1, {}]",
            3 * n + 2
        )));
    }
    Ok(if index == 1 {
        Outcome::OutOfRangeL
    } else if index <= n + 1 {
        Outcome::EigenDetect {
            m: FibIndex::new(cfg.m0 + (index - 2) as u32)?,
        }
    } else if index == n + 2 {
        Outcome::OutOfRangeD
    } else {
        let k = (index - n - 3) / 2;
        let slot = FibIndex::new(cfg.m0 + k as u32)?;
        if (index - n - 3) % 2 == 0 {
            Outcome::CDetect { n: slot }
        } else {
            Outcome::DDetect { n: slot }
        }
    })
}

/// Human-readable label for each matrix index, in index order.
pub fn outcome_labels(cfg: &ProtocolConfig) -> Vec<String> {
    (1..=cfg.outcome_count())
        .map(|i| match outcome_from_index(i, cfg).expect("index in range") {
            Outcome::OutOfRangeL => "oorL".to_string(),
            Outcome::OutOfRangeD => "oorD".to_string(),
            Outcome::EigenDetect { m } => format!("F{m}"),
            Outcome::CDetect { n } => format!("C{n}"),
            Outcome::DDetect { n } => format!("D{n}"),
        })
        .collect()
}
