//! Exact joint-outcome probability matrices from first-principles
//! projections.
//!
//! Entries follow the projection rule: the probability that Alice fires
//! detector a and Bob fires detector b is proportional to
//! povm(a)·povm(b)·|(⟨a| ⊗ ⟨b|) ψ⟩|², aggregated over the out-of-range
//! rows/columns. Events out of range for both parties are excluded, and each
//! of the four basis-combination blocks is normalized to total mass 1/4
//! (the bases are chosen by independent fair coins).
//!
//! With an eavesdropper on Bob's channel the chain gains her projection:
//! she measures in a random basis, fires detector e with weight
//! povm(a)·povm(e)·|(⟨a| ⊗ ⟨e|) ψ⟩|², and resends a copy of her detector
//! state, which Bob then measures.
//!
//! Every computation runs over a generic scalar field; `f64` drives sweeps
//! and simulation oracles, [`SqrtExt`](crate::num::SqrtExt) gives the
//! exact-rational mode whose probabilities are plain rationals.

use crate::num::{Field, SqrtExt};
use crate::protocol::{bank_entries, Basis, ProtocolConfig, RawOutcome};
use crate::Error;
use num_rational::BigRational;

/// Which block of the (3N+2)×(3N+2) layout to extract. Rows are Bob
/// outcomes, columns Alice outcomes; `L` and `D` are the same-basis blocks,
/// `C` is Bob-L × Alice-D and `F` its mirror.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Block {
    L,
    C,
    F,
    D,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::L, Block::C, Block::F, Block::D];

    pub fn name(self) -> &'static str {
        match self {
            Block::L => "L",
            Block::C => "C",
            Block::F => "F",
            Block::D => "D",
        }
    }
}

/// Intercept-resend eavesdropper model. Eve taps Bob's channel only and
/// measures in the L basis with probability `basis_prob`, D otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EveModel {
    pub basis_prob: f64,
}

impl Default for EveModel {
    fn default() -> Self {
        EveModel { basis_prob: 0.5 }
    }
}

impl EveModel {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.basis_prob) {
            return Err(Error::Domain("Eve basis probability outside [0,1]".into()));
        }
        Ok(())
    }
}

/// Dense joint-outcome probability matrix over the 1..3N+2 index layout.
/// Row index = Bob outcome, column index = Alice outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct JointProbabilityMatrix {
    n: u32,
    m0: u32,
    data: Vec<f64>,
}

/// Entrywise difference of two probability matrices; entries sum to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMatrix {
    n: u32,
    m0: u32,
    data: Vec<f64>,
}

/// Joint matrix in exact rational arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactJointMatrix {
    n: u32,
    m0: u32,
    data: Vec<BigRational>,
}

macro_rules! matrix_common {
    ($ty:ty, $elem:ty) => {
        impl $ty {
            pub fn dim(&self) -> usize {
                3 * self.n as usize + 2
            }

            pub fn alphabet_size(&self) -> u32 {
                self.n
            }

            pub fn m0(&self) -> u32 {
                self.m0
            }

            /// Entry by 1-based matrix indices (Bob row, Alice column).
            pub fn get(&self, bob: usize, alice: usize) -> &$elem {
                let d = self.dim();
                assert!(bob >= 1 && bob <= d && alice >= 1 && alice <= d);
                &self.data[(bob - 1) * d + (alice - 1)]
            }

            pub fn data(&self) -> &[$elem] {
                &self.data
            }

            /// Extracts a block as rows of values.
            pub fn block(&self, which: Block) -> Vec<Vec<$elem>> {
                let d = self.dim();
                let split = self.n as usize + 1;
                let (rows, cols) = match which {
                    Block::L => (0..split, 0..split),
                    Block::C => (0..split, split..d),
                    Block::F => (split..d, 0..split),
                    Block::D => (split..d, split..d),
                };
                rows.map(|r| {
                    cols.clone()
                        .map(|c| self.data[r * d + c].clone())
                        .collect()
                })
                .collect()
            }
        }
    };
}

matrix_common!(JointProbabilityMatrix, f64);
matrix_common!(DeltaMatrix, f64);
matrix_common!(ExactJointMatrix, BigRational);

impl JointProbabilityMatrix {
    pub(crate) fn from_parts(n: u32, m0: u32, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), (3 * n as usize + 2).pow(2));
        JointProbabilityMatrix { n, m0, data }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Total mass of a block.
    pub fn block_mass(&self, which: Block) -> f64 {
        self.block(which).iter().flatten().sum()
    }

    /// Cells with nonzero probability, as 1-based (bob, alice) pairs.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let d = self.dim();
        let mut out = Vec::new();
        for r in 0..d {
            for c in 0..d {
                if self.data[r * d + c] != 0.0 {
                    out.push((r + 1, c + 1));
                }
            }
        }
        out
    }
}

impl ExactJointMatrix {
    pub fn to_f64(&self) -> JointProbabilityMatrix {
        use num_traits::ToPrimitive;
        JointProbabilityMatrix {
            n: self.n,
            m0: self.m0,
            data: self
                .data
                .iter()
                .map(|r| r.to_f64().expect("rational in f64 range"))
                .collect(),
        }
    }
}

impl DeltaMatrix {
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Root-sum-square of all entries (Frobenius norm).
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> DeltaMatrix {
        DeltaMatrix {
            n: self.n,
            m0: self.m0,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

/// Quadrant membership of a 1-based matrix index.
fn index_basis(index: usize, n: usize) -> Basis {
    if index <= n + 1 {
        Basis::L
    } else {
        Basis::D
    }
}

/// Matrix index (1-based) for a raw detector firing, with out-of-range
/// aggregation.
fn raw_index(raw: RawOutcome, cfg: &ProtocolConfig) -> usize {
    let n = cfg.n as usize;
    match raw {
        RawOutcome::Eigen { m } if cfg.in_alphabet(m) => 2 + (m - cfg.m0) as usize,
        RawOutcome::Eigen { .. } => 1,
        RawOutcome::C { n: s } if cfg.in_alphabet(s) => n + 2 * (s - cfg.m0) as usize + 3,
        RawOutcome::D { n: s } if cfg.in_alphabet(s) => n + 2 * (s - cfg.m0) as usize + 4,
        _ => n + 2,
    }
}

fn is_oor(index: usize, n: usize) -> bool {
    index == 1 || index == n + 2
}

/// Core projection-chain computation, generic over the scalar field.
/// `eve` carries the (L-weight, D-weight) mixture of Eve's basis choice.
fn compute_joint<F: Field>(cfg: &ProtocolConfig, eve: Option<(F, F)>) -> Vec<F> {
    let dim = cfg.outcome_count();
    let n = cfg.n as usize;
    let psi = crate::protocol::source_pairs::<F>(cfg);
    let quarter = F::from_ratio(1, 4);
    let mut data = vec![F::zero(); dim * dim];

    for basis_a in Basis::BOTH {
        let bank_a = bank_entries::<F>(basis_a, cfg);
        for basis_b in Basis::BOTH {
            let bank_b = bank_entries::<F>(basis_b, cfg);
            let mut cells: Vec<(usize, usize, F)> = Vec::new();
            let mut total = F::zero();
            for a in &bank_a {
                let ia = raw_index(a.raw, cfg);
                match &eve {
                    None => {
                        for b in &bank_b {
                            let amp = psi.joint_amplitude(&a.ket, &b.ket);
                            if amp.is_zero() {
                                continue;
                            }
                            let w = a.povm_factor.clone()
                                * b.povm_factor.clone()
                                * amp.norm_sqr();
                            let ib = raw_index(b.raw, cfg);
                            if is_oor(ia, n) && is_oor(ib, n) {
                                continue;
                            }
                            total = total + w.clone();
                            cells.push((ib, ia, w));
                        }
                    }
                    Some((w_l, w_d)) => {
                        for basis_e in Basis::BOTH {
                            let basis_weight = match basis_e {
                                Basis::L => w_l.clone(),
                                Basis::D => w_d.clone(),
                            };
                            if basis_weight.is_zero() {
                                continue;
                            }
                            for e in bank_entries::<F>(basis_e, cfg) {
                                let amp = psi.joint_amplitude(&a.ket, &e.ket);
                                if amp.is_zero() {
                                    continue;
                                }
                                let w1 = basis_weight.clone()
                                    * a.povm_factor.clone()
                                    * e.povm_factor.clone()
                                    * amp.norm_sqr();
                                // Eve resends a copy of her detector state.
                                for b in &bank_b {
                                    let overlap =
                                        crate::ket::inner_product(&b.ket, &e.ket);
                                    if overlap.is_zero() {
                                        continue;
                                    }
                                    let w2 =
                                        b.povm_factor.clone() * overlap.norm_sqr();
                                    let ib = raw_index(b.raw, cfg);
                                    if is_oor(ia, n) && is_oor(ib, n) {
                                        continue;
                                    }
                                    let w = w1.clone() * w2;
                                    total = total + w.clone();
                                    cells.push((ib, ia, w));
                                }
                            }
                        }
                    }
                }
            }
            // normalize this basis combination to mass 1/4
            let scale = total.recip() * quarter.clone();
            for (ib, ia, w) in cells {
                let slot = &mut data[(ib - 1) * dim + (ia - 1)];
                *slot = slot.clone() + w * scale.clone();
            }
        }
    }
    data
}

/// Joint outcome probabilities with no eavesdropper present.
pub fn joint_prob_no_eve(cfg: &ProtocolConfig) -> Result<JointProbabilityMatrix, Error> {
    cfg.validate()?;
    Ok(JointProbabilityMatrix {
        n: cfg.n,
        m0: cfg.m0,
        data: compute_joint::<f64>(cfg, None),
    })
}

/// Joint outcome probabilities conditioned on Eve intercepting the trial.
pub fn joint_prob_with_eve(
    cfg: &ProtocolConfig,
    eve: &EveModel,
) -> Result<JointProbabilityMatrix, Error> {
    cfg.validate()?;
    eve.validate()?;
    Ok(JointProbabilityMatrix {
        n: cfg.n,
        m0: cfg.m0,
        data: compute_joint::<f64>(cfg, Some((eve.basis_prob, 1.0 - eve.basis_prob))),
    })
}

fn exact_data_to_rationals(data: Vec<SqrtExt>) -> Vec<BigRational> {
    data.into_iter()
        .map(|v| {
            v.as_rational()
                .cloned()
                .expect("joint probabilities are rational")
        })
        .collect()
}

/// Exact-rational twin of [`joint_prob_no_eve`].
pub fn joint_prob_no_eve_exact(cfg: &ProtocolConfig) -> Result<ExactJointMatrix, Error> {
    cfg.validate()?;
    Ok(ExactJointMatrix {
        n: cfg.n,
        m0: cfg.m0,
        data: exact_data_to_rationals(compute_joint::<SqrtExt>(cfg, None)),
    })
}

/// Exact-rational twin of [`joint_prob_with_eve`], at the protocol's fair
/// basis coin (basis_prob = 1/2).
pub fn joint_prob_with_eve_exact(cfg: &ProtocolConfig) -> Result<ExactJointMatrix, Error> {
    cfg.validate()?;
    let half = (SqrtExt::from_ratio(1, 2), SqrtExt::from_ratio(1, 2));
    Ok(ExactJointMatrix {
        n: cfg.n,
        m0: cfg.m0,
        data: exact_data_to_rationals(compute_joint::<SqrtExt>(cfg, Some(half))),
    })
}

/// P(η) = (1−η)·P₀ + η·P_E, entrywise.
pub fn mix(
    p0: &JointProbabilityMatrix,
    pe: &JointProbabilityMatrix,
    eta: f64,
) -> Result<JointProbabilityMatrix, Error> {
    if p0.n != pe.n || p0.m0 != pe.m0 {
        return Err(Error::Domain("matrix layouts do not match".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain("eta must lie in [0, 1]".into()));
    }
    let data = p0
        .data
        .iter()
        .zip(&pe.data)
        .map(|(a, b)| (1.0 - eta) * a + eta * b)
        .collect();
    Ok(JointProbabilityMatrix {
        n: p0.n,
        m0: p0.m0,
        data,
    })
}

/// ΔP = P − P₀.
pub fn delta(
    p: &JointProbabilityMatrix,
    p0: &JointProbabilityMatrix,
) -> Result<DeltaMatrix, Error> {
    if p.n != p0.n || p.m0 != p0.m0 {
        return Err(Error::Domain("matrix layouts do not match".into()));
    }
    Ok(DeltaMatrix {
        n: p.n,
        m0: p.m0,
        data: p
            .data
            .iter()
            .zip(&p0.data)
            .map(|(a, b)| a - b)
            .collect(),
    })
}

/// Checks that the quadrant structure of `index_basis` matches the block
/// accessors; used by the estimator in the Monte Carlo module.
pub(crate) fn quadrant_of(bob: usize, alice: usize, n: usize) -> (Basis, Basis) {
    (index_basis(alice, n), index_basis(bob, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{ToPrimitive, Zero};

    fn cfg() -> ProtocolConfig {
        ProtocolConfig::new(8, 2)
    }

    #[test]
    fn p0_sums_to_one_with_quarter_blocks() {
        let p0 = joint_prob_no_eve(&cfg()).unwrap();
        assert!((p0.sum() - 1.0).abs() < 1e-9);
        for b in Block::ALL {
            assert!(
                (p0.block_mass(b) - 0.25).abs() < 1e-9,
                "block {} mass {}",
                b.name(),
                p0.block_mass(b)
            );
        }
    }

    #[test]
    fn p0_is_symmetric() {
        let p0 = joint_prob_no_eve(&cfg()).unwrap();
        let d = p0.dim();
        for j in 1..=d {
            for i in 1..=d {
                assert!(
                    (p0.get(j, i) - p0.get(i, j)).abs() < 1e-9,
                    "asymmetry at ({j},{i})"
                );
            }
        }
    }

    #[test]
    fn p0_f_block_transposes_c_block() {
        let p0 = joint_prob_no_eve(&cfg()).unwrap();
        let c = p0.block(Block::C);
        let f = p0.block(Block::F);
        for (r, row) in f.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                assert!((v - c[col][r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn l_block_tridiagonal_with_corners() {
        let p0 = joint_prob_no_eve(&cfg()).unwrap();
        let l = p0.block(Block::L);
        // support only on adjacent indices plus the out-of-range corners
        for (r, row) in l.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let adjacent = r.abs_diff(c) == 1;
                let corner = (r == 0 && c == 8) || (r == 8 && c == 0);
                if adjacent || corner {
                    assert!(*v > 0.0, "expected support at ({r},{c})");
                } else {
                    assert!(*v == 0.0, "unexpected mass at ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn pe_not_symmetric_but_l_rows_only_spread() {
        let pe = joint_prob_with_eve(&cfg(), &EveModel::default()).unwrap();
        assert!((pe.sum() - 1.0).abs() < 1e-9);
        // asymmetry is confined to Eve acting on Bob: the F block need not be
        // the transpose of the C block
        let c = pe.block(Block::C);
        let f = pe.block(Block::F);
        let mut max_dev: f64 = 0.0;
        for (r, row) in f.iter().enumerate() {
            for (col, v) in row.iter().enumerate() {
                max_dev = max_dev.max((v - c[col][r]).abs());
            }
        }
        assert!(max_dev > 1e-6, "Eve on one channel must break F = Cᵀ");
    }

    #[test]
    fn pe_support_strictly_contains_p0_support() {
        let p0 = joint_prob_no_eve(&cfg()).unwrap();
        let pe = joint_prob_with_eve(&cfg(), &EveModel::default()).unwrap();
        let s0: std::collections::HashSet<_> = p0.support().into_iter().collect();
        let se: std::collections::HashSet<_> = pe.support().into_iter().collect();
        assert!(s0.is_subset(&se));
        assert!(se.len() > s0.len());
    }

    #[test]
    fn mix_endpoints_and_midpoint() {
        let p0 = joint_prob_no_eve(&cfg()).unwrap();
        let pe = joint_prob_with_eve(&cfg(), &EveModel::default()).unwrap();
        assert_eq!(mix(&p0, &pe, 0.0).unwrap(), p0);
        assert_eq!(mix(&p0, &pe, 1.0).unwrap(), pe);
        let mid = mix(&p0, &pe, 0.5).unwrap();
        for ((m, a), b) in mid.data().iter().zip(p0.data()).zip(pe.data()) {
            assert!((m - 0.5 * (a + b)).abs() < 1e-15);
        }
        assert!(mix(&p0, &pe, 1.5).is_err());
    }

    #[test]
    fn delta_sums_to_zero_and_scales_linearly() {
        let p0 = joint_prob_no_eve(&cfg()).unwrap();
        let pe = joint_prob_with_eve(&cfg(), &EveModel::default()).unwrap();
        let zero = delta(&p0, &p0).unwrap();
        assert!(zero.frobenius() == 0.0);
        let full = delta(&pe, &p0).unwrap();
        assert!(full.sum().abs() < 1e-9);
        for eta in [0.1, 0.37, 0.9] {
            let d = delta(&mix(&p0, &pe, eta).unwrap(), &p0).unwrap();
            for (a, b) in d.data().iter().zip(full.data()) {
                assert!((a - eta * b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_and_float_agree() {
        let exact = joint_prob_no_eve_exact(&cfg()).unwrap();
        let float = joint_prob_no_eve(&cfg()).unwrap();
        for (e, f) in exact.data().iter().zip(float.data()) {
            assert!((e.to_f64().unwrap() - f).abs() < 1e-12);
        }
        use num_traits::One;
        let exact_sum: BigRational = exact.data().iter().sum();
        assert!(exact_sum.is_one(), "exact mass must be exactly 1");
    }

    #[test]
    fn exact_eve_matrix_is_rational_and_sums_to_one() {
        use num_traits::One;
        let exact = joint_prob_with_eve_exact(&cfg()).unwrap();
        let sum: BigRational = exact.data().iter().sum();
        assert!(sum.is_one());
        let float = joint_prob_with_eve(&cfg(), &EveModel::default()).unwrap();
        for (e, f) in exact.data().iter().zip(float.data()) {
            assert!((e.to_f64().unwrap() - f).abs() < 1e-12);
        }
    }
}
