//! Security metrics: disturbance, entropies, mutual information, Eve's
//! information gain, retained fraction, and secret key rate.
//!
//! All logarithms are base 2; quantities are in bits.

use crate::analytic::{self, DeltaMatrix, EveModel, JointProbabilityMatrix};
use crate::protocol::ProtocolConfig;
use crate::Error;
use serde::{Deserialize, Serialize};

/// One row of security quantities at a fixed eavesdropping fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SecurityMetrics {
    pub eta: f64,
    /// Frobenius norm of ΔP.
    pub disturbance: f64,
    pub h_a: f64,
    pub h_b: f64,
    pub h_ab: f64,
    pub i_ab: f64,
    pub i_ae: f64,
    /// Fraction of trials with neither party out of range.
    pub retained: f64,
    /// K = I_AB − I_AE.
    pub key_rate: f64,
}

/// Disturbance 𝒟 = √(Σ ΔP_ij²).
pub fn disturbance(dp: &DeltaMatrix) -> f64 {
    dp.frobenius()
}

fn entropy(probs: impl Iterator<Item = f64>) -> f64 {
    probs
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Marginal and joint entropies plus the mutual information of a joint
/// distribution: (H_A, H_B, H_AB, I_AB).
pub fn mutual_information(p: &JointProbabilityMatrix) -> Result<(f64, f64, f64, f64), Error> {
    if p.data().iter().any(|&v| v < 0.0) {
        return Err(Error::Domain(
            "mutual information requires nonnegative entries".into(),
        ));
    }
    let d = p.dim();
    let mut pa = vec![0.0; d];
    let mut pb = vec![0.0; d];
    for j in 0..d {
        for i in 0..d {
            let v = p.data()[j * d + i];
            pa[i] += v;
            pb[j] += v;
        }
    }
    let h_a = entropy(pa.into_iter());
    let h_b = entropy(pb.into_iter());
    let h_ab = entropy(p.data().iter().copied());
    Ok((h_a, h_b, h_ab, h_a + h_b - h_ab))
}

/// Probability that a trial survives discarding: one minus the mass of the
/// out-of-range rows and columns (their intersections hold no mass, so
/// inclusion–exclusion reduces to a plain sum).
pub fn retained_fraction(p: &JointProbabilityMatrix) -> f64 {
    let d = p.dim();
    let n = p.alphabet_size() as usize;
    let oor = [1, n + 2];
    let mut mass = 0.0;
    for j in 1..=d {
        for i in 1..=d {
            if oor.contains(&j) || oor.contains(&i) {
                mass += p.get(j, i);
            }
        }
    }
    1.0 - mass
}

/// Eve's information gain per trial: I_AE = η · r(η) · I_AB.
pub fn eve_information(eta: f64, retained: f64, i_ab: f64) -> f64 {
    eta * retained * i_ab
}

/// Secret key rate K = I_AB − I_AE.
pub fn key_rate(i_ab: f64, i_ae: f64) -> f64 {
    i_ab - i_ae
}

/// Evaluates the full metrics row at one η given the two endpoint matrices.
pub fn metrics_at(
    p0: &JointProbabilityMatrix,
    pe: &JointProbabilityMatrix,
    eta: f64,
) -> Result<SecurityMetrics, Error> {
    let p = analytic::mix(p0, pe, eta)?;
    let dp = analytic::delta(&p, p0)?;
    let (h_a, h_b, h_ab, i_ab) = mutual_information(&p)?;
    let retained = retained_fraction(&p);
    let i_ae = eve_information(eta, retained, i_ab);
    Ok(SecurityMetrics {
        eta,
        disturbance: disturbance(&dp),
        h_a,
        h_b,
        h_ab,
        i_ab,
        i_ae,
        retained,
        key_rate: key_rate(i_ab, i_ae),
    })
}

/// Sweeps a uniform η grid over [0, 1].
pub fn sweep(cfg: &ProtocolConfig, grid_points: usize) -> Result<Vec<SecurityMetrics>, Error> {
    if grid_points < 2 {
        return Err(Error::Domain("a sweep needs at least two grid points".into()));
    }
    let p0 = analytic::joint_prob_no_eve(cfg)?;
    let pe = analytic::joint_prob_with_eve(cfg, &EveModel::default())?;
    (0..grid_points)
        .map(|k| metrics_at(&p0, &pe, k as f64 / (grid_points - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{delta, joint_prob_no_eve, joint_prob_with_eve, mix, Block};

    fn cfg() -> ProtocolConfig {
        ProtocolConfig::new(8, 2)
    }

    fn endpoints() -> (JointProbabilityMatrix, JointProbabilityMatrix) {
        (
            joint_prob_no_eve(&cfg()).unwrap(),
            joint_prob_with_eve(&cfg(), &EveModel::default()).unwrap(),
        )
    }

    #[test]
    fn zero_delta_zero_disturbance() {
        let (p0, _) = endpoints();
        assert_eq!(disturbance(&delta(&p0, &p0).unwrap()), 0.0);
    }

    #[test]
    fn disturbance_linear_in_eta() {
        let (p0, pe) = endpoints();
        let d1 = disturbance(&delta(&pe, &p0).unwrap());
        assert!(d1 > 0.0);
        for k in 0..=100 {
            let eta = k as f64 / 100.0;
            let d = disturbance(&delta(&mix(&p0, &pe, eta).unwrap(), &p0).unwrap());
            assert!((d - eta * d1).abs() <= 1e-9, "nonlinear at eta={eta}");
        }
    }

    #[test]
    fn disturbance_absolutely_homogeneous() {
        let (p0, pe) = endpoints();
        let dp = delta(&pe, &p0).unwrap();
        let base = disturbance(&dp);
        for c in [-2.0, -0.5, 0.0, 0.25, 3.0] {
            assert!((disturbance(&dp.scale(c)) - c.abs() * base).abs() < 1e-12);
        }
    }

    #[test]
    fn independent_product_has_zero_mutual_information() {
        // build a product distribution on the matrix layout
        let c = cfg();
        let p0 = joint_prob_no_eve(&c).unwrap();
        let d = p0.dim();
        let mut pa = vec![0.0; d];
        let mut pb = vec![0.0; d];
        for j in 0..d {
            for i in 0..d {
                pa[i] += p0.data()[j * d + i];
                pb[j] += p0.data()[j * d + i];
            }
        }
        let data: Vec<f64> = (0..d * d).map(|k| pb[k / d] * pa[k % d]).collect();
        let prod = JointProbabilityMatrix::from_parts(c.n, c.m0, data);
        let (_, _, _, i_ab) = mutual_information(&prod).unwrap();
        assert!(i_ab.abs() < 1e-9);
    }

    #[test]
    fn uniform_diagonal_gives_log2_n_bits() {
        let c = cfg();
        let d = c.outcome_count();
        let mut data = vec![0.0; d * d];
        for k in 0..8 {
            data[(k + 1) * d + (k + 1)] = 1.0 / 8.0;
        }
        let p = JointProbabilityMatrix::from_parts(c.n, c.m0, data);
        let (_, _, _, i_ab) = mutual_information(&p).unwrap();
        assert!((i_ab - 3.0).abs() < 1e-12, "log2(8) = 3 bits, got {i_ab}");
    }

    #[test]
    fn mutual_information_rejects_negative_entries() {
        let c = cfg();
        let d = c.outcome_count();
        let mut data = vec![0.0; d * d];
        data[0] = -0.1;
        let p = JointProbabilityMatrix::from_parts(c.n, c.m0, data);
        assert!(mutual_information(&p).is_err());
    }

    #[test]
    fn retained_fraction_no_oor_mass_is_one() {
        let c = cfg();
        let d = c.outcome_count();
        let mut data = vec![0.0; d * d];
        data[1 * d + 1] = 1.0; // eigen-eigen cell
        let p = JointProbabilityMatrix::from_parts(c.n, c.m0, data);
        assert_eq!(retained_fraction(&p), 1.0);
    }

    #[test]
    fn retained_fraction_linear_in_eta() {
        let (p0, pe) = endpoints();
        let r0 = retained_fraction(&p0);
        let re = retained_fraction(&pe);
        assert!(r0 < 1.0, "out-of-range corners guarantee r(0) < 1");
        for k in [0, 31, 50, 77, 100] {
            let eta = k as f64 / 100.0;
            let r = retained_fraction(&mix(&p0, &pe, eta).unwrap());
            assert!((r - ((1.0 - eta) * r0 + eta * re)).abs() < 1e-12);
        }
    }

    #[test]
    fn eve_information_endpoints() {
        assert_eq!(eve_information(0.0, 0.9, 1.7), 0.0);
        assert!((eve_information(1.0, 1.0, 1.7) - 1.7).abs() < 1e-15);
    }

    #[test]
    fn dominance_and_positive_key_rate_on_grid() {
        let rows = sweep(&cfg(), 101).unwrap();
        assert_eq!(rows.len(), 101);
        for row in &rows {
            assert!(row.i_ae < row.i_ab, "I_AE must stay below I_AB");
            assert!(row.key_rate > 0.0, "key rate must stay positive");
            assert!(row.i_ab <= row.h_a.min(row.h_b) + 1e-9);
            assert!(row.h_a >= 0.0 && row.h_b >= 0.0 && row.h_ab >= 0.0);
        }
        assert_eq!(rows[0].i_ae, 0.0);
        assert!((rows[0].key_rate - rows[0].i_ab).abs() < 1e-15);
    }

    /// Regression fixtures computed once from the exact engine.
    #[test]
    fn default_config_regression_values() {
        let (p0, pe) = endpoints();
        let d1 = disturbance(&delta(&pe, &p0).unwrap());
        assert!((d1 - 0.029889893972837).abs() < 1e-12, "D(1) = {d1}");
        let (_, _, _, iab0) = mutual_information(&p0).unwrap();
        assert!((iab0 - 1.862946541650894).abs() < 1e-10, "iAB(0) = {iab0}");
        assert!(iab0 > 0.0 && iab0 < (26f64).log2());
        let r0 = retained_fraction(&p0);
        assert!((r0 - 0.76).abs() < 1e-12, "r(0) = {r0}");
    }

    #[test]
    fn block_mass_conserved_under_mix() {
        let (p0, pe) = endpoints();
        let p = mix(&p0, &pe, 0.42).unwrap();
        for b in Block::ALL {
            assert!((p.block_mass(b) - 0.25).abs() < 1e-9);
        }
    }
}
