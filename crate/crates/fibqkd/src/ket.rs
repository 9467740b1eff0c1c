//! Sparse kets over the Fibonacci-indexed OAM basis.
//!
//! Single-photon states ([`Ket`]) map Fibonacci indices to complex
//! amplitudes; biphoton states ([`BipartiteKet`]) map (Alice, Bob) index
//! pairs. Stored entries are always nonzero and iteration order is the
//! index order, so equal states have equal representations.

use crate::fib::FibIndex;
use crate::num::{Cx, Field};
use crate::Error;
use std::collections::BTreeMap;

/// Normalization tolerance for floating-point kets.
pub const NORM_TOL: f64 = 1e-12;

/// Sparse single-photon state: finite map from Fibonacci index to amplitude.
#[derive(Clone, PartialEq, Debug)]
pub struct Ket<F: Field> {
    amps: BTreeMap<u32, Cx<F>>,
}

/// The floating-point single-photon ket used by the public protocol API.
pub type OamKet = Ket<f64>;

impl<F: Field> Default for Ket<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Field> Ket<F> {
    pub fn new() -> Self {
        Ket {
            amps: BTreeMap::new(),
        }
    }

    pub fn from_amplitudes<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = (FibIndex, Cx<F>)>,
    {
        let mut k = Ket::new();
        for (m, a) in entries {
            k.add(m.get(), a);
        }
        k
    }

    /// Basis ket |F_m⟩.
    pub fn basis(m: FibIndex) -> Self {
        let mut k = Ket::new();
        k.add(m.get(), Cx::real(F::one()));
        k
    }

    pub(crate) fn add(&mut self, mode: u32, amp: Cx<F>) {
        debug_assert!(mode >= 1, "mode indices start at 1");
        let entry = self.amps.entry(mode).or_insert_with(Cx::zero);
        *entry = entry.clone() + amp;
        if entry.is_zero() {
            self.amps.remove(&mode);
        }
    }

    pub fn amplitude(&self, m: FibIndex) -> Cx<F> {
        self.amps.get(&m.get()).cloned().unwrap_or_else(Cx::zero)
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.amps.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Cx<F>)> {
        self.amps.iter().map(|(m, a)| (*m, a))
    }

    pub fn norm_sqr(&self) -> F {
        self.amps
            .values()
            .fold(F::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn scale(&self, s: &F) -> Self {
        Ket {
            amps: self
                .amps
                .iter()
                .map(|(m, a)| (*m, a.scale(s)))
                .collect(),
        }
    }
}

impl OamKet {
    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<OamKet, Error> {
        let n = self.norm_sqr();
        if n == 0.0 {
            return Err(Error::Contract("cannot normalize the zero ket".into()));
        }
        Ok(self.scale(&(1.0 / n.sqrt())))
    }
}

/// ⟨a|b⟩ = Σ_m conj(a_m)·b_m.
pub fn inner_product<F: Field>(a: &Ket<F>, b: &Ket<F>) -> Cx<F> {
    // merge-join over the sorted sparse maps
    let mut acc = Cx::zero();
    let (small, large, conj_small) = if a.amps.len() <= b.amps.len() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    for (m, x) in small.amps.iter() {
        if let Some(y) = large.amps.get(m) {
            let term = if conj_small {
                x.conj() * y.clone()
            } else {
                y.conj() * x.clone()
            };
            acc = acc + term;
        }
    }
    acc
}

/// Sparse biphoton state over (Alice index, Bob index) pairs.
#[derive(Clone, PartialEq, Debug)]
pub struct BipartiteKet<F: Field> {
    amps: BTreeMap<(u32, u32), Cx<F>>,
}

/// Floating-point biphoton state used by the public protocol API.
pub type BiphotonKet = BipartiteKet<f64>;

impl<F: Field> Default for BipartiteKet<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Field> BipartiteKet<F> {
    pub fn new() -> Self {
        BipartiteKet {
            amps: BTreeMap::new(),
        }
    }

    pub fn from_amplitudes<I>(entries: I) -> Self
    where
        I: IntoIterator<Item = ((FibIndex, FibIndex), Cx<F>)>,
    {
        let mut k = BipartiteKet::new();
        for ((a, b), amp) in entries {
            k.add(a.get(), b.get(), amp);
        }
        k
    }

    pub(crate) fn add(&mut self, alice: u32, bob: u32, amp: Cx<F>) {
        debug_assert!(alice >= 1 && bob >= 1);
        let entry = self.amps.entry((alice, bob)).or_insert_with(Cx::zero);
        *entry = entry.clone() + amp;
        if entry.is_zero() {
            self.amps.remove(&(alice, bob));
        }
    }

    pub fn amplitude(&self, alice: FibIndex, bob: FibIndex) -> Cx<F> {
        self.amps
            .get(&(alice.get(), bob.get()))
            .cloned()
            .unwrap_or_else(Cx::zero)
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), &Cx<F>)> {
        self.amps.iter().map(|(k, a)| (*k, a))
    }

    pub fn norm_sqr(&self) -> F {
        self.amps
            .values()
            .fold(F::zero(), |acc, a| acc + a.norm_sqr())
    }

    pub fn scale(&self, s: &F) -> Self {
        BipartiteKet {
            amps: self
                .amps
                .iter()
                .map(|(k, a)| (*k, a.scale(s)))
                .collect(),
        }
    }

    /// ⟨ket|ψ⟩ applied on Bob's side: returns the unnormalized Alice residual.
    pub fn bob_overlap(&self, ket: &Ket<F>) -> Ket<F> {
        let mut res = Ket::new();
        for ((a, b), amp) in self.amps.iter() {
            if let Some(c) = ket.amps.get(b) {
                res.add(*a, c.conj() * amp.clone());
            }
        }
        res
    }

    /// ⟨ket|ψ⟩ applied on Alice's side: returns the unnormalized Bob residual.
    pub fn alice_overlap(&self, ket: &Ket<F>) -> Ket<F> {
        let mut res = Ket::new();
        for ((a, b), amp) in self.amps.iter() {
            if let Some(c) = ket.amps.get(a) {
                res.add(*b, c.conj() * amp.clone());
            }
        }
        res
    }

    /// Full joint amplitude (⟨alice| ⊗ ⟨bob|) ψ.
    pub fn joint_amplitude(&self, alice: &Ket<F>, bob: &Ket<F>) -> Cx<F> {
        let mut acc = Cx::zero();
        for ((a, b), amp) in self.amps.iter() {
            if let (Some(ca), Some(cb)) = (alice.amps.get(a), bob.amps.get(b)) {
                acc = acc + ca.conj() * cb.conj() * amp.clone();
            }
        }
        acc
    }
}

impl BiphotonKet {
    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOL
    }

    pub fn normalized(&self) -> Result<BiphotonKet, Error> {
        let n = self.norm_sqr();
        if n == 0.0 {
            return Err(Error::Contract("cannot normalize the zero ket".into()));
        }
        Ok(self.scale(&(1.0 / n.sqrt())))
    }
}

/// Projects Bob's side of `state` onto `bob_ket`.
///
/// Returns the projection weight Σ_a |⟨bob_ket | state⟩_a|² and the collapsed,
/// renormalized biphoton state. A zero-weight projection yields an empty ket
/// rather than an error: downstream probability sums legitimately include
/// zero-probability branches.
pub fn project_bob(
    state: &BiphotonKet,
    bob_ket: &OamKet,
) -> Result<(f64, BiphotonKet), Error> {
    if !bob_ket.is_normalized() {
        return Err(Error::Contract(
            "project_bob requires a normalized detector ket".into(),
        ));
    }
    let residual = state.bob_overlap(bob_ket);
    let weight = residual.norm_sqr();
    if weight == 0.0 {
        return Ok((0.0, BipartiteKet::new()));
    }
    let scale = 1.0 / weight.sqrt();
    let mut collapsed = BipartiteKet::new();
    for (a, c) in residual.iter() {
        for (b, d) in bob_ket.iter() {
            collapsed.add(a, b, c.scale(&scale) * d.clone());
        }
    }
    Ok((weight, collapsed))
}

/// Projects Alice's side of `state` onto `alice_ket`; same contract as
/// [`project_bob`] with the roles swapped.
pub fn project_alice(
    state: &BiphotonKet,
    alice_ket: &OamKet,
) -> Result<(f64, BiphotonKet), Error> {
    if !alice_ket.is_normalized() {
        return Err(Error::Contract(
            "project_alice requires a normalized detector ket".into(),
        ));
    }
    let residual = state.alice_overlap(alice_ket);
    let weight = residual.norm_sqr();
    if weight == 0.0 {
        return Ok((0.0, BipartiteKet::new()));
    }
    let scale = 1.0 / weight.sqrt();
    let mut collapsed = BipartiteKet::new();
    for (b, c) in residual.iter() {
        for (a, d) in alice_ket.iter() {
            collapsed.add(a, b, d.clone() * c.scale(&scale));
        }
    }
    Ok((weight, collapsed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::inv_sqrt2;

    fn idx(m: u32) -> FibIndex {
        FibIndex::new(m).unwrap()
    }

    /// Paper-style detector states built directly from their definitions:
    /// C_n = (i/√2)(|F_n⟩ + |F_{n−2}⟩), D_n = (1/√2)(|F_n⟩ − |F_{n−2}⟩).
    fn c_paper(n: u32) -> OamKet {
        let h = inv_sqrt2::<f64>();
        Ket::from_amplitudes([
            (idx(n), Cx::imag(h)),
            (idx(n - 2), Cx::imag(h)),
        ])
    }

    fn d_paper(n: u32) -> OamKet {
        let h = inv_sqrt2::<f64>();
        Ket::from_amplitudes([
            (idx(n), Cx::real(h)),
            (idx(n - 2), Cx::real(-h)),
        ])
    }

    fn s_ket(n: u32) -> OamKet {
        let h = inv_sqrt2::<f64>();
        Ket::from_amplitudes([
            (idx(n - 1), Cx::real(h)),
            (idx(n + 1), Cx::real(h)),
        ])
    }

    #[test]
    fn c_and_d_same_index_orthogonal() {
        for n in 3..10 {
            let ip = inner_product(&c_paper(n), &d_paper(n));
            assert!(ip.re.abs() < 1e-15 && ip.im.abs() < 1e-15);
        }
    }

    #[test]
    fn c_d_offset_two_overlap() {
        // ⟨C_n|D_m⟩ = −(i/2)(δ_{m,n−2} − δ_{m,n+2})
        for n in 5..10 {
            let down = inner_product(&c_paper(n), &d_paper(n - 2));
            assert!((down.re).abs() < 1e-15);
            assert!((down.im + 0.5).abs() < 1e-15, "⟨C_n|D_(n-2)⟩ = -i/2");
            let up = inner_product(&c_paper(n), &d_paper(n + 2));
            assert!((up.im - 0.5).abs() < 1e-15, "⟨C_n|D_(n+2)⟩ = +i/2");
            for m in [n - 1, n + 1, n + 3] {
                let z = inner_product(&c_paper(n), &d_paper(m));
                assert!(z.re.abs() < 1e-15 && z.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn adjacent_superpositions_overlap_half() {
        for n in 2..9 {
            let ip = inner_product(&s_ket(n), &s_ket(n + 2));
            assert!((ip.re - 0.5).abs() < 1e-15);
            assert!(ip.im.abs() < 1e-15);
        }
    }

    #[test]
    fn inner_product_conjugate_symmetric() {
        let a = c_paper(5);
        let b = d_paper(7);
        let ab = inner_product(&a, &b);
        let ba = inner_product(&b, &a);
        assert!((ab.re - ba.re).abs() < 1e-15);
        assert!((ab.im + ba.im).abs() < 1e-15);
    }

    #[test]
    fn project_bob_single_pump_term() {
        // ψ for a single pump term n=7: (|6,5⟩ + |5,6⟩)/√2
        let h = inv_sqrt2::<f64>();
        let psi = BipartiteKet::from_amplitudes([
            ((idx(6), idx(5)), Cx::real(h)),
            ((idx(5), idx(6)), Cx::real(h)),
        ]);
        let (w, collapsed) = project_bob(&psi, &Ket::basis(idx(6))).unwrap();
        assert!((w - 0.5).abs() < 1e-12);
        // collapsed = |F_5⟩_A |F_6⟩_B
        let amp = collapsed.amplitude(idx(5), idx(6));
        assert!((amp.re - 1.0).abs() < 1e-12 && amp.im.abs() < 1e-12);
    }

    #[test]
    fn project_bob_identity_case() {
        let psi = BipartiteKet::from_amplitudes([((idx(4), idx(5)), Cx::real(1.0))]);
        let (w, collapsed) = project_bob(&psi, &Ket::basis(idx(5))).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        assert_eq!(collapsed, psi);
    }

    #[test]
    fn project_bob_zero_weight_is_empty() {
        let psi = BipartiteKet::from_amplitudes([((idx(4), idx(5)), Cx::real(1.0))]);
        let (w, collapsed) = project_bob(&psi, &Ket::basis(idx(9))).unwrap();
        assert_eq!(w, 0.0);
        assert!(collapsed.is_empty());
    }

    #[test]
    fn project_bob_rejects_unnormalized() {
        let psi = BipartiteKet::from_amplitudes([((idx(4), idx(5)), Cx::real(1.0))]);
        let bad = Ket::from_amplitudes([(idx(5), Cx::real(0.7))]);
        assert!(project_bob(&psi, &bad).is_err());
    }

    #[test]
    fn projection_is_idempotent_after_collapse() {
        let h = inv_sqrt2::<f64>();
        let psi = BipartiteKet::from_amplitudes([
            ((idx(6), idx(5)), Cx::real(h)),
            ((idx(5), idx(6)), Cx::real(h)),
        ]);
        let ket = s_ket(5);
        let (w1, collapsed) = project_bob(&psi, &ket).unwrap();
        assert!(w1 > 0.0);
        let (w2, again) = project_bob(&collapsed, &ket).unwrap();
        assert!((w2 - 1.0).abs() < 1e-12);
        assert_eq!(again, collapsed);
    }

    /// Brute-force oracle for the eigenstate-collapse residual: after an
    /// Alice F_n detection the biphoton is |F_n⟩_A ⊗ |S_n⟩_B, and projecting
    /// Bob onto the matching superposition detector must capture the full
    /// coherent weight |⟨i·S_n|S_n⟩|² = 1. The expected value is recomputed
    /// here by direct amplitude expansion, independent of project_bob.
    #[test]
    fn eigen_residual_onto_superposition_detector() {
        let h = inv_sqrt2::<f64>();
        let n = 6u32;
        let state = BipartiteKet::from_amplitudes([
            ((idx(n), idx(n - 1)), Cx::real(h)),
            ((idx(n), idx(n + 1)), Cx::real(h)),
        ]);
        let det = Ket::from_amplitudes([
            (idx(n - 1), Cx::imag(h)),
            (idx(n + 1), Cx::imag(h)),
        ]);
        // direct expansion: amp = Σ_b conj(det_b) · state_{(n,b)}, one Alice row
        let mut re = 0.0;
        let mut im = 0.0;
        for b in [n - 1, n + 1] {
            let d = det.amplitude(idx(b));
            let s = state.amplitude(idx(n), idx(b));
            re += d.re * s.re + d.im * s.im;
            im += d.re * s.im - d.im * s.re;
        }
        let expect = re * re + im * im;
        let (w, _) = project_bob(&state, &det).unwrap();
        assert!((w - expect).abs() < 1e-12);
        assert!((w - 1.0).abs() < 1e-12);
    }
}
