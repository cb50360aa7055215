//! Network primitives built on heralded parity measurements.
//!
//! Qubits are numbered from 0 in code. Where protocols are usually described
//! with qubits 1 to 4, qubit `k` lives at index `k - 1`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Matrix4};

use crate::dephase::{self, DephasingParams};
use crate::error::{Error, Result};
use crate::parity::{ParityChannel, ParityKind, Protocol};
use crate::qstate::{cz_matrix, BellLabel, DensityMatrix, Gate, PureState, C64, ONE};
use crate::scatter::{transmission, EmitterParams, TransmissionCoeff};

/// Which parity measurement a protocol uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParityImpl {
    Ideal,
    OneClick { p0: EmitterParams, p1: EmitterParams },
    TwoClick { p0: EmitterParams, p1: EmitterParams },
    DephasedOneClick(DephasingParams),
    DephasedTwoClick(DephasingParams),
}

impl ParityImpl {
    pub fn channel(&self) -> ParityChannel {
        match *self {
            ParityImpl::Ideal => ParityChannel::ideal(),
            ParityImpl::OneClick { p0, p1 } => ParityChannel::from_emitters(Protocol::OneClick, &p0, &p1),
            ParityImpl::TwoClick { p0, p1 } => ParityChannel::from_emitters(Protocol::TwoClick, &p0, &p1),
            ParityImpl::DephasedOneClick(d) => dephase::channel(Protocol::OneClick, &d),
            ParityImpl::DephasedTwoClick(d) => dephase::channel(Protocol::TwoClick, &d),
        }
    }

    /// Identical emitters with the given β and detuning.
    pub fn symmetric(protocol: Protocol, beta: f64, delta: f64) -> Result<Self> {
        let p = EmitterParams::new(beta, delta)?;
        Ok(match protocol {
            Protocol::OneClick => ParityImpl::OneClick { p0: p, p1: p },
            Protocol::TwoClick => ParityImpl::TwoClick { p0: p, p1: p },
        })
    }

    pub fn cj_fidelity(&self) -> f64 {
        self.channel().cj_fidelity()
    }
}

/// A two-qubit state shared between two parties.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub rho: DensityMatrix,
}

impl PairState {
    pub fn new(rho: DensityMatrix) -> Result<Self> {
        if rho.n_qubits() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "a pair has 2 qubits, got {}",
                rho.n_qubits()
            )));
        }
        rho.validate()?;
        Ok(PairState { rho })
    }

    pub fn bell(label: BellLabel) -> Self {
        PairState {
            rho: label.state().to_density(),
        }
    }

    /// `Σ w_k |B_k⟩⟨B_k|` with weights in [`BellLabel::ALL`] order.
    pub fn bell_diagonal(weights: [f64; 4]) -> Result<Self> {
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidState("negative Bell weight".into()));
        }
        let terms: Vec<(f64, PureState)> = BellLabel::ALL
            .iter()
            .zip(weights)
            .map(|(l, w)| (w, l.state()))
            .collect();
        PairState::new(DensityMatrix::mixture(&terms)?)
    }

    /// Werner state with `⟨φ+|ρ|φ+⟩ = fidelity` and the rest spread evenly.
    pub fn werner(fidelity: f64) -> Result<Self> {
        let r = (1.0 - fidelity) / 3.0;
        PairState::bell_diagonal([fidelity, r, r, r])
    }

    pub fn fidelity(&self) -> f64 {
        self.rho
            .fidelity(&BellLabel::PhiPlus.state())
            .expect("pair is two qubits")
    }

    /// Weights on the four Bell states.
    pub fn bell_weights(&self) -> [f64; 4] {
        BellLabel::ALL.map(|l| self.rho.fidelity(&l.state()).expect("pair is two qubits"))
    }
}

/// Joint state of pairs `(1,3)` and `(2,4)` in the qubit order 1, 2, 3, 4.
pub fn two_pairs(first: &PairState, second: &PairState) -> Result<DensityMatrix> {
    // Tensor order is (1, 3, 2, 4).
    first.rho.tensor(&second.rho)?.permuted(&[0, 2, 1, 3])
}

#[derive(Debug, Clone, PartialEq)]
pub struct PurifyOutcome {
    pub success_prob: f64,
    pub pair: PairState,
}

fn correct_z_if_one(rho: &DensityMatrix, measured: usize, target: usize) -> Result<DensityMatrix> {
    let branches = rho.measure_qubit(measured)?;
    let flipped = branches[1].post.apply_gate(Gate::SigmaZ, target)?;
    branches[0].post.add(&flipped)
}

/// Parity-based purification of pairs (1,3) and (2,4), keeping pair (1,3).
///
/// Alice holds qubits 1 and 2, Bob 3 and 4. Both rotate, measure the parity
/// of their two qubits and keep the round only when the parities agree. The
/// second pair is then rotated by π/2, measured, and the result corrects the
/// first pair with a `σ_z`.
pub fn purify(joint: &DensityMatrix, parity: &ParityImpl) -> Result<PurifyOutcome> {
    if joint.n_qubits() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "purification acts on 4 qubits, got {}",
            joint.n_qubits()
        )));
    }
    let channel = parity.channel();
    let rotated = joint
        .apply_gate(Gate::UA, 0)?
        .apply_gate(Gate::UA, 1)?
        .apply_gate(Gate::UB, 2)?
        .apply_gate(Gate::UB, 3)?;
    let mut kept = DensityMatrix::zeros(4)?;
    for kind in [ParityKind::Even, ParityKind::Odd] {
        let alice = channel.apply(&rotated, 0, 1, kind)?;
        kept = kept.add(&channel.apply(&alice, 2, 3, kind)?)?;
    }
    let rotated = kept.apply_gate(Gate::RHalfPi, 1)?.apply_gate(Gate::RHalfPi, 3)?;
    let corrected = correct_z_if_one(&rotated, 1, 0)?;
    let corrected = correct_z_if_one(&corrected, 3, 2)?;
    let out = corrected.partial_trace(&[0, 2])?;
    let success_prob = out.trace();
    if success_prob <= 0.0 {
        return Err(Error::ZeroProbability("no purification round succeeded".into()));
    }
    Ok(PurifyOutcome {
        success_prob,
        pair: PairState::new(out.normalized()?)?,
    })
}

/// Purify two independent pairs.
pub fn purify_pairs(first: &PairState, second: &PairState, parity: &ParityImpl) -> Result<PurifyOutcome> {
    purify(&two_pairs(first, second)?, parity)
}

/// Bit-pattern labels: photon on detector 0 selects the φ subspace, and after
/// the rotation equal spins select `+`.
pub fn bell_label(kind: ParityKind, spin_a: u8, spin_b: u8) -> Option<BellLabel> {
    let equal = spin_a == spin_b;
    match (kind, equal) {
        (ParityKind::Even, true) => Some(BellLabel::PhiPlus),
        (ParityKind::Even, false) => Some(BellLabel::PhiMinus),
        (ParityKind::Odd, true) => Some(BellLabel::PsiPlus),
        (ParityKind::Odd, false) => Some(BellLabel::PsiMinus),
        (ParityKind::Fail, _) => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellOutcome {
    pub label: BellLabel,
    pub prob: f64,
    pub parity: ParityKind,
    pub spins: (u8, u8),
    /// Unnormalized state of the full register after the measurement.
    pub post: DensityMatrix,
}

/// Bell analysis of qubits `(a, b)` inside a register: parity measurement,
/// π/2 rotation of both qubits, computational-basis readout.
pub fn bell_measure_in(rho: &DensityMatrix, a: usize, b: usize, parity: &ParityImpl) -> Result<Vec<BellOutcome>> {
    let channel = parity.channel();
    let mut out = Vec::with_capacity(8);
    for kind in [ParityKind::Even, ParityKind::Odd] {
        let heralded = channel
            .apply(rho, a, b, kind)?
            .apply_gate(Gate::RHalfPi, a)?
            .apply_gate(Gate::RHalfPi, b)?;
        for ma in heralded.measure_qubit(a)? {
            for mb in ma.post.measure_qubit(b)? {
                out.push(BellOutcome {
                    label: bell_label(kind, ma.outcome, mb.outcome).expect("successful parity"),
                    prob: mb.prob,
                    parity: kind,
                    spins: (ma.outcome, mb.outcome),
                    post: mb.post,
                });
            }
        }
    }
    Ok(out)
}

/// Bell analysis of a two-qubit node.
pub fn bell_measure(node: &DensityMatrix, parity: &ParityImpl) -> Result<Vec<BellOutcome>> {
    if node.n_qubits() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "a node holds 2 qubits, got {}",
            node.n_qubits()
        )));
    }
    bell_measure_in(node, 0, 1, parity)
}

/// Probability of each label, summed over the spin records that produce it.
pub fn bell_label_probs(outcomes: &[BellOutcome]) -> BTreeMap<BellLabel, f64> {
    let mut map = BTreeMap::new();
    for o in outcomes {
        *map.entry(o.label).or_insert(0.0) += o.prob;
    }
    map
}

/// Pauli frame that maps the swapped Bell state back to `|φ+⟩`, applied to `target`.
fn swap_correction(rho: &DensityMatrix, label: BellLabel, target: usize) -> Result<DensityMatrix> {
    let (x, z) = label.pauli_bits();
    let mut r = rho.clone();
    if x == 1 {
        r = r.apply_gate(Gate::SigmaX, target)?;
    }
    if z == 1 {
        r = r.apply_gate(Gate::SigmaZ, target)?;
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapOutcome {
    pub label: BellLabel,
    pub prob: f64,
    /// A–C pair after the Pauli correction, normalized.
    pub pair: Option<PairState>,
}

/// Swap entanglement from pairs A–B and B–C onto A–C.
///
/// The register is (A, B_left, B_right, C); B's qubits are Bell-analysed and
/// C receives the label-dependent correction, so the ideal output is `|φ+⟩`.
pub fn entanglement_swap(left: &PairState, right: &PairState, parity: &ParityImpl) -> Result<Vec<SwapOutcome>> {
    let joint = left.rho.tensor(&right.rho)?;
    let mut by_label: BTreeMap<BellLabel, DensityMatrix> = BTreeMap::new();
    for o in bell_measure_in(&joint, 1, 2, parity)? {
        let corrected = swap_correction(&o.post, o.label, 3)?.partial_trace(&[0, 3])?;
        let acc = match by_label.remove(&o.label) {
            Some(prev) => prev.add(&corrected)?,
            None => corrected,
        };
        by_label.insert(o.label, acc);
    }
    BellLabel::ALL
        .iter()
        .map(|&label| {
            let rho = by_label.remove(&label).expect("every label is visited");
            let prob = rho.trace();
            let pair = if prob > 1e-300 {
                Some(PairState::new(rho.normalized()?)?)
            } else {
                None
            };
            Ok(SwapOutcome { label, prob, pair })
        })
        .collect()
}

/// Swap with every label kept: the success probability and the averaged pair.
pub fn swap_averaged(left: &PairState, right: &PairState, parity: &ParityImpl) -> Result<PurifyOutcome> {
    let outcomes = entanglement_swap(left, right, parity)?;
    let mut acc = DensityMatrix::zeros(2)?;
    let mut prob = 0.0;
    for o in &outcomes {
        if let Some(pair) = &o.pair {
            acc = acc.add(&pair.rho.scaled(o.prob))?;
            prob += o.prob;
        }
    }
    if prob <= 0.0 {
        return Err(Error::ZeroProbability("no swap outcome heralded".into()));
    }
    Ok(PurifyOutcome {
        success_prob: prob,
        pair: PairState::new(acc.normalized()?)?,
    })
}

/// `α = (t0+t1)/2`, `ε = (1+t0)(1+t1)/4`, `η = (1-t0)(t1-1)/4`.
pub fn branch_factors(t0: TransmissionCoeff, t1: TransmissionCoeff) -> (C64, C64, C64) {
    let (t0, t1) = (t0.value(), t1.value());
    (
        (t0 + t1) / 2.0,
        (ONE + t0) * (ONE + t1) / 4.0,
        (ONE - t0) * (t1 - ONE) / 4.0,
    )
}

/// Resource pair on qubits 1 and 3, logical qubits on 2 and 4.
pub fn cz_input(logical: &PureState) -> Result<PureState> {
    if logical.n_qubits() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "CZ acts on 2 logical qubits, got {}",
            logical.n_qubits()
        )));
    }
    // Tensor order is (1, 3, 2, 4).
    BellLabel::PhiPlus.state().tensor(logical)?.permuted(&[0, 2, 1, 3])
}

/// Logical state with the resource pair contracted against `⟨φ+|`.
fn logical_part(state: &PureState) -> Result<PureState> {
    let reordered = state.permuted(&[0, 2, 1, 3])?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = reordered.amplitudes();
    let amps = (0..4).map(|j| (a[j] + a[12 + j]) * s).collect();
    Ok(PureState::from_raw(2, amps))
}

/// One Kraus path through the teleported CZ: the heralded operators for the
/// two parity measurements and the two erasure readouts.
fn cz_path(
    state: &PureState,
    first: (&Matrix4<C64>, ParityKind),
    second: (&Matrix4<C64>, ParityKind),
    m1: u8,
    m3: u8,
) -> Result<PureState> {
    let mut s = state.apply_two(first.0, 0, 1)?;
    if first.1 == ParityKind::Odd {
        s = s.apply_gate(Gate::SigmaX, 0)?.apply_gate(Gate::SigmaX, 2)?;
    }
    s = s.apply_gate(Gate::Hadamard, 2)?;
    s = s.apply_two(second.0, 2, 3)?;
    if second.1 == ParityKind::Odd {
        s = s.apply_gate(Gate::SigmaX, 2)?.apply_gate(Gate::SigmaZ, 1)?;
    }
    s = s.apply_gate(Gate::Hadamard, 0)?.project_qubit(0, m1)?;
    if m1 == 1 {
        s = s.apply_gate(Gate::SigmaZ, 1)?;
    }
    s = s.apply_gate(Gate::Hadamard, 2)?.project_qubit(2, m3)?;
    if m3 == 1 {
        s = s.apply_gate(Gate::SigmaZ, 3)?;
    }
    // Remaining register order is (2, 4).
    s.drop_qubit(2, m3)?.drop_qubit(0, m1)
}

/// Keyed by the two parity outcomes `(first, second)`.
pub type ParityPair = (ParityKind, ParityKind);

#[derive(Debug, Clone, PartialEq)]
pub struct CzReport {
    pub branch_probs: BTreeMap<ParityPair, f64>,
    pub branch_fidelities: BTreeMap<ParityPair, f64>,
    pub overall_fidelity: f64,
    pub success_prob: f64,
    pub fail_prob: f64,
}

const PARITY_PAIRS: [ParityPair; 4] = [
    (ParityKind::Even, ParityKind::Even),
    (ParityKind::Even, ParityKind::Odd),
    (ParityKind::Odd, ParityKind::Even),
    (ParityKind::Odd, ParityKind::Odd),
];

fn cz_report(terms: BTreeMap<ParityPair, (f64, f64)>) -> CzReport {
    let mut branch_probs = BTreeMap::new();
    let mut branch_fidelities = BTreeMap::new();
    let mut p_total = 0.0;
    let mut pf_total = 0.0;
    for (key, (p, pf)) in terms {
        branch_probs.insert(key, p);
        branch_fidelities.insert(key, if p > 0.0 { pf / p } else { 0.0 });
        p_total += p;
        pf_total += pf;
    }
    CzReport {
        branch_probs,
        branch_fidelities,
        overall_fidelity: if p_total > 0.0 { pf_total / p_total } else { 0.0 },
        success_prob: p_total,
        fail_prob: (1.0 - p_total).max(0.0),
    }
}

/// Teleportation-based CZ on logical qubits 2 and 4 using the pair on 1 and 3.
///
/// Both parity measurements use the same implementation. Branch fidelities
/// compare the output on (2, 4) with `CZ` applied to the logical input.
pub fn teleported_cz(state: &PureState, parity: &ParityImpl) -> Result<CzReport> {
    if state.n_qubits() != 4 {
        return Err(Error::DimensionMismatch(format!(
            "teleported CZ needs 4 qubits, got {}",
            state.n_qubits()
        )));
    }
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("input has squared norm {norm}")));
    }
    let resource = state.to_density().partial_trace(&[0, 2])?;
    let f_resource = resource.fidelity(&BellLabel::PhiPlus.state())?;
    if (1.0 - f_resource) > 1e-9 {
        return Err(Error::Precondition(format!(
            "resource pair on qubits 1 and 3 has fidelity {f_resource} with |φ+⟩"
        )));
    }
    let ideal = logical_part(state)?.normalized()?.apply_two(&cz_matrix(), 0, 1)?;
    let channel = parity.channel();
    let mut terms = BTreeMap::new();
    for key in PARITY_PAIRS {
        let mut p = 0.0;
        let mut pf = 0.0;
        for a in channel.kraus(key.0) {
            for b in channel.kraus(key.1) {
                for m1 in 0..2 {
                    for m3 in 0..2 {
                        let out = cz_path(state, (a, key.0), (b, key.1), m1, m3)?;
                        p += out.norm_sqr();
                        pf += ideal.inner(&out)?.norm_sqr();
                    }
                }
            }
        }
        terms.insert(key, (p, pf));
    }
    Ok(cz_report(terms))
}

/// Logical Kraus operators of the teleported CZ for every heralded path.
pub fn cz_kraus(parity: &ParityImpl) -> Result<Vec<(ParityPair, Matrix4<C64>)>> {
    let channel = parity.channel();
    let inputs: Vec<PureState> = (0..4)
        .map(|j| cz_input(&PureState::basis(2, j)?))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for key in PARITY_PAIRS {
        for a in channel.kraus(key.0) {
            for b in channel.kraus(key.1) {
                for m1 in 0..2 {
                    for m3 in 0..2 {
                        let mut l = Matrix4::zeros();
                        for (j, input) in inputs.iter().enumerate() {
                            let col = cz_path(input, (a, key.0), (b, key.1), m1, m3)?;
                            for i in 0..4 {
                                l[(i, j)] = col.amplitude(i);
                            }
                        }
                        out.push((key, l));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// CJ version of the teleported CZ: logical qubits maximally entangled with
/// a reference, ideal output `(CZ ⊗ I)|Φ⟩`.
pub fn teleported_cz_choi(parity: &ParityImpl) -> Result<CzReport> {
    let cz = cz_matrix();
    let mut terms: BTreeMap<ParityPair, (f64, f64)> = PARITY_PAIRS.iter().map(|&k| (k, (0.0, 0.0))).collect();
    for (key, l) in cz_kraus(parity)? {
        let entry = terms.get_mut(&key).expect("known key");
        entry.0 += l.iter().map(|z| z.norm_sqr()).sum::<f64>() / 4.0;
        entry.1 += (cz.adjoint() * l).trace().norm_sqr() / 16.0;
    }
    Ok(cz_report(terms))
}

/// Teleported-CZ fidelity from the logical Choi state, assembled directly
/// from the path operators as a 4-qubit matrix.
pub fn teleported_cz_choi_density(parity: &ParityImpl) -> Result<(f64, DensityMatrix)> {
    let mut rho = DMatrix::<C64>::zeros(16, 16);
    for (_, l) in cz_kraus(parity)? {
        // |Φ⟩ on (logical, reference) with the logical half acted on by L.
        let v = nalgebra::DVector::from_fn(16, |k, _| l[(k >> 2, k & 3)] / 2.0);
        rho += &v * v.adjoint();
    }
    let rho = DensityMatrix::from_raw(4, rho);
    let p = rho.trace();
    Ok((p, rho))
}

/// Apply `(CZ ⊗ I)` to the 4-dimensional maximally entangled state.
pub fn ideal_cz_choi() -> PureState {
    let cz = cz_matrix();
    PureState::from_raw(4, (0..16).map(|k| cz[(k >> 2, k & 3)] / 2.0).collect())
}

/// Transmissions for a parity implementation built from emitters.
pub fn transmissions(parity: &ParityImpl) -> Option<(TransmissionCoeff, TransmissionCoeff)> {
    match parity {
        ParityImpl::OneClick { p0, p1 } | ParityImpl::TwoClick { p0, p1 } => Some((transmission(p0), transmission(p1))),
        _ => None,
    }
}
