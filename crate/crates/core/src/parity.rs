//! One- and two-click parity measurements.
//!
//! A heralded parity measurement is described by two sets of Kraus operators
//! on the spin pair, one for each successful outcome (even, odd). Everything
//! not covered by them (loss, mixed detector patterns) is a failure.
//!
//! The Choi-Jamiolkowski (CJ) fidelity uses the input `|φ+⟩₁₂|φ+⟩₃₄` with the
//! measurement acting on qubits 2 and 3. For a Kraus operator `K` heralding
//! outcome `k` this gives
//!
//! ```text
//! P_k     = Σ ‖K‖²_F / 4
//! P_k F_k = Σ |Tr(Π_k K)|² / 8
//! F       = Σ_k P_k F_k / Σ_k P_k
//! ```
//!
//! where `Π_k` projects onto the even or odd subspace.

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::qstate::{even_projector, kron2, odd_projector, BellLabel, DensityMatrix, Gate, PureState, C64, ONE};
use crate::scatter::{
    kraus_detector0, kraus_detector1, mzi_in_register, transmission, EmitterParams, TransmissionCoeff,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    OneClick,
    TwoClick,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::OneClick, Protocol::TwoClick];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::OneClick => "one-click",
            Protocol::TwoClick => "two-click",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParityKind {
    Even,
    Odd,
    Fail,
}

impl ParityKind {
    pub fn projector(self) -> Option<Matrix4<C64>> {
        match self {
            ParityKind::Even => Some(even_projector()),
            ParityKind::Odd => Some(odd_projector()),
            ParityKind::Fail => None,
        }
    }

    /// Bit used for classical communication: 0 even, 1 odd.
    pub fn bit(self) -> Option<u8> {
        match self {
            ParityKind::Even => Some(0),
            ParityKind::Odd => Some(1),
            ParityKind::Fail => None,
        }
    }
}

/// One heralded outcome of a parity measurement on a pure input.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityOutcome {
    pub kind: ParityKind,
    pub prob: f64,
    /// Normalized post-measurement spin state. Failures carry none.
    pub post: Option<PureState>,
    /// `|⟨ideal|post⟩|²` against the normalized parity projection of the input.
    /// `None` for failures or when the input has no weight in the subspace.
    pub cond_fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub protocol: Protocol,
    pub success_prob: f64,
    /// Success-weighted fidelity for this particular input.
    pub fidelity: f64,
    /// Input-independent CJ fidelity for the same emitters.
    pub cj_fidelity: f64,
    pub per_outcome: Vec<ParityOutcome>,
}

/// Kraus representation of a heralded parity measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityChannel {
    pub even: Vec<Matrix4<C64>>,
    pub odd: Vec<Matrix4<C64>>,
}

fn sigma_z_second() -> Matrix4<C64> {
    kron2(&nalgebra::Matrix2::identity(), &Gate::SigmaZ.matrix())
}

fn sigma_x_both() -> Matrix4<C64> {
    let x = Gate::SigmaX.matrix();
    kron2(&x, &x)
}

fn frob_sqr(m: &Matrix4<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

impl ParityChannel {
    pub fn ideal() -> Self {
        ParityChannel {
            even: vec![even_projector()],
            odd: vec![odd_projector()],
        }
    }

    /// One photon, then `σ_z` on the second spin for either click.
    pub fn one_click(t0: TransmissionCoeff, t1: TransmissionCoeff) -> Self {
        let z = sigma_z_second();
        ParityChannel {
            even: vec![z * kraus_detector0(t0, t1)],
            odd: vec![z * kraus_detector1(t0, t1)],
        }
    }

    /// Two photons with `σ_x⊗σ_x` after each click; only equal clicks succeed.
    pub fn two_click(t0: TransmissionCoeff, t1: TransmissionCoeff) -> Self {
        let x = sigma_x_both();
        let m0 = kraus_detector0(t0, t1);
        let m1 = kraus_detector1(t0, t1);
        ParityChannel {
            even: vec![x * m0 * x * m0],
            odd: vec![x * m1 * x * m1],
        }
    }

    pub fn for_protocol(protocol: Protocol, t0: TransmissionCoeff, t1: TransmissionCoeff) -> Self {
        match protocol {
            Protocol::OneClick => ParityChannel::one_click(t0, t1),
            Protocol::TwoClick => ParityChannel::two_click(t0, t1),
        }
    }

    pub fn from_emitters(protocol: Protocol, p0: &EmitterParams, p1: &EmitterParams) -> Self {
        ParityChannel::for_protocol(protocol, transmission(p0), transmission(p1))
    }

    pub fn kraus(&self, kind: ParityKind) -> &[Matrix4<C64>] {
        match kind {
            ParityKind::Even => &self.even,
            ParityKind::Odd => &self.odd,
            ParityKind::Fail => &[],
        }
    }

    /// `(P_k, P_k F_k)` for `k` in {even, odd}.
    pub fn cj_terms(&self) -> [(f64, f64); 2] {
        [ParityKind::Even, ParityKind::Odd].map(|kind| {
            let proj = kind.projector().expect("successful outcome");
            let ops = self.kraus(kind);
            let p: f64 = ops.iter().map(|k| frob_sqr(k) / 4.0).sum();
            let pf: f64 = ops.iter().map(|k| (proj * k).trace().norm_sqr() / 8.0).sum();
            (p, pf)
        })
    }

    pub fn cj_success_prob(&self) -> f64 {
        self.cj_terms().iter().map(|(p, _)| p).sum()
    }

    pub fn cj_fidelity(&self) -> f64 {
        let terms = self.cj_terms();
        let p: f64 = terms.iter().map(|(p, _)| p).sum();
        let pf: f64 = terms.iter().map(|(_, pf)| pf).sum();
        if p > 0.0 {
            pf / p
        } else {
            0.0
        }
    }

    /// Unnormalized heralded states on the ordered pair `(q0, q1)` of a larger register.
    pub fn apply(&self, rho: &DensityMatrix, q0: usize, q1: usize, kind: ParityKind) -> Result<DensityMatrix> {
        rho.apply_kraus_two(self.kraus(kind), q0, q1)
    }

    /// Largest deviation of `Σ K†K` from a sub-identity, as a completeness check.
    /// Returns the largest eigenvalue of the success POVM element.
    pub fn max_success_eigenvalue(&self) -> f64 {
        let mut povm = Matrix4::<C64>::zeros();
        for k in self.even.iter().chain(&self.odd) {
            povm += k.adjoint() * k;
        }
        let dm = nalgebra::DMatrix::from_fn(4, 4, |i, j| povm[(i, j)]);
        DensityMatrix::from_raw(2, dm)
            .eigenvalues()
            .last()
            .copied()
            .unwrap_or(0.0)
    }
}

fn check_normalized(spins: &PureState) -> Result<()> {
    if spins.n_qubits() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "parity acts on 2 spins, got {} qubits",
            spins.n_qubits()
        )));
    }
    let n = spins.norm_sqr();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("input has squared norm {n}, expected 1")));
    }
    Ok(())
}

/// Evaluate a heralded channel on a pure two-spin input.
pub fn run_channel(protocol: Protocol, channel: &ParityChannel, spins: &PureState) -> Result<ProtocolReport> {
    check_normalized(spins)?;
    let mut per_outcome = Vec::with_capacity(3);
    let mut success = 0.0;
    let mut weighted = 0.0;
    for kind in [ParityKind::Even, ParityKind::Odd] {
        let proj = kind.projector().expect("successful outcome");
        let ideal = spins.apply_two(&proj, 0, 1)?;
        let ideal_norm = ideal.norm_sqr();
        let mut prob = 0.0;
        let mut pf = 0.0;
        let mut post = None;
        for k in channel.kraus(kind) {
            let out = spins.apply_two(k, 0, 1)?;
            prob += out.norm_sqr();
            if ideal_norm > 0.0 {
                pf += ideal.inner(&out)?.norm_sqr() / ideal_norm;
            }
            post = Some(out);
        }
        // A single Kraus operator gives a pure post state.
        let post = if channel.kraus(kind).len() == 1 && prob > 0.0 {
            post.map(|s| s.normalized()).transpose()?
        } else {
            None
        };
        let cond_fidelity = (ideal_norm > 0.0 && prob > 0.0).then(|| pf / prob);
        success += prob;
        weighted += pf;
        per_outcome.push(ParityOutcome {
            kind,
            prob,
            post,
            cond_fidelity,
        });
    }
    per_outcome.push(ParityOutcome {
        kind: ParityKind::Fail,
        prob: (1.0 - success).max(0.0),
        post: None,
        cond_fidelity: None,
    });
    Ok(ProtocolReport {
        protocol,
        success_prob: success,
        fidelity: if success > 0.0 { weighted / success } else { 0.0 },
        cj_fidelity: channel.cj_fidelity(),
        per_outcome,
    })
}

pub fn one_click(spins: &PureState, p0: &EmitterParams, p1: &EmitterParams) -> Result<ProtocolReport> {
    run_channel(
        Protocol::OneClick,
        &ParityChannel::from_emitters(Protocol::OneClick, p0, p1),
        spins,
    )
}

pub fn two_click(spins: &PureState, p0: &EmitterParams, p1: &EmitterParams) -> Result<ProtocolReport> {
    run_channel(
        Protocol::TwoClick,
        &ParityChannel::from_emitters(Protocol::TwoClick, p0, p1),
        spins,
    )
}

pub fn run_protocol(
    protocol: Protocol,
    spins: &PureState,
    p0: &EmitterParams,
    p1: &EmitterParams,
) -> Result<ProtocolReport> {
    match protocol {
        Protocol::OneClick => one_click(spins, p0, p1),
        Protocol::TwoClick => two_click(spins, p0, p1),
    }
}

/// Success probability on the CJ input for resonant, identical emitters.
pub fn success_prob_closed_form(protocol: Protocol, beta: f64) -> f64 {
    let a = 1.0 - 2.0 * beta;
    let b = 1.0 - beta;
    match protocol {
        Protocol::OneClick => 0.25 * (1.0 + a * a + 2.0 * beta * beta + 2.0 * b * b),
        Protocol::TwoClick => 0.5 * (a * a + beta.powi(4) + b.powi(4)),
    }
}

/// Closed-form CJ fidelity as a rational function of the two transmissions.
pub fn cj_fidelity_closed_form(protocol: Protocol, t0: TransmissionCoeff, t1: TransmissionCoeff) -> f64 {
    let (t0, t1) = (t0.value(), t1.value());
    let sq = |z: C64| z.norm_sqr();
    match protocol {
        Protocol::OneClick => {
            let num = sq(ONE - (t0 + t1) / 2.0);
            let den =
                1.0 + (sq(t0 + t1) + sq(ONE + t1) + sq(ONE + t0) + sq(ONE - t0) + sq(ONE - t1) + sq(t0 - t1)) / 4.0;
            num / den
        }
        Protocol::TwoClick => {
            let err = sq(ONE + t1) * sq(ONE + t0);
            let den = err + sq(ONE - t1) * sq(ONE - t0) + 4.0 * sq(t0 + t1);
            1.0 - err / den
        }
    }
}

/// `1 - F_CJ` from the closed form, without forming `F` first.
pub fn cj_infidelity_closed_form(protocol: Protocol, t0: TransmissionCoeff, t1: TransmissionCoeff) -> f64 {
    let (t0, t1) = (t0.value(), t1.value());
    let sq = |z: C64| z.norm_sqr();
    match protocol {
        Protocol::OneClick => {
            let num = sq(ONE - (t0 + t1) / 2.0);
            let den =
                1.0 + (sq(t0 + t1) + sq(ONE + t1) + sq(ONE + t0) + sq(ONE - t0) + sq(ONE - t1) + sq(t0 - t1)) / 4.0;
            (den - num) / den
        }
        Protocol::TwoClick => {
            let err = sq(ONE + t1) * sq(ONE + t0);
            err / (err + sq(ONE - t1) * sq(ONE - t0) + 4.0 * sq(t0 + t1))
        }
    }
}

/// Closed-form CJ infidelity for resonant, identical emitters.
pub fn cj_infidelity_resonant(protocol: Protocol, beta: f64) -> f64 {
    let b = 1.0 - beta;
    match protocol {
        Protocol::OneClick => b * b / (1.0 - 2.0 * beta + 2.0 * beta * beta),
        Protocol::TwoClick => {
            let a = 1.0 - 2.0 * beta;
            b.powi(4) / (beta.powi(4) + a * a + b.powi(4))
        }
    }
}

/// Brute-force CJ evaluation by explicit interferometer evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CjOracle {
    pub success_prob: f64,
    pub fidelity: f64,
}

const PHOTON: usize = 4;

/// Send one photon into arm 1 and project onto detector `rail`, keeping the
/// rail qubit reset to arm 1 for reuse.
fn photon_pass(state: &PureState, t0: TransmissionCoeff, t1: TransmissionCoeff, rail: u8) -> Result<PureState> {
    let out = mzi_in_register(state, 1, 2, PHOTON, t0, t1)?;
    let projected = out.project_qubit(PHOTON, rail)?;
    if rail == 0 {
        projected.apply_gate(Gate::SigmaX, PHOTON)
    } else {
        Ok(projected)
    }
}

/// Enumerate every detector record on `|φ+⟩₁₂|φ+⟩₃₄` with an explicit photon
/// qubit, and weight each heralded state against the ideal parity projection.
pub fn cj_oracle(protocol: Protocol, p0: &EmitterParams, p1: &EmitterParams) -> Result<CjOracle> {
    let t0 = transmission(p0);
    let t1 = transmission(p1);
    let phi = BellLabel::PhiPlus.state();
    let cj = phi.tensor(&phi)?;
    let input = cj.tensor(&PureState::basis(1, 1)?)?;

    let mut success = 0.0;
    let mut weighted = 0.0;
    for (rail, kind) in [(0u8, ParityKind::Even), (1u8, ParityKind::Odd)] {
        let heralded = match protocol {
            Protocol::OneClick => photon_pass(&input, t0, t1, rail)?.apply_gate(Gate::SigmaZ, 2)?,
            Protocol::TwoClick => {
                let first = photon_pass(&input, t0, t1, rail)?
                    .apply_gate(Gate::SigmaX, 1)?
                    .apply_gate(Gate::SigmaX, 2)?;
                photon_pass(&first, t0, t1, rail)?
                    .apply_gate(Gate::SigmaX, 1)?
                    .apply_gate(Gate::SigmaX, 2)?
            }
        };
        // The rail qubit is back in |1⟩; remove it.
        let spins = heralded.drop_qubit(PHOTON, 1)?;
        let ideal = cj
            .apply_two(&kind.projector().expect("successful outcome"), 1, 2)?
            .normalized()?;
        success += spins.norm_sqr();
        weighted += ideal.inner(&spins)?.norm_sqr();
    }
    Ok(CjOracle {
        success_prob: success,
        fidelity: if success > 0.0 { weighted / success } else { 0.0 },
    })
}

pub fn cj_fidelity_oracle(protocol: Protocol, p0: &EmitterParams, p1: &EmitterParams) -> Result<f64> {
    Ok(cj_oracle(protocol, p0, p1)?.fidelity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{EPS, ZERO};

    fn params(beta: f64, delta: f64) -> EmitterParams {
        EmitterParams::new(beta, delta).unwrap()
    }

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn bell(label: BellLabel) -> PureState {
        label.state()
    }

    #[test]
    fn ideal_even_input() {
        let ideal = EmitterParams::IDEAL;
        let report = one_click(&bell(BellLabel::PhiPlus), &ideal, &ideal).unwrap();
        let even = &report.per_outcome[0];
        assert_eq!(even.kind, ParityKind::Even);
        assert!((even.prob - 1.0).abs() < EPS);
        assert!(bell(BellLabel::PhiPlus).equal_up_to_phase(even.post.as_ref().unwrap(), EPS));
        assert!((even.cond_fidelity.unwrap() - 1.0).abs() < EPS);
        assert!((report.fidelity - 1.0).abs() < EPS);
    }

    #[test]
    fn one_click_probabilities_match_display() {
        let t0 = transmission(&params(0.85, 0.07)).value();
        let t1 = transmission(&params(0.93, -0.12)).value();
        let amps = [c(0.4), C64::new(0.1, 0.5), c(-0.3), C64::new(0.2, -0.3)];
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<C64> = amps.iter().map(|a| a / norm).collect();
        let spins = PureState::new(2, amps.clone()).unwrap();
        let report = one_click(&spins, &params(0.85, 0.07), &params(0.93, -0.12)).unwrap();
        let sq = |z: C64| z.norm_sqr();
        let p0 = sq(amps[0])
            + sq(ONE + t1) * sq(amps[1]) / 4.0
            + sq(ONE + t0) * sq(amps[2]) / 4.0
            + sq(t0 + t1) * sq(amps[3]) / 4.0;
        let p1 = sq(ONE - t1) * sq(amps[1]) / 4.0 + sq(ONE - t0) * sq(amps[2]) / 4.0 + sq(t0 - t1) * sq(amps[3]) / 4.0;
        assert!((report.per_outcome[0].prob - p0).abs() < EPS);
        assert!((report.per_outcome[1].prob - p1).abs() < EPS);
        let total: f64 = report.per_outcome.iter().map(|o| o.prob).sum();
        assert!((total - 1.0).abs() < EPS);
    }

    #[test]
    fn two_click_even_state_structure() {
        let (p0, p1) = (params(0.9, 0.05), params(0.8, -0.1));
        let t0 = transmission(&p0).value();
        let t1 = transmission(&p1).value();
        let amps = [c(0.5), c(0.5), C64::new(0.0, 0.5), c(-0.5)];
        let spins = PureState::new(2, amps.to_vec()).unwrap();
        let report = two_click(&spins, &p0, &p1).unwrap();
        let alpha = (t0 + t1) / 2.0;
        let eps = (ONE + t0) * (ONE + t1) / 4.0;
        let expected = PureState::from_raw(2, vec![alpha * amps[0], eps * amps[1], eps * amps[2], alpha * amps[3]]);
        let p_expected = expected.norm_sqr();
        let even = &report.per_outcome[0];
        assert!((even.prob - p_expected).abs() < EPS);
        let expected = expected.normalized().unwrap();
        assert!(expected.equal_up_to_phase(even.post.as_ref().unwrap(), 1e-10));
    }

    #[test]
    fn two_click_odd_fidelity_is_one() {
        let spins = PureState::new(
            2,
            vec![c(0.5), C64::new(0.3, 0.4), c(-0.5), c(0.5)]
                .into_iter()
                .map(|a| a / (0.25f64 * 3.0 + 0.25).sqrt())
                .collect(),
        )
        .unwrap();
        let report = two_click(&spins, &params(0.7, 0.3), &params(0.95, -0.2)).unwrap();
        let odd = &report.per_outcome[1];
        assert!((odd.cond_fidelity.unwrap() - 1.0).abs() < EPS);
    }

    #[test]
    fn ideal_two_click_succeeds_for_any_input() {
        let spins = PureState::new(2, vec![c(0.6), c(0.0), C64::new(0.0, 0.8), ZERO]).unwrap();
        let ideal = EmitterParams::IDEAL;
        let report = two_click(&spins, &ideal, &ideal).unwrap();
        assert!((report.success_prob - 1.0).abs() < EPS);
        assert!((report.fidelity - 1.0).abs() < EPS);
        assert!((report.cj_fidelity - 1.0).abs() < EPS);
    }

    #[test]
    fn rejects_unnormalized_input() {
        let spins = PureState::new(2, vec![c(0.5), ZERO, ZERO, ZERO]).unwrap();
        let ideal = EmitterParams::IDEAL;
        assert!(one_click(&spins, &ideal, &ideal).is_err());
    }

    #[test]
    fn resonant_one_click_value() {
        let p = params(0.9, 0.0);
        let f = one_click(&bell(BellLabel::PhiPlus), &p, &p).unwrap().cj_fidelity;
        assert!((f - (1.0 - 0.01 / 0.82)).abs() < EPS);
        let oracle = cj_fidelity_oracle(Protocol::OneClick, &p, &p).unwrap();
        assert!((oracle - (1.0 - 0.01 / 0.82)).abs() < EPS);
    }

    #[test]
    fn resonant_two_click_value() {
        let t = TransmissionCoeff::real(-0.8).unwrap();
        let infid = 1.0 - cj_fidelity_closed_form(Protocol::TwoClick, t, t);
        assert!((infid - 0.0016 / 20.7392).abs() < 1e-15);
        let oracle = cj_fidelity_oracle(Protocol::TwoClick, &params(0.9, 0.0), &params(0.9, 0.0)).unwrap();
        assert!((1.0 - oracle - 0.0016 / 20.7392).abs() < 1e-14);
    }

    #[test]
    fn mutual_detuning_one_click() {
        let (p0, p1) = (params(1.0, -0.2), params(1.0, 0.2));
        let closed = cj_fidelity_closed_form(Protocol::OneClick, transmission(&p0), transmission(&p1));
        let oracle = cj_fidelity_oracle(Protocol::OneClick, &p0, &p1).unwrap();
        assert!((closed - oracle).abs() < EPS);
    }

    #[test]
    fn asymmetric_point() {
        let (p0, p1) = (params(0.85, 0.05), params(0.95, -0.1));
        for protocol in Protocol::ALL {
            let closed = cj_fidelity_closed_form(protocol, transmission(&p0), transmission(&p1));
            let oracle = cj_fidelity_oracle(protocol, &p0, &p1).unwrap();
            assert!((closed - oracle).abs() < EPS, "{protocol:?}");
        }
    }

    #[test]
    fn quarter_wave_detuning_point() {
        let t0 = TransmissionCoeff::IDEAL;
        let t1 = transmission(&params(1.0, 0.5));
        for protocol in Protocol::ALL {
            let closed = cj_fidelity_closed_form(protocol, t0, t1);
            let channel = ParityChannel::for_protocol(protocol, t0, t1).cj_fidelity();
            let oracle = cj_fidelity_oracle(protocol, &EmitterParams::IDEAL, &params(1.0, 0.5)).unwrap();
            assert!((closed - oracle).abs() < EPS);
            assert!((channel - oracle).abs() < EPS);
        }
    }

    #[test]
    fn success_polynomials() {
        for protocol in Protocol::ALL {
            assert!((success_prob_closed_form(protocol, 1.0) - 1.0).abs() < EPS);
        }
        assert!((success_prob_closed_form(Protocol::OneClick, 0.5) - 0.5).abs() < EPS);
        assert!((success_prob_closed_form(Protocol::TwoClick, 0.5) - 0.0625).abs() < EPS);
        assert!((success_prob_closed_form(Protocol::OneClick, 0.9) - 0.82).abs() < EPS);
        assert!((success_prob_closed_form(Protocol::TwoClick, 0.9) - 0.6481).abs() < EPS);
        let p = params(0.9, 0.0);
        for protocol in Protocol::ALL {
            let oracle = cj_oracle(protocol, &p, &p).unwrap().success_prob;
            assert!((oracle - success_prob_closed_form(protocol, 0.9)).abs() < EPS);
        }
    }

    #[test]
    fn resonant_reductions_match_rational_forms() {
        for k in 0..=20 {
            let beta = 0.5 + 0.025 * k as f64;
            let t = transmission(&params(beta, 0.0));
            for protocol in Protocol::ALL {
                let general = 1.0 - cj_fidelity_closed_form(protocol, t, t);
                assert!((general - cj_infidelity_resonant(protocol, beta)).abs() < EPS);
                let direct = cj_infidelity_closed_form(protocol, t, t);
                assert!((direct - cj_infidelity_resonant(protocol, beta)).abs() < EPS);
            }
        }
    }

    #[test]
    fn parity_is_qnd_when_ideal() {
        let ideal = EmitterParams::IDEAL;
        let spins = PureState::new(2, vec![c(0.6), c(0.0), c(0.0), c(0.8)]).unwrap();
        for protocol in Protocol::ALL {
            let first = run_protocol(protocol, &spins, &ideal, &ideal).unwrap();
            let post = first.per_outcome[0].post.clone().unwrap();
            let second = run_protocol(protocol, &post, &ideal, &ideal).unwrap();
            assert!((second.per_outcome[0].prob - 1.0).abs() < EPS);
        }
    }

    #[test]
    fn povm_is_sub_identity() {
        let t0 = transmission(&params(0.7, 0.4));
        let t1 = transmission(&params(0.9, -0.3));
        for protocol in Protocol::ALL {
            let ch = ParityChannel::for_protocol(protocol, t0, t1);
            assert!(ch.max_success_eigenvalue() <= 1.0 + EPS);
        }
    }
}
