//! Single-photon scattering off chiral emitters and the Mach-Zehnder map.
//!
//! Each interferometer arm holds one emitter. A photon in arm `j` picks up
//! the transmission coefficient `t_j` only when emitter `j` is in `|1⟩`.
//! The photon is a dual-rail qubit: `|0⟩_ph` is arm 0 (top), `|1⟩_ph` arm 1.

use nalgebra::{Matrix2, Matrix4};

use crate::error::{Error, Result};
use crate::qstate::{diag4, PureState, C64, EPS, I, ONE, ZERO};

/// Parameters of one chiral emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    /// Directional β-factor in `(0, 1]`.
    pub beta: f64,
    /// Detuning in units of `gamma_r`.
    pub delta: f64,
    /// Decay rate into the guided mode; sets the frequency scale for pulses.
    pub gamma_r: f64,
    /// Incoherent fraction `γ_inc / (Γ_R + γ_inc)` in `[0, 1)`. Only `dephase` reads it.
    pub beta_c_inc: f64,
}

impl Default for EmitterParams {
    fn default() -> Self {
        EmitterParams::IDEAL
    }
}

impl EmitterParams {
    pub const IDEAL: EmitterParams = EmitterParams {
        beta: 1.0,
        delta: 0.0,
        gamma_r: 1.0,
        beta_c_inc: 0.0,
    };

    pub fn new(beta: f64, delta: f64) -> Result<Self> {
        EmitterParams {
            beta,
            delta,
            ..EmitterParams::IDEAL
        }
        .validated()
    }

    pub fn with_gamma_r(self, gamma_r: f64) -> Result<Self> {
        EmitterParams { gamma_r, ..self }.validated()
    }

    pub fn with_incoherent_fraction(self, beta_c_inc: f64) -> Result<Self> {
        EmitterParams { beta_c_inc, ..self }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta {} not in (0, 1]", self.beta)));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidParameter(format!("detuning {} not finite", self.delta)));
        }
        if !(self.gamma_r > 0.0 && self.gamma_r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma_r {} not positive",
                self.gamma_r
            )));
        }
        if !(0.0..1.0).contains(&self.beta_c_inc) {
            return Err(Error::InvalidParameter(format!(
                "incoherent fraction {} not in [0, 1)",
                self.beta_c_inc
            )));
        }
        Ok(self)
    }
}

/// Complex transmission amplitude of a photon past an emitter in `|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionCoeff(C64);

impl TransmissionCoeff {
    /// Perfect π phase shift, `t = -1`.
    pub const IDEAL: TransmissionCoeff = TransmissionCoeff(C64::new(-1.0, 0.0));

    pub fn new(value: C64) -> Result<Self> {
        if !(value.norm() <= 1.0 + EPS) {
            return Err(Error::InvalidParameter(format!("|t| = {} exceeds 1", value.norm())));
        }
        Ok(TransmissionCoeff(value))
    }

    pub fn real(value: f64) -> Result<Self> {
        TransmissionCoeff::new(C64::new(value, 0.0))
    }

    pub fn value(self) -> C64 {
        self.0
    }
}

impl From<TransmissionCoeff> for C64 {
    fn from(t: TransmissionCoeff) -> C64 {
        t.0
    }
}

/// `t = 1 - 2β / (1 - 2iβΔ)` with `Δ` in units of `Γ_R`.
pub fn transmission(p: &EmitterParams) -> TransmissionCoeff {
    transmission_detuned(p.beta, p.delta)
}

/// Transmission for a frequency component `omega` away from the carrier,
/// in the same absolute units as `gamma_r`.
pub fn transmission_at(p: &EmitterParams, omega: f64) -> TransmissionCoeff {
    transmission_detuned(p.beta, p.delta - omega / p.gamma_r)
}

fn transmission_detuned(beta: f64, delta: f64) -> TransmissionCoeff {
    let denom = C64::new(1.0, -2.0 * beta * delta);
    TransmissionCoeff(ONE - C64::new(2.0 * beta, 0.0) / denom)
}

/// Which arm of the interferometer a photon occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhotonRail {
    Arm0,
    Arm1,
}

impl PhotonRail {
    pub fn index(self) -> usize {
        match self {
            PhotonRail::Arm0 => 0,
            PhotonRail::Arm1 => 1,
        }
    }
}

/// Which detector fired, or whether the photon left the guided modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorOutcome {
    Detector0,
    Detector1,
    Lost,
}

impl DetectorOutcome {
    pub fn from_rail(rail: usize) -> DetectorOutcome {
        if rail == 0 {
            DetectorOutcome::Detector0
        } else {
            DetectorOutcome::Detector1
        }
    }
}

/// A heralded outcome. `state` is unnormalized with squared norm (trace) `prob`;
/// the lost branch carries no state.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<S> {
    pub outcome: DetectorOutcome,
    pub state: Option<S>,
    pub prob: f64,
}

/// 50:50 beamsplitter, `|0⟩ → (|0⟩ + i|1⟩)/√2`, `|1⟩ → (i|0⟩ + |1⟩)/√2`.
pub fn beamsplitter_matrix() -> Matrix2<C64> {
    let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    Matrix2::new(s, I * s, I * s, s)
}

/// Apply the beamsplitter to the rail qubit `photon` of `state`.
pub fn beamsplitter(state: &PureState, photon: usize) -> Result<PureState> {
    state.apply_single(&beamsplitter_matrix(), photon)
}

/// Operator on `(spin, photon)` that multiplies by `t` when the spin is `|1⟩`
/// and the photon is in `arm`.
fn conditional_scatter(t: C64, arm: usize) -> Matrix4<C64> {
    let mut d = [ONE; 4];
    d[2 + arm] = t;
    diag4(d)
}

/// Beamsplitter, emitter scattering, beamsplitter, applied inside a larger
/// register. Emitter 0 sits in arm 0 and emitter 1 in arm 1.
pub fn mzi_in_register(
    state: &PureState,
    spin0: usize,
    spin1: usize,
    photon: usize,
    t0: TransmissionCoeff,
    t1: TransmissionCoeff,
) -> Result<PureState> {
    let s = beamsplitter(state, photon)?;
    let s = s.apply_two(&conditional_scatter(t0.0, 0), spin0, photon)?;
    let s = s.apply_two(&conditional_scatter(t1.0, 1), spin1, photon)?;
    beamsplitter(&s, photon)
}

/// Full three-qubit evolution (spins 0, 1 then the photon) for a photon
/// entering on `rail`. The lost component is the missing norm.
pub fn mzi_evolve(
    spins: &PureState,
    rail: PhotonRail,
    t0: TransmissionCoeff,
    t1: TransmissionCoeff,
) -> Result<PureState> {
    check_two_spins(spins)?;
    let photon = PureState::basis(1, rail.index())?;
    mzi_in_register(&spins.tensor(&photon)?, 0, 1, 2, t0, t1)
}

fn check_two_spins(spins: &PureState) -> Result<()> {
    if spins.n_qubits() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected a 2-qubit spin state, got {} qubits",
            spins.n_qubits()
        )));
    }
    Ok(())
}

/// Spin states heralded by each detector after one photon.
#[derive(Debug, Clone, PartialEq)]
pub struct MziOutput {
    pub detector0: PureState,
    pub detector1: PureState,
    pub lost_prob: f64,
}

impl MziOutput {
    pub fn branches(&self) -> Vec<Branch<PureState>> {
        vec![
            Branch {
                outcome: DetectorOutcome::Detector0,
                prob: self.detector0.norm_sqr(),
                state: Some(self.detector0.clone()),
            },
            Branch {
                outcome: DetectorOutcome::Detector1,
                prob: self.detector1.norm_sqr(),
                state: Some(self.detector1.clone()),
            },
            Branch {
                outcome: DetectorOutcome::Lost,
                state: None,
                prob: self.lost_prob,
            },
        ]
    }
}

/// Detector-0 Kraus operator, `diag(1, (1+t1)/2, (1+t0)/2, (t0+t1)/2)`.
///
/// The overall factor `i` from the two beamsplitter passes is dropped.
pub fn kraus_detector0(t0: TransmissionCoeff, t1: TransmissionCoeff) -> Matrix4<C64> {
    let (t0, t1) = (t0.0, t1.0);
    diag4([ONE, (ONE + t1) / 2.0, (ONE + t0) / 2.0, (t0 + t1) / 2.0])
}

/// Detector-1 Kraus operator, `diag(0, (t1-1)/2, (1-t0)/2, (t1-t0)/2)`.
pub fn kraus_detector1(t0: TransmissionCoeff, t1: TransmissionCoeff) -> Matrix4<C64> {
    let (t0, t1) = (t0.0, t1.0);
    diag4([ZERO, (t1 - ONE) / 2.0, (ONE - t0) / 2.0, (t1 - t0) / 2.0])
}

/// Closed-form interferometer map for a photon entering arm 1.
pub fn mzi_scatter(
    spins: &PureState,
    rail: PhotonRail,
    t0: TransmissionCoeff,
    t1: TransmissionCoeff,
) -> Result<MziOutput> {
    check_two_spins(spins)?;
    if rail != PhotonRail::Arm1 {
        return Err(Error::InvalidParameter(
            "the closed-form map assumes the photon enters arm 1".into(),
        ));
    }
    let detector0 = spins.apply_two(&kraus_detector0(t0, t1), 0, 1)?;
    let detector1 = spins.apply_two(&kraus_detector1(t0, t1), 0, 1)?;
    let lost_prob = (spins.norm_sqr() - detector0.norm_sqr() - detector1.norm_sqr()).max(0.0);
    Ok(MziOutput {
        detector0,
        detector1,
        lost_prob,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_of(beta: f64, delta: f64) -> C64 {
        transmission(&EmitterParams::new(beta, delta).unwrap()).value()
    }

    #[test]
    fn transmission_examples() {
        assert!((t_of(1.0, 0.0) - C64::new(-1.0, 0.0)).norm() < EPS);
        assert!(t_of(0.5, 0.0).norm() < EPS);
        let t = t_of(1.0, 0.5);
        assert!((t - C64::new(0.0, -1.0)).norm() < EPS);
        assert!((t.norm() - 1.0).abs() < EPS);
        assert!((t_of(0.9, 0.0) - C64::new(-0.8, 0.0)).norm() < EPS);
    }

    #[test]
    fn transmission_at_shifts_detuning() {
        let p = EmitterParams::new(0.8, 0.1).unwrap().with_gamma_r(2.0).unwrap();
        let shifted = transmission_at(&p, 0.4).value();
        // 0.1 - 0.4 / 2 = -0.1
        assert!((shifted - t_of(0.8, -0.1)).norm() < EPS);
    }

    #[test]
    fn params_validation() {
        assert!(EmitterParams::new(0.0, 0.0).is_err());
        assert!(EmitterParams::new(1.1, 0.0).is_err());
        assert!(EmitterParams::IDEAL.with_gamma_r(0.0).is_err());
        assert!(EmitterParams::IDEAL.with_incoherent_fraction(1.0).is_err());
        assert!(EmitterParams::IDEAL.with_incoherent_fraction(0.2).is_ok());
    }

    #[test]
    fn beamsplitter_images() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let one = beamsplitter(&PureState::basis(1, 1).unwrap(), 0).unwrap();
        assert!((one.amplitude(0) - I * h).norm() < EPS);
        assert!((one.amplitude(1) - C64::new(h, 0.0)).norm() < EPS);
        let zero = beamsplitter(&PureState::basis(1, 0).unwrap(), 0).unwrap();
        assert!((zero.amplitude(0) - C64::new(h, 0.0)).norm() < EPS);
        assert!((zero.amplitude(1) - I * h).norm() < EPS);
    }

    #[test]
    fn beamsplitter_squared_is_i_sigma_x() {
        let b = beamsplitter_matrix();
        let sq = b * b;
        let expected = Matrix2::new(ZERO, I, I, ZERO);
        assert!((sq - expected).iter().all(|z| z.norm() < EPS));
    }

    #[test]
    fn even_input_clicks_detector0() {
        let spins = PureState::basis(2, 0).unwrap();
        let out = mzi_scatter(
            &spins,
            PhotonRail::Arm1,
            TransmissionCoeff::IDEAL,
            TransmissionCoeff::IDEAL,
        )
        .unwrap();
        assert!((out.detector0.norm_sqr() - 1.0).abs() < EPS);
        assert!(out.detector1.norm_sqr() < EPS);
        assert!(out.lost_prob < EPS);
    }

    #[test]
    fn odd_input_clicks_detector1() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let spins = PureState::new(2, vec![ZERO, C64::new(h, 0.0), C64::new(h, 0.0), ZERO]).unwrap();
        let out = mzi_scatter(
            &spins,
            PhotonRail::Arm1,
            TransmissionCoeff::IDEAL,
            TransmissionCoeff::IDEAL,
        )
        .unwrap();
        assert!((out.detector1.norm_sqr() - 1.0).abs() < EPS);
        // |01⟩ picks up -1, |10⟩ +1: the protocol's σ_z on qubit 1 restores the sign.
        assert!((out.detector1.amplitude(1) + C64::new(h, 0.0)).norm() < EPS);
        assert!((out.detector1.amplitude(2) - C64::new(h, 0.0)).norm() < EPS);
    }

    #[test]
    fn lossy_eleven() {
        let t = TransmissionCoeff::real(-0.8).unwrap();
        let out = mzi_scatter(&PureState::basis(2, 3).unwrap(), PhotonRail::Arm1, t, t).unwrap();
        assert!((out.detector0.amplitude(3) - C64::new(-0.8, 0.0)).norm() < EPS);
        assert!((out.detector0.norm_sqr() - 0.64).abs() < EPS);
        assert!(out.detector1.norm_sqr() < EPS);
        assert!((out.lost_prob - 0.36).abs() < EPS);
    }

    #[test]
    fn lossy_eleven_via_composition() {
        let t = TransmissionCoeff::real(-0.8).unwrap();
        let full = mzi_evolve(&PureState::basis(2, 3).unwrap(), PhotonRail::Arm1, t, t).unwrap();
        // Photon on detector 0 means the rail qubit (index 2) is |0⟩.
        let d0 = full.project_qubit(2, 0).unwrap().norm_sqr();
        assert!((d0 - 0.64).abs() < EPS);
        assert!((1.0 - full.norm_sqr() - 0.36).abs() < EPS);
    }

    #[test]
    fn arm0_rejected_by_closed_form() {
        let spins = PureState::basis(2, 0).unwrap();
        let t = TransmissionCoeff::IDEAL;
        assert!(mzi_scatter(&spins, PhotonRail::Arm0, t, t).is_err());
        assert!(mzi_scatter(&PureState::basis(1, 0).unwrap(), PhotonRail::Arm1, t, t).is_err());
    }

    #[test]
    fn composition_phase_is_i_on_detector0() {
        let full = mzi_evolve(
            &PureState::basis(2, 0).unwrap(),
            PhotonRail::Arm1,
            TransmissionCoeff::IDEAL,
            TransmissionCoeff::IDEAL,
        )
        .unwrap();
        // |00⟩|0⟩_ph has index 0.
        assert!((full.amplitude(0) - I).norm() < EPS);
    }

    #[test]
    fn transmission_rejects_gain() {
        assert!(TransmissionCoeff::real(1.5).is_err());
    }
}
