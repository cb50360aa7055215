//! Incoherent scattering for lossless, resonant emitters.
//!
//! A fraction of the scattering events randomise the photon phase. Such a
//! photon leaves either interferometer arm with probability ½ and projects
//! the emitter it scattered from onto `|1⟩`. Per photon and per detector the
//! spin pair evolves under the Kraus set
//!
//! ```text
//! { M_r(t, t),  √w Π₀,  √w Π₁ },   w = (1 - t²)/4
//! ```
//!
//! where `M_r` is the coherent detector-`r` operator and `Π_j` projects
//! emitter `j` onto `|1⟩`. Two-click records compose two such sets with the
//! `σ_x⊗σ_x` flips in between.

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::parity::{ParityChannel, Protocol, ProtocolReport};
use crate::qstate::{diag4, kron2, DensityMatrix, Gate, PureState, C64, ZERO};
use crate::scatter::{kraus_detector0, kraus_detector1, Branch, DetectorOutcome, EmitterParams, TransmissionCoeff};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingParams {
    /// Coherent transmission, `-1 + 2·inc_fraction`.
    pub t: f64,
    /// `γ_inc / (Γ_R + γ_inc)`.
    pub inc_fraction: f64,
}

impl DephasingParams {
    pub fn new(inc_fraction: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&inc_fraction) {
            return Err(Error::Precondition(format!(
                "incoherent fraction {inc_fraction} not in [0, 1)"
            )));
        }
        Ok(DephasingParams {
            t: -1.0 + 2.0 * inc_fraction,
            inc_fraction,
        })
    }

    /// The model only covers identical lossless resonant emitters.
    pub fn from_emitters(p0: &EmitterParams, p1: &EmitterParams) -> Result<Self> {
        for p in [p0, p1] {
            if p.beta != 1.0 || p.delta != 0.0 {
                return Err(Error::Precondition(format!(
                    "dephasing model needs beta = 1 and zero detuning, got beta {} delta {}",
                    p.beta, p.delta
                )));
            }
        }
        if p0.beta_c_inc != p1.beta_c_inc {
            return Err(Error::Precondition(
                "dephasing model needs identical incoherent fractions".into(),
            ));
        }
        DephasingParams::new(p0.beta_c_inc)
    }

    /// Weight of one incoherent event per emitter and per output rail.
    pub fn incoherent_weight(&self) -> f64 {
        (1.0 - self.t * self.t) / 4.0
    }

    fn transmission(&self) -> TransmissionCoeff {
        TransmissionCoeff::real(self.t).expect("|t| < 1 by construction")
    }
}

/// Kraus set for one photon heralded on `rail` (before any correction).
pub fn single_pass_kraus(d: &DephasingParams, rail: u8) -> Vec<Matrix4<C64>> {
    let t = d.transmission();
    let coherent = if rail == 0 {
        kraus_detector0(t, t)
    } else {
        kraus_detector1(t, t)
    };
    let s = C64::new(d.incoherent_weight().sqrt(), 0.0);
    let first = diag4([ZERO, ZERO, s, s]);
    let second = diag4([ZERO, s, ZERO, s]);
    vec![coherent, first, second]
}

fn sigma_x_both() -> Matrix4<C64> {
    let x = Gate::SigmaX.matrix();
    kron2(&x, &x)
}

fn sigma_z_second() -> Matrix4<C64> {
    kron2(&nalgebra::Matrix2::identity(), &Gate::SigmaZ.matrix())
}

/// Kraus set for the two-click record `(first, second)`, including both flips.
pub fn two_pass_kraus(d: &DephasingParams, first: u8, second: u8) -> Vec<Matrix4<C64>> {
    let x = sigma_x_both();
    let a_set = single_pass_kraus(d, first);
    let b_set = single_pass_kraus(d, second);
    let mut out = Vec::with_capacity(9);
    for a in &a_set {
        for b in &b_set {
            out.push(x * b * x * a);
        }
    }
    out
}

fn spin_density(spins: &PureState) -> Result<DensityMatrix> {
    if spins.n_qubits() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected 2 spins, got {} qubits",
            spins.n_qubits()
        )));
    }
    Ok(spins.to_density())
}

fn branches_from(
    rho: &DensityMatrix,
    sets: Vec<(DetectorOutcome, Vec<Matrix4<C64>>)>,
) -> Result<Vec<Branch<DensityMatrix>>> {
    let mut out = Vec::with_capacity(sets.len() + 1);
    let mut total = 0.0;
    for (outcome, kraus) in sets {
        let state = rho.apply_kraus_two(&kraus, 0, 1)?;
        let prob = state.trace();
        total += prob;
        out.push(Branch {
            outcome,
            state: Some(state),
            prob,
        });
    }
    out.push(Branch {
        outcome: DetectorOutcome::Lost,
        state: None,
        prob: (rho.trace() - total).max(0.0),
    });
    Ok(out)
}

/// Raw detector branches for one photon, before the `σ_z` correction.
pub fn scatter_dephased_one_click(spins: &PureState, d: &DephasingParams) -> Result<Vec<Branch<DensityMatrix>>> {
    let rho = spin_density(spins)?;
    branches_from(
        &rho,
        vec![
            (DetectorOutcome::Detector0, single_pass_kraus(d, 0)),
            (DetectorOutcome::Detector1, single_pass_kraus(d, 1)),
        ],
    )
}

/// Detector record of a two-click run, `(first, second)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClickPattern(pub u8, pub u8);

impl ClickPattern {
    pub const ALL: [ClickPattern; 4] = [
        ClickPattern(0, 0),
        ClickPattern(0, 1),
        ClickPattern(1, 0),
        ClickPattern(1, 1),
    ];

    pub fn heralds_success(self) -> bool {
        self.0 == self.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternBranch {
    pub pattern: ClickPattern,
    /// Unnormalized, after the final `σ_x⊗σ_x`.
    pub state: DensityMatrix,
    pub prob: f64,
}

/// All four two-click records with their unnormalized states.
pub fn scatter_dephased_two_click(spins: &PureState, d: &DephasingParams) -> Result<Vec<PatternBranch>> {
    let rho = spin_density(spins)?;
    ClickPattern::ALL
        .iter()
        .map(|&pattern| {
            let state = rho.apply_kraus_two(&two_pass_kraus(d, pattern.0, pattern.1), 0, 1)?;
            let prob = state.trace();
            Ok(PatternBranch { pattern, state, prob })
        })
        .collect()
}

/// Heralded channel of the one-click protocol with incoherent scattering.
pub fn one_click_channel(d: &DephasingParams) -> ParityChannel {
    let z = sigma_z_second();
    let corrected = |rail| single_pass_kraus(d, rail).into_iter().map(|k| z * k).collect();
    ParityChannel {
        even: corrected(0),
        odd: corrected(1),
    }
}

/// Heralded channel of the two-click protocol with incoherent scattering.
pub fn two_click_channel(d: &DephasingParams) -> ParityChannel {
    ParityChannel {
        even: two_pass_kraus(d, 0, 0),
        odd: two_pass_kraus(d, 1, 1),
    }
}

pub fn channel(protocol: Protocol, d: &DephasingParams) -> ParityChannel {
    match protocol {
        Protocol::OneClick => one_click_channel(d),
        Protocol::TwoClick => two_click_channel(d),
    }
}

pub fn cj_fidelity_dephased(protocol: Protocol, d: &DephasingParams) -> f64 {
    channel(protocol, d).cj_fidelity()
}

/// `1 - F_CJ` without the cancellation of forming `F` first.
pub fn cj_infidelity_dephased(protocol: Protocol, d: &DephasingParams) -> f64 {
    let terms = channel(protocol, d).cj_terms();
    let p: f64 = terms.iter().map(|(p, _)| p).sum();
    let gap: f64 = terms.iter().map(|(p, pf)| p - pf).sum();
    gap / p
}

/// Run a dephased protocol on a pure input, reporting the mixed-state fidelity.
pub fn run_dephased(protocol: Protocol, spins: &PureState, d: &DephasingParams) -> Result<ProtocolReport> {
    crate::parity::run_channel(protocol, &channel(protocol, d), spins)
}
