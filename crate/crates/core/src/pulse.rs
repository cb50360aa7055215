//! Finite-bandwidth Lorentzian photons.
//!
//! With `|f(ω)|² = (2σ³/π) / (σ² + ω²)²` every CJ quantity reduces to a
//! handful of one-dimensional moments `E[g] = ∫ |f(ω)|² g(ω) dω` of the
//! per-frequency transmissions. The two-click double integrals factorise into
//! products of these moments, so no two-dimensional quadrature is needed.
//!
//! Quadrature runs in the angle `φ = atan(ω/σ)`, under which
//! `|f|² dω = (2/π) cos²φ dφ` on `(-π/2, π/2)`. The algebraic tails become
//! a finite interval and are integrated rather than bounded.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::parity::Protocol;
use crate::qstate::{C64, ONE};
use crate::scatter::{transmission_at, EmitterParams};

/// `|f(ω)|²` for a Lorentzian of half-width `sigma`.
pub fn lorentzian_density(omega: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let d = s2 + omega * omega;
    2.0 * sigma * s2 / PI / (d * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Initial Gauss-Kronrod panels over the core `|ω| ≤ cutoff·σ`.
    pub n_points: usize,
    /// Core half-width in units of σ; tails beyond it get their own panels.
    pub cutoff: f64,
    /// Largest allowed change when the panel count is doubled.
    pub tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            n_points: 64,
            cutoff: 50.0,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub sigma: f64,
    pub quad: QuadSpec,
}

impl PulseSpec {
    pub fn new(sigma: f64) -> Result<Self> {
        PulseSpec {
            sigma,
            quad: QuadSpec::default(),
        }
        .validated()
    }

    pub fn with_quad(self, quad: QuadSpec) -> Result<Self> {
        PulseSpec { quad, ..self }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma {} not positive", self.sigma)));
        }
        if self.quad.n_points < 64 {
            return Err(Error::InvalidParameter(format!(
                "n_points {} below 64",
                self.quad.n_points
            )));
        }
        if !(self.quad.cutoff >= 50.0) {
            return Err(Error::InvalidParameter(format!(
                "cutoff {}σ below 50σ",
                self.quad.cutoff
            )));
        }
        if !(self.quad.tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(self)
    }
}

// 15-point Kronrod rule with its embedded 7-point Gauss rule, on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 30;
/// Absolute error target per unit of φ for the adaptive refinement.
const PANEL_TOL: f64 = 1e-14;

fn gk15<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for (k, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-x, x] };
        for &s in nodes {
            let v = f(c + h * s);
            for i in 0..N {
                kron[i] += wk * v[i];
                if k % 2 == 1 {
                    gauss[i] += WG[k / 2] * v[i];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..N {
        kron[i] *= h;
        gauss[i] *= h;
        err = err.max((kron[i] - gauss[i]).abs());
    }
    (kron, err)
}

fn adaptive<const N: usize>(f: &impl Fn(f64) -> [f64; N], a: f64, b: f64, depth: u32, acc: &mut [f64; N]) -> bool {
    let (val, err) = gk15(f, a, b);
    if err <= PANEL_TOL * (b - a) || err < 1e-300 {
        for i in 0..N {
            acc[i] += val[i];
        }
        return true;
    }
    if depth >= MAX_DEPTH {
        for i in 0..N {
            acc[i] += val[i];
        }
        return false;
    }
    let m = 0.5 * (a + b);
    let left = adaptive(f, a, m, depth + 1, acc);
    let right = adaptive(f, m, b, depth + 1, acc);
    left && right
}

/// `∫ |f(ω)|² g(ω) dω` for a vector-valued `g`, with `n_core` initial panels.
fn integrate_with<const N: usize>(
    g: &impl Fn(f64) -> [f64; N],
    sigma: f64,
    cutoff: f64,
    n_core: usize,
) -> ([f64; N], bool) {
    let integrand = |phi: f64| {
        let w = 2.0 / PI * phi.cos().powi(2);
        let mut v = g(sigma * phi.tan());
        for x in v.iter_mut() {
            *x *= w;
        }
        v
    };
    let edge = cutoff.atan();
    let n_tail = (n_core / 8).max(4);
    let mut acc = [0.0; N];
    let mut ok = true;
    let mut panels = |a: f64, b: f64, n: usize| {
        let h = (b - a) / n as f64;
        for k in 0..n {
            let lo = a + h * k as f64;
            let hi = if k + 1 == n { b } else { lo + h };
            ok &= adaptive(&integrand, lo, hi, 0, &mut acc);
        }
    };
    panels(-FRAC_PI_2, -edge, n_tail);
    panels(-edge, edge, n_core);
    panels(edge, FRAC_PI_2, n_tail);
    (acc, ok)
}

/// `∫ |f(ω)|² g(ω) dω`, checked by doubling the initial panel count.
pub fn integrate<const N: usize>(g: impl Fn(f64) -> [f64; N], pulse: &PulseSpec) -> Result<[f64; N]> {
    let q = pulse.quad;
    let (coarse, ok_c) = integrate_with(&g, pulse.sigma, q.cutoff, q.n_points);
    let (fine, ok_f) = integrate_with(&g, pulse.sigma, q.cutoff, 2 * q.n_points);
    let diff = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if diff > q.tol || !(ok_c || ok_f) && diff > q.tol / 10.0 {
        return Err(Error::NonConvergence(format!(
            "panel doubling changed an integral by {diff:e} (tolerance {:e})",
            q.tol
        )));
    }
    Ok(fine)
}

/// Outcome of a CJ evaluation with a finite-bandwidth photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseReport {
    pub success_prob: f64,
    pub fidelity: f64,
    /// `1 - fidelity`, evaluated without cancellation.
    pub infidelity: f64,
}

fn check_pulse(p0: &EmitterParams, p1: &EmitterParams, pulse: &PulseSpec) -> Result<()> {
    p0.validated()?;
    p1.validated()?;
    pulse.validated()?;
    for p in [p0, p1] {
        if pulse.sigma >= p.gamma_r {
            return Err(Error::Precondition(format!(
                "pulse width {} must be below the emitter linewidth {}",
                pulse.sigma, p.gamma_r
            )));
        }
    }
    Ok(())
}

pub fn pulse_report(
    protocol: Protocol,
    p0: &EmitterParams,
    p1: &EmitterParams,
    pulse: &PulseSpec,
) -> Result<PulseReport> {
    check_pulse(p0, p1, pulse)?;
    let amps = |omega: f64| {
        let t0 = transmission_at(p0, omega).value();
        let t1 = transmission_at(p1, omega).value();
        let alpha = (t0 + t1) / 2.0;
        // Detector-0 error amplitudes, then detector-1 amplitudes.
        let a1 = (ONE + t1) / 2.0;
        let a2 = (ONE + t0) / 2.0;
        let u = (ONE - t0) / 2.0;
        let v = (t1 - ONE) / 2.0;
        (t0, t1, alpha, a1, a2, u, v)
    };
    match protocol {
        Protocol::OneClick => {
            let [norm, err] = integrate(
                |omega| {
                    let (t0, t1, alpha, a1, a2, u, v) = amps(omega);
                    let d = (t1 - t0) / 2.0;
                    let norm = 1.0
                        + a1.norm_sqr()
                        + a2.norm_sqr()
                        + alpha.norm_sqr()
                        + u.norm_sqr()
                        + v.norm_sqr()
                        + d.norm_sqr();
                    let good = (ONE - alpha).norm_sqr();
                    [norm, norm - good]
                },
                pulse,
            )?;
            Ok(PulseReport {
                success_prob: norm / 4.0,
                fidelity: 1.0 - err / norm,
                infidelity: err / norm,
            })
        }
        Protocol::TwoClick => {
            let m = integrate(
                |omega| {
                    let (_, _, alpha, a1, a2, u, v) = amps(omega);
                    let uv = u * v.conj();
                    [
                        alpha.norm_sqr(),
                        alpha.re,
                        alpha.im,
                        a1.norm_sqr(),
                        a2.norm_sqr(),
                        u.norm_sqr(),
                        v.norm_sqr(),
                        uv.re,
                        uv.im,
                    ]
                },
                pulse,
            )?;
            let [e_alpha2, re_alpha, im_alpha, e_a1, e_a2, e_u, e_v, re_uv, im_uv] = m;
            let mean_alpha2 = C64::new(re_alpha, im_alpha).norm_sqr();
            let mean_uv2 = C64::new(re_uv, im_uv).norm_sqr();
            // 8 P and 8 (P - P F) summed over both outcomes.
            let p8 = 4.0 * e_alpha2 + 4.0 * e_a1 * e_a2 + 4.0 * e_u * e_v;
            let loss8 = 2.0 * (e_alpha2 - mean_alpha2) + 4.0 * e_a1 * e_a2 + 2.0 * (e_u * e_v - mean_uv2);
            Ok(PulseReport {
                success_prob: p8 / 8.0,
                fidelity: 1.0 - loss8 / p8,
                infidelity: loss8 / p8,
            })
        }
    }
}

pub fn cj_fidelity_pulse(protocol: Protocol, p0: &EmitterParams, p1: &EmitterParams, pulse: &PulseSpec) -> Result<f64> {
    Ok(pulse_report(protocol, p0, p1, pulse)?.fidelity)
}

/// Leading-order infidelity for lossless emitters and `σ ≪ Γ`.
pub fn cj_infidelity_asymptote(protocol: Protocol, sigma: f64, gamma0: f64, gamma1: f64) -> f64 {
    let s2 = sigma * sigma;
    match protocol {
        Protocol::OneClick => {
            let r = (gamma0 + gamma1) / (gamma0 * gamma1);
            s2 * r * r
        }
        Protocol::TwoClick => 2.0 * s2 * (1.0 / (gamma0 * gamma0) + 1.0 / (gamma1 * gamma1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parity::cj_fidelity_closed_form;
    use crate::scatter::transmission;

    #[test]
    fn density_values() {
        let s = 0.3;
        assert!((lorentzian_density(0.0, s) - 2.0 / (PI * s)).abs() < 1e-12);
        // (2σ³/π) / (2σ²)² = 1/(2πσ)
        assert!((lorentzian_density(s, s) - 1.0 / (2.0 * PI * s)).abs() < 1e-12);
    }

    #[test]
    fn density_normalized() {
        for sigma in [1e-3, 0.01, 0.5] {
            let pulse = PulseSpec::new(sigma).unwrap();
            let [n] = integrate(|_| [1.0], &pulse).unwrap();
            assert!((n - 1.0).abs() < 1e-8, "sigma {sigma}: {n}");
        }
    }

    #[test]
    fn bounded_moment() {
        let sigma = 0.02;
        let pulse = PulseSpec::new(sigma).unwrap();
        let [m2] = integrate(|w| [(w / sigma).powi(2) / (1.0 + (w / sigma).powi(2))], &pulse).unwrap();
        // (2/π) ∫ x²/(1+x²)³ dx = 1/4.
        assert!((m2 - 0.25).abs() < 1e-9);
    }

    #[test]
    fn narrow_pulse_recovers_monochromatic() {
        let p0 = EmitterParams::new(0.9, 0.05).unwrap();
        let p1 = EmitterParams::new(0.85, -0.02).unwrap();
        let pulse = PulseSpec::new(1e-4).unwrap();
        for protocol in Protocol::ALL {
            let f = cj_fidelity_pulse(protocol, &p0, &p1, &pulse).unwrap();
            let mono = cj_fidelity_closed_form(protocol, transmission(&p0), transmission(&p1));
            assert!((f - mono).abs() < 1e-6, "{protocol:?}: {f} vs {mono}");
        }
    }

    #[test]
    fn asymptote_substitutions() {
        let s = 0.01;
        assert!((cj_infidelity_asymptote(Protocol::OneClick, s, 1.0, 1.0) - 4e-4).abs() < 1e-15);
        assert!((cj_infidelity_asymptote(Protocol::TwoClick, s, 1.0, 1.0) - 4e-4).abs() < 1e-15);
        assert!((cj_infidelity_asymptote(Protocol::TwoClick, s, 1.0, 2.0) - 2.5e-4).abs() < 1e-15);
    }

    #[test]
    fn lossless_two_click_near_asymptote() {
        let ideal = EmitterParams::IDEAL;
        for sigma in [1.0 / 200.0, 1.0 / 100.0, 1.0 / 50.0] {
            let pulse = PulseSpec::new(sigma).unwrap();
            for protocol in Protocol::ALL {
                let r = pulse_report(protocol, &ideal, &ideal, &pulse).unwrap();
                let a = cj_infidelity_asymptote(protocol, sigma, 1.0, 1.0);
                assert!(
                    ((r.infidelity - a) / a).abs() < 0.1,
                    "{protocol:?} σ={sigma}: {}",
                    r.infidelity
                );
            }
        }
    }

    #[test]
    fn success_bounded_by_one() {
        let p = EmitterParams::new(0.8, 0.1).unwrap();
        let pulse = PulseSpec::new(0.05).unwrap();
        for protocol in Protocol::ALL {
            let r = pulse_report(protocol, &p, &p, &pulse).unwrap();
            assert!(r.success_prob <= 1.0 + 1e-9 && r.success_prob > 0.0);
        }
        let ideal = EmitterParams::IDEAL;
        let r = pulse_report(Protocol::OneClick, &ideal, &ideal, &pulse).unwrap();
        // Lossless emitters: every photon reaches a detector.
        assert!((r.success_prob - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wide_pulse_rejected() {
        let pulse = PulseSpec::new(1.5).unwrap();
        let p = EmitterParams::IDEAL;
        assert!(matches!(
            cj_fidelity_pulse(Protocol::OneClick, &p, &p, &pulse),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn quad_spec_limits() {
        let pulse = PulseSpec::new(0.01).unwrap();
        assert!(pulse
            .with_quad(QuadSpec {
                n_points: 32,
                ..QuadSpec::default()
            })
            .is_err());
        assert!(pulse
            .with_quad(QuadSpec {
                cutoff: 10.0,
                ..QuadSpec::default()
            })
            .is_err());
    }
}
