//! Exact small-register quantum states.
//!
//! Pure states and density matrices on one to five qubits. Qubit 0 is the
//! most significant bit of the basis index, so the ket `|ab⟩` has `a` on
//! qubit 0. States need not be normalized: a heralded branch carries its
//! probability as the squared norm (or trace).

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest supported register: four spins plus one dual-rail photon.
pub const MAX_QUBITS: usize = 5;
/// Tolerance for algebraic identities.
pub const EPS: f64 = 1e-12;
/// Floor for density-matrix eigenvalues.
pub const PSD_FLOOR: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

fn check_size(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(Error::InvalidState("register needs at least one qubit".into()));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::RegisterTooLarge(n_qubits));
    }
    Ok(())
}

fn check_qubit(qubit: usize, n_qubits: usize) -> Result<()> {
    if qubit >= n_qubits {
        Err(Error::QubitOutOfRange { qubit, n_qubits })
    } else {
        Ok(())
    }
}

#[inline]
fn bit(index: usize, qubit: usize, n_qubits: usize) -> usize {
    (index >> (n_qubits - 1 - qubit)) & 1
}

/// Embed a 2x2 operator acting on `target` into the full register.
fn embed_single(op: &Matrix2<C64>, target: usize, n_qubits: usize) -> DMatrix<C64> {
    let dim = 1 << n_qubits;
    let mask = 1 << (n_qubits - 1 - target);
    DMatrix::from_fn(dim, dim, |i, j| {
        if i & !mask != j & !mask {
            ZERO
        } else {
            op[(bit(i, target, n_qubits), bit(j, target, n_qubits))]
        }
    })
}

/// Embed a 4x4 operator acting on the ordered pair `(q0, q1)`; `q0` is the
/// more significant bit of the local index.
fn embed_two(op: &Matrix4<C64>, q0: usize, q1: usize, n_qubits: usize) -> DMatrix<C64> {
    let dim = 1 << n_qubits;
    let mask = (1 << (n_qubits - 1 - q0)) | (1 << (n_qubits - 1 - q1));
    let local = |k: usize| 2 * bit(k, q0, n_qubits) + bit(k, q1, n_qubits);
    DMatrix::from_fn(dim, dim, |i, j| {
        if i & !mask != j & !mask {
            ZERO
        } else {
            op[(local(i), local(j))]
        }
    })
}

fn check_pair(q0: usize, q1: usize, n_qubits: usize) -> Result<()> {
    check_qubit(q0, n_qubits)?;
    check_qubit(q1, n_qubits)?;
    if q0 == q1 {
        return Err(Error::InvalidParameter(format!(
            "two-qubit operation needs distinct qubits, got {q0} twice"
        )));
    }
    Ok(())
}

fn check_permutation(order: &[usize], n_qubits: usize) -> Result<()> {
    let mut seen = vec![false; n_qubits];
    if order.len() != n_qubits {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for {} qubits",
            order.len(),
            n_qubits
        )));
    }
    for &q in order {
        check_qubit(q, n_qubits)?;
        if std::mem::replace(&mut seen[q], true) {
            return Err(Error::InvalidParameter(format!("qubit {q} repeated in permutation")));
        }
    }
    Ok(())
}

/// Basis index after moving old qubit `order[k]` to position `k`.
fn permute_index(index: usize, order: &[usize], n_qubits: usize) -> usize {
    order
        .iter()
        .enumerate()
        .fold(0, |acc, (k, &q)| acc | (bit(index, q, n_qubits) << (n_qubits - 1 - k)))
}

/// Fixed single-qubit gates used by the protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    SigmaX,
    SigmaZ,
    Hadamard,
    /// Alice's purification rotation, |0⟩ → (|0⟩ − i|1⟩)/√2, |1⟩ → (−i|0⟩ + |1⟩)/√2.
    UA,
    /// Bob's purification rotation, |0⟩ → (|0⟩ + i|1⟩)/√2, |1⟩ → (i|0⟩ + |1⟩)/√2.
    UB,
    /// |0⟩ → (|0⟩ + |1⟩)/√2, |1⟩ → (−|0⟩ + |1⟩)/√2.
    RHalfPi,
}

impl Gate {
    pub const ALL: [Gate; 6] = [
        Gate::SigmaX,
        Gate::SigmaZ,
        Gate::Hadamard,
        Gate::UA,
        Gate::UB,
        Gate::RHalfPi,
    ];

    /// Column `k` is the image of `|k⟩`.
    pub fn matrix(self) -> Matrix2<C64> {
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            Gate::SigmaX => Matrix2::new(ZERO, ONE, ONE, ZERO),
            Gate::SigmaZ => Matrix2::new(ONE, ZERO, ZERO, -ONE),
            Gate::Hadamard => Matrix2::new(s, s, s, -s),
            Gate::UA => Matrix2::new(s, -I * s, -I * s, s),
            Gate::UB => Matrix2::new(s, I * s, I * s, s),
            Gate::RHalfPi => Matrix2::new(s, -s, s, s),
        }
    }
}

/// The four Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BellLabel {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    /// `(x, z)` Pauli bits: the state is `X^x Z^z` applied to the second
    /// qubit of |φ+⟩, up to sign.
    pub fn pauli_bits(self) -> (u8, u8) {
        match self {
            BellLabel::PhiPlus => (0, 0),
            BellLabel::PhiMinus => (0, 1),
            BellLabel::PsiPlus => (1, 0),
            BellLabel::PsiMinus => (1, 1),
        }
    }

    pub fn from_pauli_bits(x: u8, z: u8) -> BellLabel {
        match (x & 1, z & 1) {
            (0, 0) => BellLabel::PhiPlus,
            (0, 1) => BellLabel::PhiMinus,
            (1, 0) => BellLabel::PsiPlus,
            _ => BellLabel::PsiMinus,
        }
    }

    pub fn state(self) -> PureState {
        let s = FRAC_1_SQRT_2;
        let amps = match self {
            BellLabel::PhiPlus => [s, 0.0, 0.0, s],
            BellLabel::PhiMinus => [s, 0.0, 0.0, -s],
            BellLabel::PsiPlus => [0.0, s, s, 0.0],
            BellLabel::PsiMinus => [0.0, s, -s, 0.0],
        };
        PureState {
            n_qubits: 2,
            amps: amps.iter().map(|&a| C64::new(a, 0.0)).collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        }
    }
}

/// One branch of a projective single-qubit measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement<S> {
    pub outcome: u8,
    /// Unnormalized post-measurement state; its squared norm (trace) is `prob`.
    pub post: S,
    pub prob: f64,
}

/// State vector over `n_qubits`, possibly unnormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn new(n_qubits: usize, amps: Vec<C64>) -> Result<Self> {
        check_size(n_qubits)?;
        if amps.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for {} qubits",
                amps.len(),
                n_qubits
            )));
        }
        let state = PureState { n_qubits, amps };
        let norm = state.norm_sqr();
        if !norm.is_finite() || norm > 1.0 + EPS {
            return Err(Error::InvalidState(format!("squared norm {norm} exceeds 1")));
        }
        Ok(state)
    }

    pub(crate) fn from_raw(n_qubits: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        PureState { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_size(n_qubits)?;
        if index >= 1 << n_qubits {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Ok(PureState { n_qubits, amps })
    }

    /// Single-qubit state `a|0⟩ + b|1⟩`.
    pub fn qubit(a: C64, b: C64) -> Result<Self> {
        PureState::new(1, vec![a, b])
    }

    /// `(|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Self {
        let s = C64::new(FRAC_1_SQRT_2, 0.0);
        PureState::from_raw(1, vec![s, s])
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm <= f64::MIN_POSITIVE {
            return Err(Error::ZeroProbability("cannot normalize a zero vector".into()));
        }
        Ok(self.scaled(C64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: C64) -> Self {
        PureState {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// Sum of two states on the same register. The result may exceed unit norm
    /// only transiently; checked constructors reject such states.
    pub fn add(&self, other: &PureState) -> Result<Self> {
        self.same_register(other)?;
        Ok(PureState {
            n_qubits: self.n_qubits,
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a + b).collect(),
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.same_register(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    fn same_register(&self, other: &PureState) -> Result<()> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit vs {}-qubit state",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(())
    }

    /// Kronecker product; `self` supplies the most significant qubits.
    pub fn tensor(&self, other: &PureState) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n));
        }
        let mut amps = Vec::with_capacity(1 << n);
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { n_qubits: n, amps })
    }

    pub fn apply_gate(&self, gate: Gate, target: usize) -> Result<Self> {
        self.apply_single(&gate.matrix(), target)
    }

    /// Apply an arbitrary (not necessarily unitary) 2x2 operator.
    pub fn apply_single(&self, op: &Matrix2<C64>, target: usize) -> Result<Self> {
        check_qubit(target, self.n_qubits)?;
        Ok(self.apply_full(&embed_single(op, target, self.n_qubits)))
    }

    /// Apply an arbitrary 4x4 operator to the ordered qubit pair `(q0, q1)`.
    pub fn apply_two(&self, op: &Matrix4<C64>, q0: usize, q1: usize) -> Result<Self> {
        check_pair(q0, q1, self.n_qubits)?;
        Ok(self.apply_full(&embed_two(op, q0, q1, self.n_qubits)))
    }

    pub(crate) fn apply_full(&self, op: &DMatrix<C64>) -> Self {
        let v = DVector::from_column_slice(&self.amps);
        let out = op * v;
        PureState {
            n_qubits: self.n_qubits,
            amps: out.iter().copied().collect(),
        }
    }

    /// Unnormalized projection of `target` onto `|outcome⟩`.
    pub fn project_qubit(&self, target: usize, outcome: u8) -> Result<Self> {
        check_qubit(target, self.n_qubits)?;
        let n = self.n_qubits;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, &a)| if bit(k, target, n) == outcome as usize { a } else { ZERO })
            .collect();
        Ok(PureState { n_qubits: n, amps })
    }

    /// Both outcomes of a computational-basis measurement of `target`.
    pub fn measure_qubit(&self, target: usize) -> Result<Vec<Measurement<PureState>>> {
        (0..2u8)
            .map(|outcome| {
                let post = self.project_qubit(target, outcome)?;
                let prob = post.norm_sqr();
                Ok(Measurement { outcome, post, prob })
            })
            .collect()
    }

    /// Contract qubit `target` with `⟨outcome|`, removing it from the register.
    pub fn drop_qubit(&self, target: usize, outcome: u8) -> Result<Self> {
        check_qubit(target, self.n_qubits)?;
        if self.n_qubits == 1 {
            return Err(Error::InvalidState("cannot remove the only qubit".into()));
        }
        let n = self.n_qubits;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .filter(|(k, _)| bit(*k, target, n) == outcome as usize)
            .map(|(_, &a)| a)
            .collect();
        Ok(PureState { n_qubits: n - 1, amps })
    }

    /// Reorder qubits: position `k` of the result holds qubit `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_qubits;
        check_permutation(order, n)?;
        let mut amps = vec![ZERO; self.dim()];
        for (i, &a) in self.amps.iter().enumerate() {
            amps[permute_index(i, order, n)] = a;
        }
        Ok(PureState { n_qubits: n, amps })
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }

    /// `|⟨self|other⟩|` equals the product of norms, i.e. the states agree up
    /// to a global phase.
    pub fn equal_up_to_phase(&self, other: &PureState, tol: f64) -> bool {
        let Ok(overlap) = self.inner(other) else {
            return false;
        };
        if overlap.norm() <= f64::MIN_POSITIVE {
            return self.norm_sqr() < tol && other.norm_sqr() < tol;
        }
        let phase = overlap / overlap.norm();
        // other ≈ phase · self
        self.amps
            .iter()
            .zip(&other.amps)
            .all(|(a, b)| (a * phase - b).norm() < tol)
    }
}

/// Free-function form of [`PureState::tensor`].
pub fn tensor(a: &PureState, b: &PureState) -> Result<PureState> {
    a.tensor(b)
}

/// Density matrix over `n_qubits`, possibly with trace below one.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    elements: DMatrix<C64>,
}

impl DensityMatrix {
    /// Checked constructor: Hermitian, PSD and trace in `[0, 1]` within tolerance.
    pub fn new(n_qubits: usize, elements: DMatrix<C64>) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1 << n_qubits;
        if elements.nrows() != dim || elements.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for {} qubits",
                elements.nrows(),
                elements.ncols(),
                n_qubits
            )));
        }
        let rho = DensityMatrix { n_qubits, elements };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(n_qubits: usize, elements: DMatrix<C64>) -> Self {
        DensityMatrix { n_qubits, elements }
    }

    pub fn from_pure(state: &PureState) -> Self {
        let v = DVector::from_column_slice(&state.amps);
        DensityMatrix {
            n_qubits: state.n_qubits,
            elements: &v * v.adjoint(),
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1 << n_qubits;
        Ok(DensityMatrix {
            n_qubits,
            elements: DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        })
    }

    /// Zero matrix, the identity for [`DensityMatrix::add`].
    pub fn zeros(n_qubits: usize) -> Result<Self> {
        check_size(n_qubits)?;
        let dim = 1 << n_qubits;
        Ok(DensityMatrix {
            n_qubits,
            elements: DMatrix::zeros(dim, dim),
        })
    }

    /// Mixture `Σ w_k |ψ_k⟩⟨ψ_k|`.
    pub fn mixture(terms: &[(f64, PureState)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut rho = DensityMatrix::zeros(first.1.n_qubits)?;
        for (w, psi) in terms {
            rho = rho.add(&DensityMatrix::from_pure(psi).scaled(*w))?;
        }
        rho.validate()?;
        Ok(rho)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements.trace().re
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DensityMatrix {
            n_qubits: self.n_qubits,
            elements: &self.elements * C64::new(factor, 0.0),
        }
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= f64::MIN_POSITIVE {
            return Err(Error::ZeroProbability("cannot normalize a zero-trace matrix".into()));
        }
        Ok(self.scaled(1.0 / tr))
    }

    pub fn add(&self, other: &DensityMatrix) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit vs {}-qubit matrix",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            elements: &self.elements + &other.elements,
        })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> Result<Self> {
        let n = self.n_qubits + other.n_qubits;
        if n > MAX_QUBITS {
            return Err(Error::RegisterTooLarge(n));
        }
        Ok(DensityMatrix {
            n_qubits: n,
            elements: self.elements.kronecker(&other.elements),
        })
    }

    /// Reorder qubits: position `k` of the result holds qubit `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.n_qubits;
        check_permutation(order, n)?;
        let map: Vec<usize> = (0..self.dim()).map(|i| permute_index(i, order, n)).collect();
        let mut elements = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                elements[(map[i], map[j])] = self.elements[(i, j)];
            }
        }
        Ok(DensityMatrix { n_qubits: n, elements })
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        let diff = &self.elements - self.elements.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        // Symmetrize first so tiny anti-Hermitian noise cannot leak into the solver.
        let herm = (&self.elements + self.elements.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Hermitian to `EPS`, eigenvalues above `-PSD_FLOOR`, trace in `[0, 1 + EPS]`.
    pub fn validate(&self) -> Result<()> {
        let scale = self.trace().abs().max(1.0);
        let defect = self.max_hermitian_defect();
        if defect > EPS * scale {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = self.trace();
        if !(-EPS..=1.0 + EPS).contains(&tr) {
            return Err(Error::InvalidState(format!("trace {tr} outside [0, 1]")));
        }
        let min_ev = self.min_eigenvalue();
        if min_ev < -PSD_FLOOR {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev:e}")));
        }
        Ok(())
    }

    pub fn apply_gate(&self, gate: Gate, target: usize) -> Result<Self> {
        self.apply_single(&gate.matrix(), target)
    }

    /// `K ρ K†` for a 2x2 operator `K` on `target`.
    pub fn apply_single(&self, op: &Matrix2<C64>, target: usize) -> Result<Self> {
        check_qubit(target, self.n_qubits)?;
        Ok(self.conjugate(&embed_single(op, target, self.n_qubits)))
    }

    /// `K ρ K†` for a 4x4 operator `K` on the ordered pair `(q0, q1)`.
    pub fn apply_two(&self, op: &Matrix4<C64>, q0: usize, q1: usize) -> Result<Self> {
        check_pair(q0, q1, self.n_qubits)?;
        Ok(self.conjugate(&embed_two(op, q0, q1, self.n_qubits)))
    }

    /// `Σ_k K_k ρ K_k†` over a set of 4x4 Kraus operators on `(q0, q1)`.
    pub fn apply_kraus_two(&self, kraus: &[Matrix4<C64>], q0: usize, q1: usize) -> Result<Self> {
        check_pair(q0, q1, self.n_qubits)?;
        let dim = self.dim();
        let mut acc = DMatrix::zeros(dim, dim);
        for k in kraus {
            let full = embed_two(k, q0, q1, self.n_qubits);
            acc += &full * &self.elements * full.adjoint();
        }
        Ok(DensityMatrix {
            n_qubits: self.n_qubits,
            elements: acc,
        })
    }

    fn conjugate(&self, full: &DMatrix<C64>) -> Self {
        DensityMatrix {
            n_qubits: self.n_qubits,
            elements: full * &self.elements * full.adjoint(),
        }
    }

    /// Unnormalized projection of `target` onto `|outcome⟩`.
    pub fn project_qubit(&self, target: usize, outcome: u8) -> Result<Self> {
        check_qubit(target, self.n_qubits)?;
        let n = self.n_qubits;
        let keep = |k: usize| bit(k, target, n) == outcome as usize;
        let dim = self.dim();
        let elements = DMatrix::from_fn(dim, dim, |i, j| {
            if keep(i) && keep(j) {
                self.elements[(i, j)]
            } else {
                ZERO
            }
        });
        Ok(DensityMatrix { n_qubits: n, elements })
    }

    pub fn measure_qubit(&self, target: usize) -> Result<Vec<Measurement<DensityMatrix>>> {
        (0..2u8)
            .map(|outcome| {
                let post = self.project_qubit(target, outcome)?;
                let prob = post.trace();
                Ok(Measurement { outcome, post, prob })
            })
            .collect()
    }

    /// Reduced state on `keep`, in ascending qubit order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let n = self.n_qubits;
        let mut kept: Vec<usize> = keep.to_vec();
        kept.sort_unstable();
        kept.dedup();
        for &q in &kept {
            check_qubit(q, n)?;
        }
        if kept.len() == n {
            return Ok(self.clone());
        }
        let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();
        let compose = |k: usize, t: usize| -> usize {
            let mut idx = 0usize;
            for (pos, &q) in kept.iter().enumerate() {
                let b = (k >> (kept.len() - 1 - pos)) & 1;
                idx |= b << (n - 1 - q);
            }
            for (pos, &q) in traced.iter().enumerate() {
                let b = (t >> (traced.len() - 1 - pos)) & 1;
                idx |= b << (n - 1 - q);
            }
            idx
        };
        let dk = 1 << kept.len();
        let dt = 1 << traced.len();
        let elements = DMatrix::from_fn(dk, dk, |i, j| {
            (0..dt).map(|t| self.elements[(compose(i, t), compose(j, t))]).sum()
        });
        Ok(DensityMatrix {
            n_qubits: kept.len(),
            elements,
        })
    }

    /// `⟨ideal|ρ|ideal⟩`.
    pub fn fidelity(&self, ideal: &PureState) -> Result<f64> {
        if ideal.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit matrix vs {}-qubit ideal state",
                self.n_qubits, ideal.n_qubits
            )));
        }
        let v = DVector::from_column_slice(&ideal.amps);
        let value = (v.adjoint() * &self.elements * &v)[(0, 0)];
        Ok(value.re)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (&self.elements - &other.elements)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Free-function form of [`DensityMatrix::fidelity`]. Returns `⟨ideal|ρ|ideal⟩`,
/// which is `|⟨ideal|out⟩|²` for a pure `ρ`. The ideal state must be normalized.
pub fn fidelity(rho: &DensityMatrix, ideal: &PureState) -> Result<f64> {
    let norm = ideal.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!("ideal state has squared norm {norm}")));
    }
    rho.fidelity(ideal)
}

/// Free-function form of [`DensityMatrix::partial_trace`].
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    rho.partial_trace(keep)
}

/// Diagonal 4x4 operator.
pub fn diag4(d: [C64; 4]) -> Matrix4<C64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(d[0], d[1], d[2], d[3]))
}

/// `a ⊗ b` for single-qubit operators, `a` on the first qubit of the pair.
pub fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| a[(i >> 1, j >> 1)] * b[(i & 1, j & 1)])
}

/// Controlled-Z on an ordered pair.
pub fn cz_matrix() -> Matrix4<C64> {
    diag4([ONE, ONE, ONE, -ONE])
}

/// Projector onto the even-parity subspace span{|00⟩, |11⟩}.
pub fn even_projector() -> Matrix4<C64> {
    diag4([ONE, ZERO, ZERO, ONE])
}

/// Projector onto the odd-parity subspace span{|01⟩, |10⟩}.
pub fn odd_projector() -> Matrix4<C64> {
    diag4([ZERO, ONE, ONE, ZERO])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn tensor_of_basis_states() {
        let zero = PureState::basis(1, 0).unwrap();
        let one = PureState::basis(1, 1).unwrap();
        let s = zero.tensor(&one).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, ONE, ZERO, ZERO]);
    }

    #[test]
    fn tensor_plus_zero() {
        let s = PureState::plus().tensor(&PureState::basis(1, 0).unwrap()).unwrap();
        let h = FRAC_1_SQRT_2;
        let expected = [c(h), ZERO, c(h), ZERO];
        for (a, b) in s.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() < EPS);
        }
    }

    #[test]
    fn tensor_two_bell_pairs_is_choi_input() {
        let phi = BellLabel::PhiPlus.state();
        let s = phi.tensor(&phi).unwrap();
        // |φ+⟩₁₂|φ+⟩₃₄ = ½ Σ_{ab} |a a b b⟩
        for k in 0..16 {
            let a = (k >> 3) & 1;
            let a2 = (k >> 2) & 1;
            let b = (k >> 1) & 1;
            let b2 = k & 1;
            let expected = if a == a2 && b == b2 { 0.5 } else { 0.0 };
            assert!((s.amplitude(k) - c(expected)).norm() < EPS);
        }
    }

    #[test]
    fn register_too_large() {
        let four = PureState::basis(4, 0).unwrap();
        let two = PureState::basis(2, 0).unwrap();
        assert_eq!(four.tensor(&two), Err(Error::RegisterTooLarge(6)));
        assert!(matches!(PureState::basis(6, 0), Err(Error::RegisterTooLarge(6))));
    }

    #[test]
    fn sigma_x_flips() {
        let s = PureState::basis(1, 0).unwrap().apply_gate(Gate::SigmaX, 0).unwrap();
        assert_eq!(s, PureState::basis(1, 1).unwrap());
    }

    #[test]
    fn hadamard_is_involution() {
        let s = PureState::new(
            2,
            vec![c(0.5), C64::new(0.0, 0.5), c(-0.5), C64::new(0.3, 0.4)]
                .into_iter()
                .map(|a| a / 1.1)
                .collect(),
        )
        .unwrap();
        let back = s
            .apply_gate(Gate::Hadamard, 1)
            .unwrap()
            .apply_gate(Gate::Hadamard, 1)
            .unwrap();
        for (a, b) in s.amplitudes().iter().zip(back.amplitudes()) {
            assert!((a - b).norm() < EPS);
        }
    }

    #[test]
    fn gate_images_match_definitions() {
        let h = FRAC_1_SQRT_2;
        let cases = [
            (Gate::UA, [c(h), -I * h], [-I * h, c(h)]),
            (Gate::UB, [c(h), I * h], [I * h, c(h)]),
            (Gate::RHalfPi, [c(h), c(h)], [c(-h), c(h)]),
        ];
        for (gate, img0, img1) in cases {
            let m = gate.matrix();
            for r in 0..2 {
                assert!((m[(r, 0)] - img0[r]).norm() < EPS, "{gate:?}");
                assert!((m[(r, 1)] - img1[r]).norm() < EPS, "{gate:?}");
            }
        }
    }

    #[test]
    fn gates_are_unitary() {
        for gate in Gate::ALL {
            let m = gate.matrix();
            let prod = m.adjoint() * m;
            let defect = (prod - Matrix2::identity())
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(defect < EPS, "{gate:?} defect {defect}");
        }
    }

    #[test]
    fn ua_then_adjoint_is_identity() {
        let s = PureState::new(1, vec![c(0.6), C64::new(0.0, 0.8)]).unwrap();
        let m = Gate::UA.matrix();
        let back = s.apply_single(&m, 0).unwrap().apply_single(&m.adjoint(), 0).unwrap();
        assert!(s.equal_up_to_phase(&back, EPS));
        assert!((s.inner(&back).unwrap() - ONE).norm() < EPS);
    }

    #[test]
    fn target_out_of_range() {
        let s = PureState::basis(2, 0).unwrap();
        assert_eq!(
            s.apply_gate(Gate::SigmaX, 2),
            Err(Error::QubitOutOfRange { qubit: 2, n_qubits: 2 })
        );
    }

    #[test]
    fn partial_trace_of_bell_pair() {
        let rho = BellLabel::PhiPlus.state().to_density();
        let reduced = rho.partial_trace(&[0]).unwrap();
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(reduced.max_abs_diff(&mixed) < EPS);
    }

    #[test]
    fn partial_trace_keep_all_is_identity() {
        let rho = BellLabel::PsiMinus.state().to_density();
        assert_eq!(rho.partial_trace(&[0, 1]).unwrap(), rho);
    }

    #[test]
    fn partial_trace_of_product() {
        let rho = PureState::basis(2, 0).unwrap().to_density();
        let reduced = rho.partial_trace(&[0]).unwrap();
        let expected = PureState::basis(1, 0).unwrap().to_density();
        assert!(reduced.max_abs_diff(&expected) < EPS);
    }

    #[test]
    fn partial_trace_empty_keep() {
        let rho = PureState::basis(2, 0).unwrap().to_density();
        assert_eq!(rho.partial_trace(&[]), Err(Error::EmptyKeepSet));
    }

    #[test]
    fn partial_trace_keeps_order_of_remaining_qubits() {
        // |0⟩|1⟩|+⟩: keeping qubits 0 and 2 must give |0⟩|+⟩.
        let s = PureState::basis(2, 1).unwrap().tensor(&PureState::plus()).unwrap();
        let reduced = s.to_density().partial_trace(&[2, 0]).unwrap();
        let expected = PureState::basis(1, 0).unwrap().tensor(&PureState::plus()).unwrap();
        assert!(reduced.max_abs_diff(&expected.to_density()) < EPS);
    }

    #[test]
    fn measure_plus() {
        let branches = PureState::plus().measure_qubit(0).unwrap();
        assert_eq!(branches.len(), 2);
        for (k, m) in branches.iter().enumerate() {
            assert_eq!(m.outcome as usize, k);
            assert!((m.prob - 0.5).abs() < EPS);
            assert!((m.post.amplitude(k) - c(FRAC_1_SQRT_2)).norm() < EPS);
        }
    }

    #[test]
    fn measure_bell_first_qubit() {
        let branches = BellLabel::PhiPlus.state().measure_qubit(0).unwrap();
        let zero = &branches[0];
        assert!((zero.prob - 0.5).abs() < EPS);
        assert!((zero.post.amplitude(0) - c(FRAC_1_SQRT_2)).norm() < EPS);
        assert!(zero.post.amplitude(3).norm() < EPS);
    }

    #[test]
    fn measure_one_is_deterministic() {
        let branches = PureState::basis(1, 1).unwrap().measure_qubit(0).unwrap();
        assert_eq!(branches[0].prob, 0.0);
        assert_eq!(branches[1].prob, 1.0);
    }

    #[test]
    fn bell_fidelities() {
        let phi = BellLabel::PhiPlus.state();
        assert!((fidelity(&phi.to_density(), &phi).unwrap() - 1.0).abs() < EPS);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((fidelity(&mixed, &phi).unwrap() - 0.25).abs() < EPS);
        let minus = BellLabel::PhiMinus.state().to_density();
        assert!(fidelity(&minus, &phi).unwrap().abs() < EPS);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        let rho = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(matches!(
            fidelity(&rho, &BellLabel::PhiPlus.state()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rejects_overnormalized_state() {
        assert!(PureState::new(1, vec![ONE, ONE]).is_err());
        assert!(PureState::new(1, vec![ONE]).is_err());
    }

    #[test]
    fn density_validation_rejects_non_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.2), ZERO, ZERO, c(-0.2)]);
        assert!(DensityMatrix::new(1, m).is_err());
    }

    #[test]
    fn drop_qubit_contracts() {
        let s = BellLabel::PhiPlus.state().drop_qubit(0, 1).unwrap();
        assert!((s.amplitude(1) - c(FRAC_1_SQRT_2)).norm() < EPS);
        assert_eq!(s.n_qubits(), 1);
    }

    #[test]
    fn permutation_moves_qubits() {
        // |0⟩|1⟩|+⟩ reordered to (2, 0, 1) is |+⟩|0⟩|1⟩.
        let s = PureState::basis(2, 1).unwrap().tensor(&PureState::plus()).unwrap();
        let p = s.permuted(&[2, 0, 1]).unwrap();
        let expected = PureState::plus().tensor(&PureState::basis(2, 1).unwrap()).unwrap();
        assert!(p.equal_up_to_phase(&expected, EPS));
        let rho = s.to_density().permuted(&[2, 0, 1]).unwrap();
        assert!(rho.max_abs_diff(&expected.to_density()) < EPS);
        assert!(s.permuted(&[0, 0, 1]).is_err());
    }

    #[test]
    fn two_qubit_op_respects_pair_order() {
        // CNOT with control q0 = 2, target q1 = 0 on |001⟩ gives |101⟩.
        let cnot = Matrix4::new(
            ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ONE, ZERO,
        );
        let s = PureState::basis(3, 0b001).unwrap().apply_two(&cnot, 2, 0).unwrap();
        assert_eq!(s, PureState::basis(3, 0b101).unwrap());
    }
}
