//! Stators: hybrid state-operators `S = Σ c |bits⟩ ⊗ W` where `|bits⟩` lives on
//! control qubits and `W` is a word over `{I, σ_n}` acting on the targets.
//!
//! Terms are kept in canonical order (bitstring, then word) and merged on
//! insertion. Coefficients below `1e-12` in modulus are pruned.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{bits_to_index, index_to_bits, rotation, Basis, Mat2, PauliAxis, QuantumState};
use crate::{ALGEBRA_TOL, PIPELINE_TOL};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Exponents of `σ_{n_j}` per target: 0 is the identity, 1 is `σ_{n_j}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OperatorWord(pub Vec<u8>);

impl OperatorWord {
    pub fn identity(len: usize) -> Self {
        OperatorWord(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Dense matrix of `⊗_j σ_{n_j}^{w_j}`.
    pub fn matrix(&self, axes: &[PauliAxis]) -> DMatrix<C64> {
        let factors: Vec<Mat2> = self
            .0
            .iter()
            .zip(axes)
            .map(|(&w, a)| if w == 0 { Mat2::identity() } else { a.matrix() })
            .collect();
        kron_all(&factors)
    }
}

impl fmt::Display for OperatorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|&w| if w == 0 { "I" } else { "σ_n" }).collect();
        write!(f, "{}", parts.join("·"))
    }
}

/// Kronecker product of 2×2 factors, first factor most significant.
pub fn kron_all(factors: &[Mat2]) -> DMatrix<C64> {
    let mut out = DMatrix::from_element(1, 1, ONE);
    for m in factors {
        let d = out.nrows();
        out = DMatrix::from_fn(2 * d, 2 * d, |r, c| out[(r / 2, c / 2)] * m.0[r % 2][c % 2]);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stator {
    control_labels: Vec<String>,
    target_labels: Vec<String>,
    target_axes: Vec<PauliAxis>,
    terms: BTreeMap<(Vec<u8>, OperatorWord), C64>,
}

impl Stator {
    /// Empty stator over the given registers.
    pub fn new<S: Into<String>, T: Into<String>>(
        control_labels: Vec<S>,
        target_labels: Vec<T>,
        target_axes: Vec<PauliAxis>,
    ) -> Result<Self> {
        let target_labels: Vec<String> = target_labels.into_iter().map(Into::into).collect();
        if target_labels.len() != target_axes.len() {
            return Err(Error::ArityMismatch {
                expected: target_labels.len(),
                got: target_axes.len(),
            });
        }
        Ok(Stator {
            control_labels: control_labels.into_iter().map(Into::into).collect(),
            target_labels,
            target_axes,
            terms: BTreeMap::new(),
        })
    }

    /// `Σ_x ψ(x) |x⟩ ⊗ I` for a state on the control qubits.
    pub fn from_control_state<T: Into<String>>(
        state: &QuantumState,
        target_labels: Vec<T>,
        target_axes: Vec<PauliAxis>,
    ) -> Result<Self> {
        let mut s = Stator::new(state.labels().to_vec(), target_labels, target_axes)?;
        let n = state.num_qubits();
        let t = s.target_labels.len();
        for (i, &a) in state.amplitudes().iter().enumerate() {
            s.add_term(index_to_bits(i, n), OperatorWord::identity(t), a)?;
        }
        Ok(s)
    }

    pub fn control_labels(&self) -> &[String] {
        &self.control_labels
    }

    pub fn target_labels(&self) -> &[String] {
        &self.target_labels
    }

    pub fn target_axes(&self) -> &[PauliAxis] {
        &self.target_axes
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&[u8], &OperatorWord, C64)> {
        self.terms.iter().map(|((b, w), &c)| (b.as_slice(), w, c))
    }

    pub fn coefficient(&self, bits: &[u8], word: &OperatorWord) -> C64 {
        self.terms
            .get(&(bits.to_vec(), word.clone()))
            .copied()
            .unwrap_or(ZERO)
    }

    /// Adds `coeff · |bits⟩ ⊗ word`, merging with an existing term.
    pub fn add_term(&mut self, bits: Vec<u8>, word: OperatorWord, coeff: C64) -> Result<()> {
        if bits.len() != self.control_labels.len() {
            return Err(Error::ArityMismatch {
                expected: self.control_labels.len(),
                got: bits.len(),
            });
        }
        if word.len() != self.target_labels.len() {
            return Err(Error::ArityMismatch {
                expected: self.target_labels.len(),
                got: word.len(),
            });
        }
        if !coeff.re.is_finite() || !coeff.im.is_finite() {
            return Err(Error::Parse(format!("non-finite coefficient {coeff}")));
        }
        let key = (bits, word);
        let merged = self.terms.get(&key).copied().unwrap_or(ZERO) + coeff;
        if merged.norm() <= ALGEBRA_TOL {
            self.terms.remove(&key);
        } else {
            self.terms.insert(key, merged);
        }
        Ok(())
    }

    fn with_terms(&self, control_labels: Vec<String>) -> Stator {
        Stator {
            control_labels,
            target_labels: self.target_labels.clone(),
            target_axes: self.target_axes.clone(),
            terms: BTreeMap::new(),
        }
    }

    fn control_position(&self, qubit: &str) -> Result<usize> {
        self.control_labels
            .iter()
            .position(|l| l == qubit)
            .ok_or_else(|| Error::UnknownQubit(qubit.to_string()))
    }

    fn target_position(&self, target: &str) -> Result<usize> {
        self.target_labels
            .iter()
            .position(|l| l == target)
            .ok_or_else(|| Error::UnknownQubit(target.to_string()))
    }

    /// Applies a 2×2 matrix to one control qubit.
    pub fn apply_control_unitary(&self, qubit: &str, matrix: &Mat2) -> Result<Stator> {
        let p = self.control_position(qubit)?;
        let mut out = self.with_terms(self.control_labels.clone());
        for ((bits, word), &c) in &self.terms {
            let b = bits[p] as usize;
            for (nb, row) in matrix.0.iter().enumerate() {
                let coeff = row[b] * c;
                if coeff.norm() > 0.0 {
                    let mut nbits = bits.clone();
                    nbits[p] = nb as u8;
                    out.add_term(nbits, word.clone(), coeff)?;
                }
            }
        }
        Ok(out)
    }

    /// Contracts `⟨outcome|` of `basis` into a control qubit and removes it.
    /// No renormalization is applied.
    pub fn project_control(&self, qubit: &str, basis: Basis, outcome: u8) -> Result<Stator> {
        let p = self.control_position(qubit)?;
        let v = basis.vector(outcome);
        let mut labels = self.control_labels.clone();
        labels.remove(p);
        let mut out = self.with_terms(labels);
        for ((bits, word), &c) in &self.terms {
            let coeff = v[bits[p] as usize].conj() * c;
            let mut nbits = bits.clone();
            nbits.remove(p);
            out.add_term(nbits, word.clone(), coeff)?;
        }
        if out.terms.is_empty() {
            return Err(Error::AnnihilatedStator);
        }
        Ok(out)
    }

    /// Conditioned on `control` being `|1⟩`, multiplies `σ_{n}` of `target`
    /// onto the operator word (`|0⟩⟨0|⊗I + |1⟩⟨1|⊗σ_n` acting on the target).
    pub fn apply_controlled_sigma(&self, control: &str, target: &str) -> Result<Stator> {
        let p = self.control_position(control)?;
        let j = self.target_position(target)?;
        let mut out = self.with_terms(self.control_labels.clone());
        for ((bits, word), &c) in &self.terms {
            let mut w = word.clone();
            if bits[p] == 1 {
                w.0[j] ^= 1;
            }
            out.add_term(bits.clone(), w, c)?;
        }
        Ok(out)
    }

    /// Left-multiplies `factor · σ_n` on one target.
    pub fn apply_target_sigma(&self, target: &str, factor: C64) -> Result<Stator> {
        let j = self.target_position(target)?;
        let mut out = self.with_terms(self.control_labels.clone());
        for ((bits, word), &c) in &self.terms {
            let mut w = word.clone();
            w.0[j] ^= 1;
            out.add_term(bits.clone(), w, c * factor)?;
        }
        Ok(out)
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(&self, s: C64) -> Stator {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out
    }

    /// `Tr(S†S)`. Words are orthogonal under the trace inner product, each
    /// with norm `2^t`.
    pub fn trace_norm_sqr(&self) -> f64 {
        let dim = (1u64 << self.target_labels.len()) as f64;
        dim * self.terms.values().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Rescales so that `Tr(S†S) = 1`.
    pub fn normalized(&self) -> Result<Stator> {
        let t = self.trace_norm_sqr();
        if self.terms.is_empty() || t <= 0.0 {
            return Err(Error::ZeroStator);
        }
        Ok(self.scaled(C64::new(1.0 / t.sqrt(), 0.0)))
    }

    /// The operator as a `(2^c·2^t) × 2^t` matrix, control bits most
    /// significant in the row index.
    pub fn as_matrix(&self) -> DMatrix<C64> {
        let dt = 1usize << self.target_labels.len();
        let dc = 1usize << self.control_labels.len();
        let mut m = DMatrix::from_element(dc * dt, dt, ZERO);
        for ((bits, word), &c) in &self.terms {
            let row0 = bits_to_index(bits) * dt;
            let w = word.matrix(&self.target_axes);
            for r in 0..dt {
                for col in 0..dt {
                    m[(row0 + r, col)] += c * w[(r, col)];
                }
            }
        }
        m
    }

    /// Applies the stator to a target input, giving a joint state ordered
    /// controls then targets. The result is normalized.
    pub fn apply_to(&self, targets: &QuantumState) -> Result<QuantumState> {
        let input = targets.reordered(&self.target_labels)?;
        let v = DMatrix::from_column_slice(input.amplitudes().len(), 1, input.amplitudes());
        let out = self.as_matrix() * v;
        let labels: Vec<String> = self
            .control_labels
            .iter()
            .chain(&self.target_labels)
            .cloned()
            .collect();
        QuantumState::normalized(labels, out.iter().copied().collect())
    }

    /// Smallest `max_entry |other − λ·self|` over complex `λ`, relative to the
    /// largest coefficient of `other`, after checking the registers match.
    pub fn scalar_mismatch(&self, other: &Stator) -> f64 {
        if self.control_labels != other.control_labels || self.target_labels != other.target_labels {
            return f64::INFINITY;
        }
        let keys: std::collections::BTreeSet<_> =
            self.terms.keys().chain(other.terms.keys()).collect();
        let a: Vec<C64> = keys.iter().map(|k| self.terms.get(*k).copied().unwrap_or(ZERO)).collect();
        let b: Vec<C64> = keys.iter().map(|k| other.terms.get(*k).copied().unwrap_or(ZERO)).collect();
        let aa: f64 = a.iter().map(|x| x.norm_sqr()).sum();
        let scale = b.iter().map(|x| x.norm()).fold(0.0, f64::max);
        if aa == 0.0 || scale == 0.0 {
            return if aa == 0.0 && scale == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let lambda: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<C64>() / aa;
        a.iter()
            .zip(&b)
            .map(|(x, y)| (y - lambda * x).norm())
            .fold(0.0, f64::max)
            / scale
    }

    /// Same registers and same terms up to one global complex factor.
    pub fn equivalent_up_to_scalar(&self, other: &Stator, tol: f64) -> bool {
        self.scalar_mismatch(other) <= tol
    }

    /// `‖(⊗_k e^{iα_k σ_x})·S − S·(⊗_j e^{iα_j σ_{n_j}})‖_max`, pairing control
    /// `k` with target `k`.
    pub fn eigenoperator_residual(&self, alphas: &[f64]) -> Result<f64> {
        let c = self.control_labels.len();
        let t = self.target_labels.len();
        if c != t || alphas.len() != c {
            return Err(Error::ArityMismatch {
                expected: c,
                got: if c != t { t } else { alphas.len() },
            });
        }
        let s = self.as_matrix();
        let control_rot: Vec<Mat2> = alphas.iter().map(|&a| rotation(&PauliAxis::X, a)).collect();
        let mut left_factors = control_rot;
        left_factors.extend(std::iter::repeat_n(Mat2::identity(), t));
        let lhs = kron_all(&left_factors) * &s;
        let target_rot: Vec<Mat2> = alphas
            .iter()
            .zip(&self.target_axes)
            .map(|(&a, axis)| rotation(axis, a))
            .collect();
        let rhs = &s * kron_all(&target_rot);
        Ok((lhs - rhs).iter().map(|x| x.norm()).fold(0.0, f64::max))
    }

    pub fn to_export(&self) -> StatorExport {
        StatorExport {
            control_labels: self.control_labels.clone(),
            target_labels: self.target_labels.clone(),
            target_axes: self.target_axes.clone(),
            terms: self
                .terms
                .iter()
                .map(|((b, w), c)| StatorTermExport {
                    bits: b.iter().map(|x| char::from(b'0' + x)).collect(),
                    word: w.0.clone(),
                    coeff: [c.re, c.im],
                })
                .collect(),
        }
    }
}

/// JSON term list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatorExport {
    pub control_labels: Vec<String>,
    pub target_labels: Vec<String>,
    pub target_axes: Vec<PauliAxis>,
    pub terms: Vec<StatorTermExport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatorTermExport {
    pub bits: String,
    pub word: Vec<u8>,
    pub coeff: [f64; 2],
}

fn fmt_coeff(c: C64) -> String {
    if c.im.abs() < 1e-12 {
        format!("{:+.6}", c.re)
    } else if c.re.abs() < 1e-12 {
        format!("{:+.6}i", c.im)
    } else {
        format!("+({:.6}{:+.6}i)", c.re, c.im)
    }
}

impl fmt::Display for Stator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for ((bits, word), &c) in &self.terms {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            let b: String = bits.iter().map(|x| char::from(b'0' + x)).collect();
            write!(f, "{}|{b}⟩⊗{word}", fmt_coeff(c))?;
        }
        Ok(())
    }
}

/// One run of a pipeline: the target input it was fed and the resulting joint
/// state on controls and targets.
#[derive(Clone, Debug)]
pub struct ProbeRun {
    pub input: QuantumState,
    pub joint: QuantumState,
}

/// Product target inputs `|0…0⟩`, `|+…+⟩` and `|+i…+i⟩`. Each axis Pauli has
/// at most one of the three single-qubit probes as an eigenvector.
pub fn default_probes<S: AsRef<str>>(target_labels: &[S]) -> Vec<QuantumState> {
    let labels: Vec<String> = target_labels.iter().map(|l| l.as_ref().to_string()).collect();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let single = [
        [ONE, ZERO],
        [C64::new(h, 0.0), C64::new(h, 0.0)],
        [C64::new(h, 0.0), C64::new(0.0, h)],
    ];
    single
        .iter()
        .map(|f| {
            QuantumState::product(labels.clone(), &vec![*f; labels.len()])
                .expect("probe factors are normalized")
        })
        .collect()
}

/// Recovers the stator `S` with `joint_r = S|input_r⟩` for every run.
///
/// Coefficients are the least-squares solution over the stacked probe runs;
/// the fit must reproduce every joint state to within `1e-10`.
pub fn stator_from_states<S: AsRef<str>, T: AsRef<str>>(
    runs: &[ProbeRun],
    controls: &[S],
    targets: &[T],
    axes: &[PauliAxis],
) -> Result<Stator> {
    let controls: Vec<String> = controls.iter().map(|l| l.as_ref().to_string()).collect();
    let targets: Vec<String> = targets.iter().map(|l| l.as_ref().to_string()).collect();
    if targets.len() != axes.len() {
        return Err(Error::ArityMismatch {
            expected: targets.len(),
            got: axes.len(),
        });
    }
    if runs.is_empty() {
        return Err(Error::UnderdeterminedStator);
    }
    let t = targets.len();
    let dt = 1usize << t;
    let dc = 1usize << controls.len();
    let order: Vec<String> = controls.iter().chain(&targets).cloned().collect();
    let words: Vec<OperatorWord> = (0..dt).map(|w| OperatorWord(index_to_bits(w, t))).collect();

    let rows = runs.len() * dt;
    let mut a = DMatrix::from_element(rows, dt, ZERO);
    let mut y = DMatrix::from_element(rows, dc, ZERO);
    for (r, run) in runs.iter().enumerate() {
        let input = run.input.reordered(&targets)?;
        for (wi, word) in words.iter().enumerate() {
            let mut v = input.clone();
            for (j, &bit) in word.0.iter().enumerate() {
                if bit == 1 {
                    v.apply_1q(&axes[j].matrix(), &targets[j])?;
                }
            }
            for (k, amp) in v.amplitudes().iter().enumerate() {
                a[(r * dt + k, wi)] = *amp;
            }
        }
        let joint = run.joint.reordered(&order)?;
        for b in 0..dc {
            for k in 0..dt {
                y[(r * dt + k, b)] = joint.amplitudes()[b * dt + k];
            }
        }
    }

    let svd = a.clone().svd(true, true);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if smin < 1e-8 {
        return Err(Error::UnderdeterminedStator);
    }
    let coeffs = svd
        .solve(&y, 1e-14)
        .map_err(|e| Error::Parse(format!("least squares failed: {e}")))?;
    let residual = (&a * &coeffs - &y).iter().map(|x| x.norm()).fold(0.0, f64::max);
    if residual > PIPELINE_TOL {
        return Err(Error::NotStatorForm(residual));
    }

    let mut s = Stator::new(controls.clone(), targets, axes.to_vec())?;
    let nc = controls.len();
    for b in 0..dc {
        for (wi, word) in words.iter().enumerate() {
            let c = coeffs[(wi, b)];
            if c.norm() > ALGEBRA_TOL {
                s.add_term(index_to_bits(b, nc), word.clone(), c)?;
            }
        }
    }
    Ok(s)
}
