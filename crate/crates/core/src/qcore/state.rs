//! Dense statevector over named qubits.
//!
//! The label at position 0 is the most significant bit of the amplitude index,
//! so `|q_0 q_1 … q_{n-1}⟩` has index `Σ q_p 2^{n-1-p}`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gates::Mat2;
use crate::error::{Error, Result};
use crate::{ALGEBRA_TOL, PIPELINE_TOL};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Projective single-qubit measurement basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Outcomes `|0⟩`, `|1⟩`.
    Z,
    /// Outcomes `|+⟩`, `|−⟩`.
    X,
}

impl Basis {
    /// The basis vector selected by `outcome` (0 or 1).
    pub fn vector(self, outcome: u8) -> [C64; 2] {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        match (self, outcome) {
            (Basis::Z, 0) => [ONE, ZERO],
            (Basis::Z, _) => [ZERO, ONE],
            (Basis::X, 0) => [h, h],
            (Basis::X, _) => [h, -h],
        }
    }

    pub fn outcome_ket(self, outcome: u8) -> &'static str {
        match (self, outcome) {
            (Basis::Z, 0) => "|0⟩",
            (Basis::Z, _) => "|1⟩",
            (Basis::X, 0) => "|+⟩",
            (Basis::X, _) => "|−⟩",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub qubit: String,
    pub basis: Basis,
    pub outcome: u8,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    labels: Vec<String>,
    amplitudes: Vec<C64>,
}

impl QuantumState {
    /// Builds a state from explicit amplitudes, which must already be
    /// normalized to within `1e-10`.
    pub fn new<S: Into<String>>(labels: Vec<S>, amplitudes: Vec<C64>) -> Result<Self> {
        let state = Self::unchecked(labels, amplitudes)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > PIPELINE_TOL {
            return Err(Error::Unnormalized(norm));
        }
        Ok(state)
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized<S: Into<String>>(labels: Vec<S>, amplitudes: Vec<C64>) -> Result<Self> {
        let mut state = Self::unchecked(labels, amplitudes)?;
        let norm = state.norm_sqr();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::Unnormalized(norm));
        }
        state.scale(1.0 / norm.sqrt());
        Ok(state)
    }

    fn unchecked<S: Into<String>>(labels: Vec<S>, amplitudes: Vec<C64>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::DuplicateQubit(l.clone()));
            }
        }
        let dim = 1usize << labels.len();
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch(dim, amplitudes.len()));
        }
        Ok(QuantumState { labels, amplitudes })
    }

    /// Computational basis state `|bits⟩`.
    pub fn basis_state<S: Into<String>>(labels: Vec<S>, bits: &[u8]) -> Result<Self> {
        let n = labels.len();
        if bits.len() != n {
            return Err(Error::ArityMismatch {
                expected: n,
                got: bits.len(),
            });
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[bits_to_index(bits)] = ONE;
        Self::new(labels, amps)
    }

    pub fn zeros<S: Into<String>>(labels: Vec<S>) -> Self {
        let n = labels.len();
        Self::basis_state(labels, &vec![0; n]).expect("valid by construction")
    }

    /// `|+⟩^{⊗n}`.
    pub fn plus<S: Into<String>>(labels: Vec<S>) -> Self {
        let n = labels.len();
        let amp = C64::new((0.5f64).powf(n as f64 / 2.0), 0.0);
        Self::unchecked(labels, vec![amp; 1 << n]).expect("valid by construction")
    }

    /// Product of single-qubit states, one per label, each normalized here.
    pub fn product<S: Into<String>>(labels: Vec<S>, factors: &[[C64; 2]]) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if factors.len() != labels.len() {
            return Err(Error::ArityMismatch {
                expected: labels.len(),
                got: factors.len(),
            });
        }
        let mut amps = vec![ONE];
        for f in factors {
            let norm = (f[0].norm_sqr() + f[1].norm_sqr()).sqrt();
            if norm <= 0.0 || !norm.is_finite() {
                return Err(Error::Unnormalized(norm * norm));
            }
            let mut next = Vec::with_capacity(amps.len() * 2);
            for a in &amps {
                next.push(*a * f[0] / norm);
                next.push(*a * f[1] / norm);
            }
            amps = next;
        }
        Self::new(labels, amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, bits: &[u8]) -> C64 {
        self.amplitudes[bits_to_index(bits)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn scale(&mut self, s: f64) {
        for a in &mut self.amplitudes {
            *a *= s;
        }
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownQubit(label.to_string()))
    }

    fn bit_mask(&self, label: &str) -> Result<usize> {
        let p = self.position(label)?;
        Ok(1 << (self.num_qubits() - 1 - p))
    }

    /// Appends the qubits of `other` after those of `self`.
    pub fn tensor(&self, other: &QuantumState) -> Result<QuantumState> {
        for l in &other.labels {
            if self.labels.contains(l) {
                return Err(Error::DuplicateQubit(l.clone()));
            }
        }
        let mut amps = Vec::with_capacity(self.amplitudes.len() * other.amplitudes.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(a * b);
            }
        }
        let labels = self.labels.iter().chain(&other.labels).cloned().collect();
        Ok(QuantumState {
            labels,
            amplitudes: amps,
        })
    }

    /// Applies a single-qubit unitary to `qubit`.
    pub fn apply_1q(&mut self, matrix: &Mat2, qubit: &str) -> Result<()> {
        let defect = matrix.unitarity_defect();
        if defect > PIPELINE_TOL {
            return Err(Error::NonUnitary(defect));
        }
        let mask = self.bit_mask(qubit)?;
        let m = &matrix.0;
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    pub fn apply_cz(&mut self, q1: &str, q2: &str) -> Result<()> {
        let (m1, m2) = self.distinct_masks(q1, q2)?;
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if i & m1 != 0 && i & m2 != 0 {
                *a = -*a;
            }
        }
        Ok(())
    }

    /// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ matrix` on `(control, target)`.
    pub fn apply_controlled(&mut self, control: &str, target: &str, matrix: &Mat2) -> Result<()> {
        let defect = matrix.unitarity_defect();
        if defect > PIPELINE_TOL {
            return Err(Error::NonUnitary(defect));
        }
        let (mc, mt) = self.distinct_masks(control, target)?;
        let m = &matrix.0;
        for i in 0..self.amplitudes.len() {
            if i & mc != 0 && i & mt == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mt];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mt] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    fn distinct_masks(&self, q1: &str, q2: &str) -> Result<(usize, usize)> {
        if q1 == q2 {
            return Err(Error::DuplicateQubit(q1.to_string()));
        }
        Ok((self.bit_mask(q1)?, self.bit_mask(q2)?))
    }

    /// Contracts `⟨v|` into `qubit` and drops it. Returns the squared norm of
    /// the contracted vector (the outcome probability for a unit `v`) and the
    /// renormalized remainder.
    pub fn project_out(&self, qubit: &str, v: [C64; 2]) -> Result<(f64, QuantumState)> {
        let p = self.position(qubit)?;
        let n = self.num_qubits();
        let shift = n - 1 - p;
        let low = (1usize << shift) - 1;
        let mut amps = vec![ZERO; 1 << (n - 1)];
        let (c0, c1) = (v[0].conj(), v[1].conj());
        for (j, out) in amps.iter_mut().enumerate() {
            let hi = (j & !low) << 1;
            let i0 = hi | (j & low);
            let i1 = i0 | (1 << shift);
            *out = c0 * self.amplitudes[i0] + c1 * self.amplitudes[i1];
        }
        let weight: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let mut labels = self.labels.clone();
        labels.remove(p);
        let mut rest = QuantumState {
            labels,
            amplitudes: amps,
        };
        if weight > 0.0 {
            rest.scale(1.0 / weight.sqrt());
        }
        Ok((weight, rest))
    }

    /// Multiplies every amplitude by `s`, leaving the norm unchecked.
    pub(crate) fn rescaled(mut self, s: f64) -> Self {
        self.scale(s);
        self
    }

    pub fn outcome_probabilities(&self, qubit: &str, basis: Basis) -> Result<[f64; 2]> {
        let p0 = self.project_out(qubit, basis.vector(0))?.0;
        let p1 = self.project_out(qubit, basis.vector(1))?.0;
        Ok([p0, p1])
    }

    /// Measures `qubit`, keeps it in the register in the observed basis state,
    /// and renormalizes. A forced outcome must have probability above `1e-12`;
    /// otherwise the outcome is drawn from `rng`.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        qubit: &str,
        basis: Basis,
        forced: Option<u8>,
        rng: &mut R,
    ) -> Result<MeasurementRecord> {
        let (record, _) = self.measure_and_discard(qubit, basis, forced, rng)?;
        let keep = basis.vector(record.outcome);
        let mask = self.bit_mask(qubit)?;
        let proj = Mat2::projector(keep);
        let m = &proj.0;
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i | mask];
                self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amplitudes[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        self.scale(1.0 / record.probability.sqrt());
        Ok(record)
    }

    /// Like [`measure`](Self::measure) but removes the measured qubit from the
    /// returned post-measurement state.
    pub fn measure_and_discard<R: Rng + ?Sized>(
        &self,
        qubit: &str,
        basis: Basis,
        forced: Option<u8>,
        rng: &mut R,
    ) -> Result<(MeasurementRecord, QuantumState)> {
        let outcome = match forced {
            Some(o) => o.min(1),
            None => {
                let [p0, _] = self.outcome_probabilities(qubit, basis)?;
                u8::from(rng.random::<f64>() >= p0)
            }
        };
        self.discard_with_outcome(qubit, basis, outcome)
    }

    /// Projects `qubit` onto the given outcome and removes it.
    pub fn discard_with_outcome(
        &self,
        qubit: &str,
        basis: Basis,
        outcome: u8,
    ) -> Result<(MeasurementRecord, QuantumState)> {
        let (probability, rest) = self.project_out(qubit, basis.vector(outcome))?;
        if probability <= ALGEBRA_TOL {
            return Err(Error::ZeroProbability {
                qubit: qubit.to_string(),
                outcome,
                probability,
            });
        }
        let record = MeasurementRecord {
            qubit: qubit.to_string(),
            basis,
            outcome,
            probability,
        };
        Ok((record, rest))
    }

    /// `⟨self|other⟩`; labels must agree in order.
    pub fn inner(&self, other: &QuantumState) -> Result<C64> {
        if self.amplitudes.len() != other.amplitudes.len() {
            return Err(Error::DimensionMismatch(
                self.amplitudes.len(),
                other.amplitudes.len(),
            ));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Reorders qubits to match `order`, which must be a permutation of the
    /// current labels.
    pub fn reordered<S: AsRef<str>>(&self, order: &[S]) -> Result<QuantumState> {
        let n = self.num_qubits();
        if order.len() != n {
            return Err(Error::ArityMismatch {
                expected: n,
                got: order.len(),
            });
        }
        let source: Vec<usize> = order
            .iter()
            .map(|l| self.position(l.as_ref()))
            .collect::<Result<_>>()?;
        let mut amps = vec![ZERO; self.amplitudes.len()];
        for (j, out) in amps.iter_mut().enumerate() {
            let mut i = 0usize;
            for (new_pos, &old_pos) in source.iter().enumerate() {
                if j & (1 << (n - 1 - new_pos)) != 0 {
                    i |= 1 << (n - 1 - old_pos);
                }
            }
            *out = self.amplitudes[i];
        }
        Ok(QuantumState {
            labels: order.iter().map(|l| l.as_ref().to_string()).collect(),
            amplitudes: amps,
        })
    }

    /// Amplitude matrix with the `kept` qubits (in the given order) as row
    /// index and the remaining qubits as column index.
    pub fn bipartition<S: AsRef<str>>(&self, kept: &[S]) -> Result<DMatrix<C64>> {
        let mut order: Vec<String> = kept.iter().map(|s| s.as_ref().to_string()).collect();
        for l in &self.labels {
            if !order.contains(l) {
                order.push(l.clone());
            }
        }
        let permuted = self.reordered(&order)?;
        let rows = 1 << kept.len();
        let cols = self.amplitudes.len() / rows;
        Ok(DMatrix::from_fn(rows, cols, |r, c| {
            permuted.amplitudes[r * cols + c]
        }))
    }

    /// Reduced density matrix on `kept`.
    pub fn reduced_density<S: AsRef<str>>(&self, kept: &[S]) -> Result<DMatrix<C64>> {
        let m = self.bipartition(kept)?;
        Ok(&m * m.adjoint())
    }

    /// `Tr ρ²` of the reduced state on `kept`.
    pub fn reduced_purity<S: AsRef<str>>(&self, kept: &[S]) -> Result<f64> {
        let rho = self.reduced_density(kept)?;
        Ok(rho.iter().map(|x| x.norm_sqr()).sum())
    }

    /// Schmidt coefficients across the cut `kept | rest`, in descending order.
    pub fn schmidt_coefficients<S: AsRef<str>>(&self, kept: &[S]) -> Result<Vec<f64>> {
        let m = self.bipartition(kept)?;
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(sv)
    }

    /// CSV with header `index,real,imag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,real,imag\n");
        for (i, a) in self.amplitudes.iter().enumerate() {
            let _ = writeln!(out, "{i},{:.17e},{:.17e}", a.re, a.im);
        }
        out
    }

    pub fn to_export(&self) -> StateExport {
        StateExport {
            labels: self.labels.clone(),
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        }
    }
}

/// JSON form of a state: labels plus `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateExport {
    pub labels: Vec<String>,
    pub amplitudes: Vec<[f64; 2]>,
}

impl TryFrom<StateExport> for QuantumState {
    type Error = Error;

    fn try_from(e: StateExport) -> Result<Self> {
        let amps = e.amplitudes.iter().map(|p| C64::new(p[0], p[1])).collect();
        QuantumState::new(e.labels, amps)
    }
}

impl fmt::Display for QuantumState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.num_qubits();
        let mut first = true;
        for (i, a) in self.amplitudes.iter().enumerate() {
            if a.norm() < 1e-12 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let bits: String = (0..n)
                .map(|p| if i & (1 << (n - 1 - p)) != 0 { '1' } else { '0' })
                .collect();
            write!(f, "({:.6}{:+.6}i)|{bits}⟩", a.re, a.im)?;
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " [{}]", self.labels.join(","))
    }
}

pub fn bits_to_index(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b & 1))
}

pub fn index_to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|p| ((index >> (n - 1 - p)) & 1) as u8).collect()
}

/// `|⟨s1|s2⟩|`, equal to one exactly when the states agree up to global phase.
pub fn fidelity_up_to_phase(s1: &QuantumState, s2: &QuantumState) -> Result<f64> {
    Ok(s1.inner(s2)?.norm().min(1.0))
}
