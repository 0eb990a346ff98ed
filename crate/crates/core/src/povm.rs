//! Control power against two-outcome rank-one POVM attacks.
//!
//! Without the controller, Bob and Charlie measure `b` and `c` with
//! `{|β_j⟩⟨β_j|}` and `{|γ_k⟩⟨γ_k|}`. A branch `(j,k)` succeeds when qubit `a`
//! factors out and the operator left on `C` is proportional to `e^{iασ_n}`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstate::crio_state;
use crate::qcore::{rotation, Mat2, PauliAxis, QuantumState};
use crate::stator::{kron_all, Stator};
use crate::PIPELINE_TOL;

const ZERO: C64 = C64::new(0.0, 0.0);
const ANGLE_TOL: f64 = 1e-9;

/// Bob's `|β_j⟩ = cos θ_j|0⟩ + e^{iφ_j} sin θ_j|1⟩` and Charlie's
/// `|γ_k⟩ = cos λ_k|0⟩ + e^{iω_k} sin λ_k|1⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmParams {
    pub theta1: f64,
    pub theta2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

fn wrap(angle: f64) -> f64 {
    let w = angle.rem_euclid(TAU);
    if TAU - w < 1e-12 {
        0.0
    } else {
        w
    }
}

fn ket(polar: f64, phase: f64) -> [C64; 2] {
    [C64::new(polar.cos(), 0.0), C64::from_polar(polar.sin(), phase)]
}

impl PovmParams {
    /// Validated parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        theta1: f64,
        theta2: f64,
        phi1: f64,
        phi2: f64,
        lambda1: f64,
        lambda2: f64,
        omega1: f64,
        omega2: f64,
    ) -> Result<Self> {
        let p = PovmParams {
            theta1,
            theta2,
            phi1,
            phi2,
            lambda1,
            lambda2,
            omega1,
            omega2,
        };
        p.validate()?;
        Ok(p)
    }

    /// The orthogonal completion `θ_2 = π/2 − θ_1`, `φ_2 = φ_1 + π` and
    /// likewise for Charlie.
    pub fn complementary(theta1: f64, phi1: f64, lambda1: f64, omega1: f64) -> Result<Self> {
        Self::new(
            theta1,
            FRAC_PI_2 - theta1,
            wrap(phi1),
            wrap(phi1 + PI),
            lambda1,
            FRAC_PI_2 - lambda1,
            wrap(omega1),
            wrap(omega1 + PI),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.theta1, self.theta2, self.lambda1, self.lambda2] {
            if !(-1e-12..=FRAC_PI_2 + 1e-12).contains(&v) {
                return Err(Error::OutOfRange {
                    value: v,
                    range: "[0, pi/2]",
                });
            }
        }
        for v in [self.phi1, self.phi2, self.omega1, self.omega2] {
            if !(-1e-12..=TAU + 1e-12).contains(&v) {
                return Err(Error::OutOfRange {
                    value: v,
                    range: "[0, 2pi]",
                });
            }
        }
        let sum = |a: [C64; 2], b: [C64; 2]| Mat2::projector(a) + Mat2::projector(b);
        let bob = sum(self.bob(1), self.bob(2)).max_abs_diff(&Mat2::identity());
        let charlie = sum(self.charlie(1), self.charlie(2)).max_abs_diff(&Mat2::identity());
        if bob > PIPELINE_TOL || charlie > PIPELINE_TOL {
            return Err(Error::InvalidPovm(format!(
                "projectors do not sum to identity (deviation {:e})",
                bob.max(charlie)
            )));
        }
        Ok(())
    }

    pub fn bob(&self, j: usize) -> [C64; 2] {
        match j {
            1 => ket(self.theta1, self.phi1),
            _ => ket(self.theta2, self.phi2),
        }
    }

    pub fn charlie(&self, k: usize) -> [C64; 2] {
        match k {
            1 => ket(self.lambda1, self.omega1),
            _ => ket(self.lambda2, self.omega2),
        }
    }

    fn bob_angles(&self, j: usize) -> (f64, f64) {
        if j == 1 {
            (self.theta1, self.phi1)
        } else {
            (self.theta2, self.phi2)
        }
    }

    fn charlie_angles(&self, k: usize) -> (f64, f64) {
        if k == 1 {
            (self.lambda1, self.omega1)
        } else {
            (self.lambda2, self.omega2)
        }
    }
}

/// `[M_1, M_2, N_1, N_2]`.
pub fn build_povm(params: &PovmParams) -> Result<[Mat2; 4]> {
    params.validate()?;
    Ok([
        Mat2::projector(params.bob(1)),
        Mat2::projector(params.bob(2)),
        Mat2::projector(params.charlie(1)),
        Mat2::projector(params.charlie(2)),
    ])
}

/// `c_st = ⟨β_j|s⟩⟨γ_k|t⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchCoefficients {
    pub c00: C64,
    pub c01: C64,
    pub c10: C64,
    pub c11: C64,
}

impl BranchCoefficients {
    pub fn new(c00: C64, c01: C64, c10: C64, c11: C64) -> Self {
        BranchCoefficients { c00, c01, c10, c11 }
    }

    pub fn norm_sqr(&self) -> f64 {
        [self.c00, self.c01, self.c10, self.c11].iter().map(|c| c.norm_sqr()).sum()
    }

    /// Operator on `C` paired with `|+⟩_a` and `|−⟩_a`, as (I, σ_n) weights.
    pub fn plus_minus_parts(&self) -> ([C64; 2], [C64; 2]) {
        ([self.c00, self.c11], [self.c10, self.c01])
    }
}

pub fn branch_coefficients(params: &PovmParams, j: usize, k: usize) -> BranchCoefficients {
    let b = params.bob(j);
    let g = params.charlie(k);
    let c = |s: usize, t: usize| b[s].conj() * g[t].conj();
    BranchCoefficients::new(c(0, 0), c(0, 1), c(1, 0), c(1, 1))
}

/// Whether a branch factors qubit `a` out, the ratio `K = c00/c10`, and the
/// rotation angles proportional to the leftover operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizedOperation {
    pub realizable: bool,
    pub k: Option<C64>,
    /// Angles in `[0, 2π)` with the leftover operator `∝ e^{iασ_n}`.
    pub alphas: Vec<f64>,
}

impl RealizedOperation {
    pub fn realizes(&self, alpha: f64) -> bool {
        self.realizable && self.alphas.iter().any(|a| angle_eq(*a, alpha))
    }
}

/// Equality modulo `2π`.
pub fn angle_eq(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d < ANGLE_TOL || TAU - d < ANGLE_TOL
}

/// Angles `α` (mod 2π) with `(u, v) ∝ (cos α, i sin α)`; empty if none.
pub fn rotation_angles(u: C64, v: C64) -> Vec<f64> {
    let w = v * C64::new(0.0, -1.0);
    let norm = (u.norm_sqr() + w.norm_sqr()).sqrt();
    if norm < 1e-14 {
        return Vec::new();
    }
    let (u, w) = (u / norm, w / norm);
    let cross = u.conj() * w;
    if cross.im.abs() > ANGLE_TOL {
        return Vec::new();
    }
    let sign = if cross.re < 0.0 { -1.0 } else { 1.0 };
    let a0 = (sign * w.norm()).atan2(u.norm());
    let mut out = vec![wrap(a0), wrap(a0 + PI)];
    out.sort_by(f64::total_cmp);
    out
}

/// Factorization holds iff `c00·c01 = c11·c10`. The leftover operator is
/// `c10·I + c01·σ_n`, or `c00·I + c11·σ_n` when that pair vanishes.
pub fn separability_check(c: &BranchCoefficients) -> RealizedOperation {
    let realizable = (c.c00 * c.c01 - c.c11 * c.c10).norm() <= PIPELINE_TOL;
    let small = |x: C64| x.norm() <= PIPELINE_TOL;
    let k = if !small(c.c10) {
        Some(c.c00 / c.c10)
    } else if !small(c.c01) {
        Some(c.c11 / c.c01)
    } else {
        None
    };
    let alphas = if !realizable {
        Vec::new()
    } else if small(c.c10) && small(c.c01) {
        rotation_angles(c.c00, c.c11)
    } else {
        rotation_angles(c.c10, c.c01)
    };
    RealizedOperation {
        realizable,
        k,
        alphas,
    }
}

/// The stator `S` after STEP 1 on `|h_3⟩`, normalized to `Tr(S†S) = 1`.
pub fn normalized_tripartite_stator(axis: PauliAxis) -> Result<Stator> {
    Stator::from_control_state(&crio_state(1)?, vec!["O3"], vec![axis])?
        .apply_controlled_sigma("a3", "O3")?
        .normalized()
}

/// `Tr_C[W†(I ⊗ M_j ⊗ N_k)W]` from the dense stator matrix.
pub fn outcome_probability(params: &PovmParams, axis: PauliAxis, j: usize, k: usize) -> Result<f64> {
    Ok(outcome_operator(params, axis, j, k)?.trace().re)
}

/// `W†(I ⊗ M_j ⊗ N_k)W` as a 2×2 operator on `C`.
pub fn outcome_operator(params: &PovmParams, axis: PauliAxis, j: usize, k: usize) -> Result<Mat2> {
    params.validate()?;
    let w = normalized_tripartite_stator(axis)?.as_matrix();
    let p = kron_all(&[
        Mat2::identity(),
        Mat2::projector(params.bob(j)),
        Mat2::projector(params.charlie(k)),
        Mat2::identity(),
    ]);
    let m = w.adjoint() * p * w;
    Ok(Mat2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
}

/// `(1/8)(I + sin 2θ_j sin 2λ_k cos φ_j cos ω_k σ_n)`.
pub fn outcome_operator_closed_form(params: &PovmParams, axis: PauliAxis, j: usize, k: usize) -> Mat2 {
    let (t, p) = params.bob_angles(j);
    let (l, o) = params.charlie_angles(k);
    let s = (2.0 * t).sin() * (2.0 * l).sin() * p.cos() * o.cos();
    (Mat2::identity() + axis.matrix().scale(C64::new(s, 0.0))).scale(C64::new(0.125, 0.0))
}

/// `|h_3⟩ ⊗ |input⟩` after the coupling of `c` to `C`.
fn coupled_state(axis: PauliAxis, input: &QuantumState) -> Result<QuantumState> {
    let mut s = crio_state(1)?.tensor(input)?;
    s.apply_controlled("a3", "C", &axis.matrix())?;
    Ok(s)
}

/// `C` maximally entangled with a reference qubit `R`.
fn bell_reference() -> Result<QuantumState> {
    let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    QuantumState::new(vec!["C", "R"], vec![h, ZERO, ZERO, h])
}

/// Unnormalized post-measurement branch `(⟨β_j| ⊗ ⟨γ_k|)|state⟩`.
fn measured_branch(state: &QuantumState, params: &PovmParams, j: usize, k: usize) -> Result<(f64, QuantumState)> {
    let (wb, s) = state.project_out("a2", params.bob(j))?;
    let (wc, s) = s.project_out("a3", params.charlie(k))?;
    let w = wb * wc;
    Ok((w, s.rescaled(w.sqrt())))
}

fn probabilities_of(params: &PovmParams, axis: PauliAxis, input: &QuantumState) -> Result<[[f64; 2]; 2]> {
    params.validate()?;
    let s = coupled_state(axis, input)?;
    let mut p = [[0.0; 2]; 2];
    for j in 1..=2 {
        for k in 1..=2 {
            p[j - 1][k - 1] = measured_branch(&s, params, j, k)?.0;
        }
    }
    Ok(p)
}

/// Joint outcome probabilities `p(j,k)` with `C` maximally mixed, read off
/// the simulated state.
pub fn simulated_probabilities(params: &PovmParams, axis: PauliAxis) -> Result<[[f64; 2]; 2]> {
    probabilities_of(params, axis, &bell_reference()?)
}

/// Joint outcome probabilities for a pure state on `C`.
pub fn simulated_probabilities_pure(
    params: &PovmParams,
    axis: PauliAxis,
    target: [C64; 2],
) -> Result<[[f64; 2]; 2]> {
    probabilities_of(params, axis, &QuantumState::product(vec!["C"], &[target])?)
}

/// Outcome frequencies over `samples` seeded draws from the simulated
/// distribution with `C` maximally mixed.
pub fn sampled_frequencies(
    params: &PovmParams,
    axis: PauliAxis,
    samples: usize,
    seed: u64,
) -> Result<[[f64; 2]; 2]> {
    let p = simulated_probabilities(params, axis)?;
    let cumulative = [p[0][0], p[0][0] + p[0][1], p[0][0] + p[0][1] + p[1][0]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [[0usize; 2]; 2];
    for _ in 0..samples {
        let r: f64 = rng.random();
        let idx = cumulative.iter().take_while(|&&c| r >= c).count();
        counts[idx / 2][idx % 2] += 1;
    }
    let n = samples as f64;
    Ok(counts.map(|row| row.map(|c| c as f64 / n)))
}

/// End-to-end check of one branch with `C` maximally entangled with a
/// reference qubit, so the whole operator on `C` is visible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSimulation {
    /// Second Schmidt coefficient across `a | (C, R)`.
    pub schmidt_second: f64,
    /// The operator left on `C` (row-major), up to scale.
    pub operator: [[C64; 2]; 2],
    /// `1 − |⟨e^{iασ_n}, O⟩| / (‖·‖‖O‖)` for each candidate angle.
    pub rotation_defects: Vec<f64>,
}

pub fn simulate_branch(
    params: &PovmParams,
    axis: PauliAxis,
    j: usize,
    k: usize,
    alphas: &[f64],
) -> Result<BranchSimulation> {
    let (_, s) = measured_branch(&coupled_state(axis, &bell_reference()?)?, params, j, k)?;
    let schmidt = s.schmidt_coefficients(&["a1"])?;
    let m = s.bipartition(&["a1"])?;
    let svd = m.svd(true, true);
    let vt = svd.v_t.expect("requested");
    let top = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let row = vt.row(top);
    // (O ⊗ I)Σ_j|jj⟩/√2 has amplitude O_ij/√2 on |i⟩_C|j⟩_R
    let operator = [[row[0], row[1]], [row[2], row[3]]];
    let o = Mat2(operator);
    let defects = alphas
        .iter()
        .map(|&a| {
            let r = rotation(&axis, a);
            1.0 - r.inner(&o).norm() / (r.frobenius_norm() * o.frobenius_norm())
        })
        .collect();
    Ok(BranchSimulation {
        schmidt_second: schmidt.get(1).copied().unwrap_or(0.0),
        operator,
        rotation_defects: defects,
    })
}

/// Coefficient extraction from the simulated post-measurement state: the
/// stator over `a` and `C` equals `Σ_a |a⟩ ⊗ (…)` built from `c_st`.
pub fn branch_stator_from_simulation(
    params: &PovmParams,
    axis: PauliAxis,
    j: usize,
    k: usize,
) -> Result<Stator> {
    let runs = crate::stator::default_probes(&["C"])
        .into_iter()
        .map(|probe| {
            let (_, joint) = measured_branch(&coupled_state(axis, &probe)?, params, j, k)?;
            Ok(crate::stator::ProbeRun { input: probe, joint })
        })
        .collect::<Result<Vec<_>>>()?;
    crate::stator::stator_from_states(&runs, &["a1"], &["C"], &[axis])
}

/// The stator predicted from `c_st`: `|0⟩⊗((c00+c10)I + (c01+c11)σ) +
/// |1⟩⊗((c00−c10)I + (c11−c01)σ)`.
pub fn branch_stator_from_coefficients(c: &BranchCoefficients, axis: PauliAxis) -> Result<Stator> {
    use crate::stator::OperatorWord;
    let mut s = Stator::new(vec!["a1"], vec!["C"], vec![axis])?;
    s.add_term(vec![0], OperatorWord(vec![0]), c.c00 + c.c10)?;
    s.add_term(vec![0], OperatorWord(vec![1]), c.c01 + c.c11)?;
    s.add_term(vec![1], OperatorWord(vec![0]), c.c00 - c.c10)?;
    s.add_term(vec![1], OperatorWord(vec![1]), c.c11 - c.c01)?;
    Ok(s)
}

/// One `(j, k)` row of a parameter table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub params: PovmParams,
    pub j: usize,
    pub k: usize,
    pub coefficients: BranchCoefficients,
    pub realized: RealizedOperation,
}

fn rows_for(params: PovmParams) -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(4);
    for j in 1..=2 {
        for k in 1..=2 {
            let c = branch_coefficients(&params, j, k);
            rows.push(TableRow {
                params,
                j,
                k,
                coefficients: c,
                realized: separability_check(&c),
            });
        }
    }
    rows
}

/// Charlie measures in the computational basis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseOneBlock {
    /// `λ_1 = 0`, `λ_2 = π/2`.
    ZeroFirst,
    /// `λ_1 = π/2`, `λ_2 = 0`.
    ZeroSecond,
}

/// Rows with Charlie's projectors diagonal; Bob's `θ_1`, `φ_1` are free.
pub fn enumerate_case1(
    theta1: f64,
    phi1: f64,
    omega1: f64,
    omega2: f64,
    block: CaseOneBlock,
) -> Result<Vec<TableRow>> {
    let (l1, l2) = match block {
        CaseOneBlock::ZeroFirst => (0.0, FRAC_PI_2),
        CaseOneBlock::ZeroSecond => (FRAC_PI_2, 0.0),
    };
    let params = PovmParams::new(
        theta1,
        FRAC_PI_2 - theta1,
        wrap(phi1),
        wrap(phi1 + PI),
        l1,
        l2,
        wrap(omega1),
        wrap(omega2),
    )?;
    Ok(rows_for(params))
}

/// The off-diagonal family: `θ_1 = θ_2 = π/4`, `φ = (0, π)`,
/// `λ_2 = π/2 − λ_1`, `ω = (π/2, 3π/2)`.
pub fn case2_params(lambda1: f64) -> Result<PovmParams> {
    if !(lambda1 > 0.0 && lambda1 < FRAC_PI_2) {
        return Err(Error::OutOfRange {
            value: lambda1,
            range: "(0, pi/2)",
        });
    }
    PovmParams::new(
        FRAC_PI_4,
        FRAC_PI_4,
        0.0,
        PI,
        lambda1,
        FRAC_PI_2 - lambda1,
        FRAC_PI_2,
        3.0 * FRAC_PI_2,
    )
}

pub fn enumerate_case2(lambda1: f64) -> Result<Vec<TableRow>> {
    Ok(rows_for(case2_params(lambda1)?))
}

/// `λ_1` that puts `α` in the angle set of one branch of the off-diagonal
/// family; `None` on multiples of `π/2`.
pub fn case2_lambda_for_alpha(alpha: f64) -> Option<f64> {
    let a = wrap(alpha);
    let q = a / FRAC_PI_2;
    if (q - q.round()).abs() * FRAC_PI_2 < ANGLE_TOL {
        return None;
    }
    Some(match q.floor() as u8 {
        0 => a,
        1 => PI - a,
        2 => 3.0 * FRAC_PI_2 - a,
        _ => a - 3.0 * FRAC_PI_2,
    })
}

/// Best success probability found for `e^{iασ_n}` and a witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlPowerReport {
    pub target_alpha: f64,
    pub success_rate: f64,
    pub witness_params: Option<PovmParams>,
    pub favorable_branches: Vec<(usize, usize)>,
}

fn favorable(rows: &[TableRow], alpha: f64) -> Vec<(usize, usize)> {
    rows.iter()
        .filter(|r| r.realized.realizes(alpha))
        .map(|r| (r.j, r.k))
        .collect()
}

/// Parameter sets searched for a target angle: diagonal-Charlie blocks at
/// a few Bob settings, plus the off-diagonal family at every `λ_1` of the
/// form `±α + mπ/2` inside `(0, π/2)` and at `π/4`.
pub fn candidate_params(alpha: f64) -> Vec<PovmParams> {
    let mut out = Vec::new();
    for block in [CaseOneBlock::ZeroFirst, CaseOneBlock::ZeroSecond] {
        for theta1 in [0.0, FRAC_PI_4 / 2.0, FRAC_PI_4, FRAC_PI_2] {
            for phi1 in [0.0, FRAC_PI_2] {
                for (o1, o2) in [(0.0, 0.0), (FRAC_PI_2, FRAC_PI_2)] {
                    if let Ok(rows) = enumerate_case1(theta1, phi1, o1, o2, block) {
                        out.push(rows[0].params);
                    }
                }
            }
        }
    }
    let mut lambdas = vec![FRAC_PI_4];
    for m in 0..4 {
        for s in [1.0, -1.0] {
            let l = wrap(s * alpha + m as f64 * FRAC_PI_2);
            if l > ANGLE_TOL && l < FRAC_PI_2 - ANGLE_TOL && !lambdas.iter().any(|x| (x - l).abs() < ANGLE_TOL) {
                lambdas.push(l);
            }
        }
    }
    for l in lambdas {
        if let Ok(p) = case2_params(l) {
            out.push(p);
        }
    }
    out
}

/// Highest `(favorable branches) × 1/4` over [`candidate_params`].
pub fn success_rate(alpha: f64) -> ControlPowerReport {
    let mut best = ControlPowerReport {
        target_alpha: alpha,
        success_rate: 0.0,
        witness_params: None,
        favorable_branches: Vec::new(),
    };
    for params in candidate_params(alpha) {
        let fav = favorable(&rows_for(params), alpha);
        if fav.len() > best.favorable_branches.len() {
            best.success_rate = fav.len() as f64 * 0.25;
            best.witness_params = Some(params);
            best.favorable_branches = fav;
        }
    }
    best
}

/// Success rate of one explicit parameter set.
pub fn success_rate_for(params: &PovmParams, alpha: f64) -> f64 {
    favorable(&rows_for(*params), alpha).len() as f64 * 0.25
}

/// Distinct angles realizable by some branch of the family Charlie prepares
/// for `λ_1`, deduplicated modulo `2π`.
pub fn candidate_angles(lambda1: f64) -> Result<Vec<f64>> {
    let rows = if lambda1.abs() < ANGLE_TOL {
        enumerate_case1(FRAC_PI_4, 0.0, 0.0, 0.0, CaseOneBlock::ZeroFirst)?
    } else if (lambda1 - FRAC_PI_2).abs() < ANGLE_TOL {
        enumerate_case1(FRAC_PI_4, 0.0, 0.0, 0.0, CaseOneBlock::ZeroSecond)?
    } else {
        enumerate_case2(lambda1)?
    };
    let mut set: Vec<f64> = Vec::new();
    for r in rows {
        for a in r.realized.alphas {
            if !set.iter().any(|x| angle_eq(*x, a)) {
                set.push(a);
            }
        }
    }
    set.sort_by(f64::total_cmp);
    Ok(set)
}

/// Probability that Charlie guesses `α` uniformly from [`candidate_angles`].
pub fn guess_probability(lambda1: f64) -> Result<f64> {
    if !(0.0..=FRAC_PI_2).contains(&lambda1) {
        return Err(Error::OutOfRange {
            value: lambda1,
            range: "[0, pi/2]",
        });
    }
    Ok(1.0 / candidate_angles(lambda1)?.len() as f64)
}

/// Formats an angle as a multiple of `π/8` when it is one.
pub fn format_angle(a: f64) -> String {
    let eighths = a / (PI / 8.0);
    let r = eighths.round();
    if (eighths - r).abs() > 1e-9 {
        return format!("{a:.10}");
    }
    let (mut num, mut den) = (r as i64, 8i64);
    while den > 1 && num % 2 == 0 {
        num /= 2;
        den /= 2;
    }
    match (num, den) {
        (0, _) => "0".into(),
        (1, 1) => "pi".into(),
        (n, 1) => format!("{n}pi"),
        (1, d) => format!("pi/{d}"),
        (n, d) => format!("{n}pi/{d}"),
    }
}

fn format_complex(c: C64) -> String {
    let clean = |x: f64| if x.abs() < 1e-13 { 0.0 } else { x };
    format!("{:.10}{:+.10}i", clean(c.re), clean(c.im))
}

fn format_alphas(a: &[f64]) -> String {
    if a.is_empty() {
        return "-".into();
    }
    a.iter().map(|x| format_angle(*x)).collect::<Vec<_>>().join(" or ")
}

fn params_cells(p: &PovmParams) -> String {
    [p.theta1, p.theta2, p.phi1, p.phi2, p.lambda1, p.lambda2, p.omega1, p.omega2]
        .iter()
        .map(|x| format_angle(*x))
        .collect::<Vec<_>>()
        .join(",")
}

/// CSV of diagonal-Charlie rows: parameters, branch, four coefficients and
/// the realized angles.
pub fn case1_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(
        "theta1,theta2,phi1,phi2,lambda1,lambda2,omega1,omega2,povm,c00,c01,c10,c11,alpha\n",
    );
    for r in rows {
        let c = &r.coefficients;
        out.push_str(&format!(
            "{},M{}N{},{},{},{},{},{}\n",
            params_cells(&r.params),
            r.j,
            r.k,
            format_complex(c.c00),
            format_complex(c.c01),
            format_complex(c.c10),
            format_complex(c.c11),
            format_alphas(&r.realized.alphas)
        ));
    }
    out
}

/// CSV of off-diagonal rows: parameters, block success rate, branch, `K`,
/// `c01`, `c10` and the realized angles.
pub fn case2_csv(rows: &[TableRow]) -> String {
    let mut out =
        String::from("theta1,theta2,phi1,phi2,lambda1,lambda2,omega1,omega2,p,povm,K,c01,c10,alpha\n");
    for chunk in rows.chunks(4) {
        let best = chunk
            .iter()
            .map(|r| {
                chunk
                    .iter()
                    .filter(|o| o.realized.alphas.iter().any(|a| r.realized.realizes(*a)))
                    .count()
            })
            .max()
            .unwrap_or(0);
        for r in chunk {
            let c = &r.coefficients;
            out.push_str(&format!(
                "{},{},M{}N{},{},{},{},{}\n",
                params_cells(&r.params),
                best as f64 * 0.25,
                r.j,
                r.k,
                r.realized.k.map_or("-".into(), format_complex),
                format_complex(c.c01),
                format_complex(c.c10),
                format_alphas(&r.realized.alphas)
            ));
        }
    }
    out
}

/// Draws an angle in `[lo, hi]`, half the time from the listed special
/// values so that measure-zero families are actually hit.
fn mixed_draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64, special: &[f64]) -> f64 {
    if rng.random_bool(0.5) {
        special[rng.random_range(0..special.len())]
    } else {
        rng.random_range(lo..hi)
    }
}

/// Random single-branch settings `(θ, φ, λ, ω)` with special values mixed in.
pub fn random_branch_angles(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    let polar = [0.0, FRAC_PI_4, FRAC_PI_2, 0.3];
    let phase = [0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2];
    (
        mixed_draw(rng, 0.0, FRAC_PI_2, &polar),
        mixed_draw(rng, 0.0, TAU, &phase),
        mixed_draw(rng, 0.0, FRAC_PI_2, &polar),
        mixed_draw(rng, 0.0, TAU, &phase),
    )
}

/// Random valid parameter sets: orthogonal completions of mixed draws.
pub fn random_params(rng: &mut ChaCha8Rng) -> PovmParams {
    let (t, p, l, o) = random_branch_angles(rng);
    PovmParams::complementary(t, p, l, o).expect("completions are valid")
}

const SHARDS: u64 = 16;

/// Splits `draws` over seeded shards and concatenates results in shard order.
fn sharded<T: Send>(draws: usize, seed: u64, job: impl Fn(&mut ChaCha8Rng, usize) -> Vec<T> + Sync) -> Vec<T> {
    (0..SHARDS)
        .into_par_iter()
        .map(|shard| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard);
            let per = draws / SHARDS as usize + usize::from((shard as usize) < draws % SHARDS as usize);
            job(&mut rng, per)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Randomized search over single-branch settings `(θ, φ, λ, ω)` with
/// `λ ∈ (0, π/2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreconditionAudit {
    pub draws: usize,
    /// Branches that leave a rotation on `C`.
    pub rotation_branches: usize,
    /// Those among them outside the off-diagonal family.
    pub counterexamples: Vec<(f64, f64, f64, f64)>,
}

pub fn precondition_audit(draws: usize, seed: u64) -> PreconditionAudit {
    let near = |x: f64, set: &[f64]| set.iter().any(|s| (x - s).abs() < 1e-8);
    let found = sharded(draws, seed, |rng, count| {
        let mut bad = Vec::new();
        for _ in 0..count {
            let (t, p, l, o) = random_branch_angles(rng);
            if l <= 1e-8 || l >= FRAC_PI_2 - 1e-8 {
                continue;
            }
            let b = ket(t, p);
            let g = ket(l, o);
            let c = |s: usize, u: usize| b[s].conj() * g[u].conj();
            let r = separability_check(&BranchCoefficients::new(c(0, 0), c(0, 1), c(1, 0), c(1, 1)));
            if r.realizable && !r.alphas.is_empty() {
                let ok = near(t, &[FRAC_PI_4])
                    && near(p, &[0.0, PI, TAU])
                    && near(o, &[FRAC_PI_2, 3.0 * FRAC_PI_2]);
                bad.push((ok, (t, p, l, o)));
            }
        }
        bad
    });
    PreconditionAudit {
        draws,
        rotation_branches: found.len(),
        counterexamples: found.into_iter().filter(|(ok, _)| !ok).map(|(_, x)| x).collect(),
    }
}

/// Outcome of comparing the cross-ratio flag with a Schmidt-rank test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorizationAudit {
    pub branches: usize,
    pub agreements: usize,
    pub realizable: usize,
}

/// Checks [`separability_check`] against the second Schmidt coefficient of
/// the simulated branch for `draws` random parameter sets (four branches
/// each).
pub fn factorization_audit(draws: usize, seed: u64) -> Result<FactorizationAudit> {
    let axes = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z, PauliAxis::from_angles(1.1, 0.4)];
    let results = sharded(draws, seed, |rng, count| {
        let mut out = Vec::new();
        for i in 0..count {
            let params = random_params(rng);
            for j in 1..=2 {
                for k in 1..=2 {
                    let flag = separability_check(&branch_coefficients(&params, j, k)).realizable;
                    let sim = simulate_branch(&params, axes[i % axes.len()], j, k, &[]);
                    out.push(sim.map(|s| (flag, s.schmidt_second <= PIPELINE_TOL)));
                }
            }
        }
        out
    });
    let mut audit = FactorizationAudit {
        branches: 0,
        agreements: 0,
        realizable: 0,
    };
    for r in results {
        let (flag, rank_one) = r?;
        audit.branches += 1;
        audit.agreements += usize::from(flag == rank_one);
        audit.realizable += usize::from(flag);
    }
    Ok(audit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    const ONE: C64 = C64::new(1.0, 0.0);

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-10
    }

    fn same_angles(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && b.iter().all(|x| a.iter().any(|y| angle_eq(*x, *y)))
    }

    #[test]
    fn povm_examples() {
        let p = PovmParams::new(0.0, FRAC_PI_2, 0.3, 0.3 + PI, 0.0, FRAC_PI_2, 1.0, 2.0).unwrap();
        let [m1, m2, ..] = build_povm(&p).unwrap();
        assert!(m1.max_abs_diff(&Mat2::new(ONE, ZERO, ZERO, ZERO)) < 1e-12);
        assert!(m2.max_abs_diff(&Mat2::new(ZERO, ZERO, ZERO, ONE)) < 1e-12);

        let p = PovmParams::new(FRAC_PI_4, FRAC_PI_4, 0.0, PI, 0.0, FRAC_PI_2, 0.0, 0.0).unwrap();
        let [m1, m2, ..] = build_povm(&p).unwrap();
        let half = |s: f64| (Mat2::identity() + Mat2::pauli_x().scale(c(s, 0.0))).scale(c(0.5, 0.0));
        assert!(m1.max_abs_diff(&half(1.0)) < 1e-12);
        assert!(m2.max_abs_diff(&half(-1.0)) < 1e-12);

        assert!(matches!(
            PovmParams::new(0.3, 0.3, 0.0, PI, 0.0, FRAC_PI_2, 0.0, 0.0),
            Err(Error::InvalidPovm(_))
        ));
        assert!(PovmParams::new(2.0, 0.0, 0.0, PI, 0.0, FRAC_PI_2, 0.0, 0.0).is_err());
    }

    #[test]
    fn probabilities_are_flat() {
        let axis = PauliAxis::from_angles(0.7, 1.9);
        let p = PovmParams::complementary(0.4, 0.2, 1.1, 5.0).unwrap();
        let mut total = 0.0;
        for j in 1..=2 {
            for k in 1..=2 {
                let pr = outcome_probability(&p, axis, j, k).unwrap();
                assert!((pr - 0.25).abs() < 1e-12);
                total += pr;
                let op = outcome_operator(&p, axis, j, k).unwrap();
                let closed = outcome_operator_closed_form(&p, axis, j, k);
                assert!(op.max_abs_diff(&closed) < 1e-12, "{op} vs {closed}");
            }
        }
        assert!((total - 1.0).abs() < 1e-12);
        let sim = simulated_probabilities(&p, axis).unwrap();
        assert!(sim.iter().flatten().all(|x| (x - 0.25).abs() < 1e-12));
        let psi = [c(0.6, 0.0), c(0.0, 0.8)];
        let pure = simulated_probabilities_pure(&p, axis, psi).unwrap();
        for j in 1..=2 {
            for k in 1..=2 {
                let op = outcome_operator_closed_form(&p, axis, j, k);
                let want = 2.0 * (psi[0].conj() * (op.0[0][0] * psi[0] + op.0[0][1] * psi[1])
                    + psi[1].conj() * (op.0[1][0] * psi[0] + op.0[1][1] * psi[1]))
                    .re;
                assert!((pure[j - 1][k - 1] - want).abs() < 1e-12);
            }
        }
        let freq = sampled_frequencies(&p, axis, 100_000, 1).unwrap();
        assert!(freq.iter().flatten().all(|x| (x - 0.25).abs() < 0.005));
    }

    #[test]
    fn coefficient_examples() {
        let p = PovmParams::complementary(0.0, 0.0, 0.0, 0.0).unwrap();
        let b = branch_coefficients(&p, 1, 1);
        assert!(close(b.c00, ONE) && close(b.c01, ZERO) && close(b.c10, ZERO) && close(b.c11, ZERO));

        let p = PovmParams::complementary(FRAC_PI_4, 0.0, FRAC_PI_4, FRAC_PI_2).unwrap();
        let b = branch_coefficients(&p, 1, 1);
        assert!(close(b.c00, c(0.5, 0.0)) && close(b.c01, c(0.0, -0.5)));
        assert!(close(b.c10, c(0.5, 0.0)) && close(b.c11, c(0.0, -0.5)));
        assert!((b.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coefficients_match_simulated_stator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = random_params(&mut rng);
            let axis = PauliAxis::from_angles(rng.random_range(0.0..PI), rng.random_range(0.0..TAU));
            for j in 1..=2 {
                for k in 1..=2 {
                    let predicted = branch_stator_from_coefficients(&branch_coefficients(&p, j, k), axis).unwrap();
                    let sim = branch_stator_from_simulation(&p, axis, j, k).unwrap();
                    assert!(sim.equivalent_up_to_scalar(&predicted, 1e-10));
                }
            }
        }
    }

    #[test]
    fn separability_examples() {
        let p = PovmParams::complementary(FRAC_PI_4, 0.0, FRAC_PI_4, FRAC_PI_2).unwrap();
        let r = separability_check(&branch_coefficients(&p, 1, 1));
        assert!(r.realizable && close(r.k.unwrap(), ONE));
        assert!(same_angles(&r.alphas, &[3.0 * FRAC_PI_4, 7.0 * FRAC_PI_4]));

        // c01 = c10 = 0: factorizes, leftover I + σ_n is not a rotation
        let r = separability_check(&BranchCoefficients::new(ONE, ZERO, ZERO, ONE));
        assert!(r.realizable && r.alphas.is_empty() && r.k.is_none());

        let r = separability_check(&BranchCoefficients::new(ONE, ONE, ZERO, ZERO));
        assert!(!r.realizable);
    }

    #[test]
    fn rotation_angle_solver() {
        for a in [0.0, 0.3, FRAC_PI_2, 2.0, PI, 4.0, 3.0 * FRAC_PI_2, 6.0] {
            let l = C64::from_polar(0.7, 1.3);
            let got = rotation_angles(l * a.cos(), l * c(0.0, a.sin()));
            assert!(same_angles(&got, &[wrap(a), wrap(a + PI)]), "{a}: {got:?}");
        }
        assert!(rotation_angles(ONE, ONE).is_empty());
    }

    #[test]
    fn case1_rows_match_table() {
        for &theta1 in &[0.0, 0.2, FRAC_PI_4, 1.3, FRAC_PI_2] {
            for &(phi1, w1, w2) in &[(0.0, 0.0, 0.0), (1.1, 0.4, 5.5), (4.0, 3.0, 1.0)] {
                let e = |x: f64| C64::from_polar(1.0, -x);
                let (ct, st) = (theta1.cos(), theta1.sin());
                let phi2 = wrap(phi1 + PI);
                let (ct2, st2) = ((FRAC_PI_2 - theta1).cos(), (FRAC_PI_2 - theta1).sin());
                let zero_pi = [0.0, PI];
                let quarter = [FRAC_PI_2, 3.0 * FRAC_PI_2];
                let block1 = enumerate_case1(theta1, phi1, w1, w2, CaseOneBlock::ZeroFirst).unwrap();
                let want1 = [
                    (c(ct, 0.0), ZERO, e(phi1) * st, ZERO, zero_pi),
                    (ZERO, e(w2) * ct, ZERO, e(w2 + phi1) * st, quarter),
                    (c(ct2, 0.0), ZERO, e(phi2) * st2, ZERO, zero_pi),
                    (ZERO, e(w2) * ct2, ZERO, e(w2 + phi2) * st2, quarter),
                ];
                let block2 = enumerate_case1(theta1, phi1, w1, w2, CaseOneBlock::ZeroSecond).unwrap();
                let want2 = [
                    (ZERO, e(w1) * ct, ZERO, e(w1 + phi1) * st, quarter),
                    (c(ct, 0.0), ZERO, e(phi1) * st, ZERO, zero_pi),
                    (ZERO, e(w1) * ct2, ZERO, e(w1 + phi2) * st2, quarter),
                    (c(ct2, 0.0), ZERO, e(phi2) * st2, ZERO, zero_pi),
                ];
                for (rows, want) in [(block1, want1), (block2, want2)] {
                    for (r, w) in rows.iter().zip(want.iter()) {
                        let cf = &r.coefficients;
                        assert!(close(cf.c00, w.0) && close(cf.c01, w.1));
                        assert!(close(cf.c10, w.2) && close(cf.c11, w.3));
                        assert!(r.realized.realizable);
                        assert!(same_angles(&r.realized.alphas, &w.4), "{:?}", r.realized);
                    }
                }
            }
        }
    }

    #[test]
    fn case2_rows_match_table() {
        let h = SQRT_2 / 2.0;
        for l1 in [0.1, 0.5, FRAC_PI_4, 1.0, 1.4] {
            let l2 = FRAC_PI_2 - l1;
            let rows = enumerate_case2(l1).unwrap();
            let want = [
                (1.0, c(0.0, -h * l1.sin()), c(h * l1.cos(), 0.0), [PI - l1, TAU - l1]),
                (1.0, c(0.0, h * l2.sin()), c(h * l2.cos(), 0.0), [3.0 * FRAC_PI_2 - l1, FRAC_PI_2 - l1]),
                (-1.0, c(0.0, -h * l1.sin()), c(-h * l1.cos(), 0.0), [l1, l1 + PI]),
                (-1.0, c(0.0, h * l2.sin()), c(-h * l2.cos(), 0.0), [l1 + 3.0 * FRAC_PI_2, l1 + FRAC_PI_2]),
            ];
            for (r, w) in rows.iter().zip(want.iter()) {
                assert!(close(r.realized.k.unwrap(), c(w.0, 0.0)));
                assert!(close(r.coefficients.c01, w.1) && close(r.coefficients.c10, w.2));
                assert!(same_angles(&r.realized.alphas, &w.3));
            }
        }
        assert!(enumerate_case2(0.0).is_err() && enumerate_case2(FRAC_PI_2).is_err());
    }

    #[test]
    fn rows_survive_end_to_end_simulation() {
        let axis = PauliAxis::from_angles(1.0, 2.0);
        let mut rows = enumerate_case2(0.6).unwrap();
        rows.extend(enumerate_case1(0.3, 1.0, 0.5, 2.5, CaseOneBlock::ZeroSecond).unwrap());
        for r in rows {
            let sim = simulate_branch(&r.params, axis, r.j, r.k, &r.realized.alphas).unwrap();
            assert!(sim.schmidt_second <= 1e-10);
            assert!(sim.rotation_defects.iter().all(|d| *d <= 1e-10), "{:?}", sim.rotation_defects);
        }
    }

    #[test]
    fn lambda_rule_inverts_the_family() {
        for a in [0.2, 1.0, 2.0, 3.0, 3.5, 4.5, 5.0, 6.0] {
            let l = case2_lambda_for_alpha(a).unwrap();
            let rows = enumerate_case2(l).unwrap();
            assert!(rows.iter().any(|r| r.realized.realizes(a)), "{a}");
        }
        assert!(case2_lambda_for_alpha(PI).is_none());
    }

    #[test]
    fn success_rate_examples() {
        let r = success_rate(3.0 * FRAC_PI_4);
        assert_eq!(r.success_rate, 0.5);
        assert_eq!(r.favorable_branches, vec![(1, 1), (2, 2)]);
        let r = success_rate(0.7);
        assert_eq!(r.success_rate, 0.25);
        assert_eq!(r.favorable_branches, vec![(2, 1)]);
        assert!((r.witness_params.unwrap().lambda1 - 0.7).abs() < 1e-12);
        assert_eq!(success_rate(0.0).success_rate, 0.5);
    }

    #[test]
    fn guess_examples() {
        assert_eq!(guess_probability(0.0).unwrap(), 0.25);
        assert_eq!(guess_probability(0.3).unwrap(), 0.125);
        assert_eq!(guess_probability(FRAC_PI_4).unwrap(), 0.25);
        assert_eq!(guess_probability(FRAC_PI_2).unwrap(), 0.25);
        assert!(guess_probability(2.0).is_err());
    }

    #[test]
    fn cross_ratio_agrees_with_schmidt_rank() {
        let audit = factorization_audit(500, 4).unwrap();
        assert_eq!(audit.branches, 2000);
        assert_eq!(audit.agreements, audit.branches);
        assert!(audit.realizable > 100 && audit.realizable < audit.branches);
    }

    #[test]
    fn no_counterexamples_to_family_preconditions() {
        let audit = precondition_audit(10_000, 5);
        assert!(audit.rotation_branches > 50, "{}", audit.rotation_branches);
        assert!(audit.counterexamples.is_empty());
        assert_eq!(precondition_audit(0, 5).rotation_branches, 0);
    }

    #[test]
    fn angle_formatting() {
        assert_eq!(format_angle(0.0), "0");
        assert_eq!(format_angle(3.0 * FRAC_PI_4), "3pi/4");
        assert_eq!(format_angle(PI), "pi");
        assert_eq!(format_angle(3.0 * FRAC_PI_2), "3pi/2");
        assert_eq!(format_angle(0.3), "0.3000000000");
    }

    #[test]
    fn table_csv_layout() {
        let csv = case2_csv(&enumerate_case2(FRAC_PI_4).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(
            lines[1],
            "pi/4,pi/4,0,pi,pi/4,pi/4,pi/2,3pi/2,0.5,M1N1,1.0000000000+0.0000000000i,\
             0.0000000000-0.5000000000i,0.5000000000+0.0000000000i,3pi/4 or 7pi/4"
        );
        let csv = case1_csv(&enumerate_case1(0.0, 0.0, 0.0, 0.0, CaseOneBlock::ZeroFirst).unwrap());
        assert!(csv.lines().nth(2).unwrap().ends_with("pi/2 or 3pi/2"));
    }
}
