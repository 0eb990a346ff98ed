//! Geometric measure of entanglement for pure states.
//!
//! `G = −log₂ Λ²` where `Λ` is the largest overlap with a product state. The
//! maximization is a multi-start coordinate ascent: each coordinate is
//! updated by a coarse grid scan followed by golden-section refinement, and
//! a step is kept only if it improves the objective.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstate::{crio_state, phi_state, qubit_label};
use crate::qcore::{Mat2, QuantumState};

/// `⊗_j (cos θ_j|0⟩ + e^{iφ_j} sin θ_j|1⟩)`; phases are all zero when absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductAnsatz {
    pub thetas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phis: Option<Vec<f64>>,
}

impl ProductAnsatz {
    pub fn real(thetas: Vec<f64>) -> Self {
        ProductAnsatz { thetas, phis: None }
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    fn factor(&self, j: usize) -> [C64; 2] {
        let phi = self.phis.as_ref().map_or(0.0, |p| p[j]);
        let t = self.thetas[j];
        [C64::new(t.cos(), 0.0), C64::from_polar(t.sin(), phi)]
    }

    fn factors(&self) -> Vec<[C64; 2]> {
        (0..self.len()).map(|j| self.factor(j)).collect()
    }
}

/// `⟨φ(ansatz)|ψ⟩`.
pub fn overlap(state: &QuantumState, ansatz: &ProductAnsatz) -> Result<C64> {
    let n = state.num_qubits();
    if ansatz.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: ansatz.len(),
        });
    }
    if let Some(p) = &ansatz.phis {
        if p.len() != n {
            return Err(Error::ArityMismatch { expected: n, got: p.len() });
        }
    }
    let mut v = state.amplitudes().to_vec();
    for f in ansatz.factors() {
        let half = v.len() / 2;
        v = (0..half)
            .map(|j| f[0].conj() * v[j] + f[1].conj() * v[j + half])
            .collect();
    }
    Ok(v[0])
}

/// Contracts every qubit except `skip` against its factor, leaving the
/// two-component vector `u` with `⟨φ|ψ⟩ = conj(f_skip)·u`.
fn contract_except(amps: &[C64], n: usize, factors: &[[C64; 2]], skip: usize) -> [C64; 2] {
    let mut u = [C64::new(0.0, 0.0); 2];
    for (x, a) in amps.iter().enumerate() {
        let mut w = *a;
        for (j, f) in factors.iter().enumerate() {
            if j != skip {
                w *= f[(x >> (n - 1 - j)) & 1].conj();
            }
        }
        u[(x >> (n - 1 - skip)) & 1] += w;
    }
    u
}

/// Applies `H` to each listed qubit.
pub fn hadamard_reduce<S: AsRef<str>>(state: &QuantumState, qubits: &[S]) -> Result<QuantumState> {
    let mut out = state.clone();
    for q in qubits {
        out.apply_1q(&Mat2::hadamard(), q.as_ref())?;
    }
    Ok(out)
}

/// `|h_{2N+1}⟩` with `H` on `a_1` and `a_3..a_{N+1}`: real, non-negative
/// amplitudes.
pub fn reduced_crio_state(n: usize) -> Result<QuantumState> {
    let qubits: Vec<String> = std::iter::once(1).chain(3..=n + 1).map(qubit_label).collect();
    hadamard_reduce(&crio_state(n)?, &qubits)
}

/// `2^{-(N+1)/2} [cos θ_1 ∏_t cos(θ_t − θ_{t+N}) + sin θ_1 ∏_t sin(θ_t + θ_{t+N})]`
/// over `t = 2..=N+1`, equal to the overlap of the real ansatz with
/// [`reduced_crio_state`].
pub fn closed_form_overlap(n: usize, thetas: &[f64]) -> Result<f64> {
    if thetas.len() != 2 * n + 1 {
        return Err(Error::ArityMismatch {
            expected: 2 * n + 1,
            got: thetas.len(),
        });
    }
    if let Some(&bad) = thetas.iter().find(|t| !(0.0..=FRAC_PI_2).contains(*t)) {
        return Err(Error::OutOfRange {
            value: bad,
            range: "[0, pi/2]",
        });
    }
    let th = |i: usize| thetas[i - 1];
    let mut c = th(1).cos();
    let mut s = th(1).sin();
    for t in 2..=n + 1 {
        c *= (th(t) - th(t + n)).cos();
        s *= (th(t) + th(t + n)).sin();
    }
    Ok((c + s) / 2f64.powf((n as f64 + 1.0) / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GmMode {
    /// Real ansatz with `θ ∈ [0, π/2]`; valid for non-negative states.
    Nonneg,
    /// `θ ∈ [0, π]` plus a phase `φ ∈ [0, 2π]` per qubit.
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmOptions {
    pub mode: GmMode,
    pub restarts: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for GmOptions {
    fn default() -> Self {
        GmOptions {
            mode: GmMode::Nonneg,
            restarts: 64,
            tol: 1e-8,
            seed: 0,
            max_sweeps: 2000,
        }
    }
}

impl GmOptions {
    pub fn with_mode(mode: GmMode) -> Self {
        GmOptions {
            mode,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmResult {
    pub lambda_sq: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub argmax: ProductAnsatz,
    pub restarts: usize,
    pub converged: bool,
}

/// Report layout for one state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmReport {
    pub state_id: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda_sq: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub argmax_thetas: Vec<f64>,
    pub restarts: usize,
    pub converged: bool,
}

impl GmResult {
    pub fn report(&self, state_id: &str, n: usize) -> GmReport {
        GmReport {
            state_id: state_id.to_string(),
            n,
            lambda_sq: self.lambda_sq,
            g: self.g,
            argmax_thetas: self.argmax.thetas.clone(),
            restarts: self.restarts,
            converged: self.converged,
        }
    }
}

const GRID: usize = 32;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[lo, hi]`: grid scan, then golden section around the
/// best grid point.
fn line_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let h = (hi - lo) / GRID as f64;
    let (mut best_i, mut best_v) = (0, f(lo));
    for i in 1..=GRID {
        let v = f(lo + h * i as f64);
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    let mut a = (lo + h * (best_i as f64 - 1.0)).max(lo);
    let mut b = (lo + h * (best_i as f64 + 1.0)).min(hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let grid_x = lo + h * best_i as f64;
    if fm >= best_v {
        (mid, fm)
    } else {
        (grid_x, best_v)
    }
}

/// One local ascent from `start`. Returns the final ansatz, its objective
/// `|⟨φ|ψ⟩|²` and the objective after every sweep.
pub fn ascend(
    state: &QuantumState,
    start: ProductAnsatz,
    mode: GmMode,
    tol: f64,
    max_sweeps: usize,
) -> Result<(ProductAnsatz, f64, Vec<f64>)> {
    let n = state.num_qubits();
    let amps = state.amplitudes();
    let mut ans = start;
    if mode == GmMode::General && ans.phis.is_none() {
        ans.phis = Some(vec![0.0; n]);
    }
    let theta_hi = if mode == GmMode::Nonneg { FRAC_PI_2 } else { PI };
    let mut value = overlap(state, &ans)?.norm_sqr();
    let mut history = vec![value];
    for _ in 0..max_sweeps {
        let before = value;
        for j in 0..n {
            let factors = ans.factors();
            let u = contract_except(amps, n, &factors, j);
            let phi = ans.phis.as_ref().map_or(0.0, |p| p[j]);
            let obj = |t: f64, p: f64| {
                (C64::new(t.cos(), 0.0) * u[0] + C64::from_polar(t.sin(), -p) * u[1]).norm_sqr()
            };
            let (t, v) = line_max(|t| obj(t, phi), 0.0, theta_hi);
            if v > value {
                ans.thetas[j] = t;
                value = v;
            }
            if mode == GmMode::General {
                let t = ans.thetas[j];
                let (p, v) = line_max(|p| obj(t, p), 0.0, TAU);
                if v > value {
                    ans.phis.as_mut().expect("general mode has phases")[j] = p;
                    value = v;
                }
            }
        }
        history.push(value);
        if value - before <= tol * 1e-3 {
            break;
        }
    }
    Ok((ans, value, history))
}

/// Multi-start maximization of `|⟨φ|ψ⟩|²` over product states.
pub fn gm_optimize(state: &QuantumState, options: &GmOptions) -> Result<GmResult> {
    let n = state.num_qubits();
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > crate::PIPELINE_TOL {
        return Err(Error::Unnormalized(norm));
    }
    if options.mode == GmMode::Nonneg {
        if let Some(a) = state
            .amplitudes()
            .iter()
            .find(|a| a.re < -crate::ALGEBRA_TOL || a.im.abs() > crate::ALGEBRA_TOL)
        {
            return Err(Error::OutOfRange {
                value: a.re,
                range: "non-negative real amplitudes",
            });
        }
    }
    let restarts = options.restarts.max(1);
    let runs: Vec<(ProductAnsatz, f64)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
            rng.set_stream(r as u64);
            let start = match options.mode {
                GmMode::Nonneg => ProductAnsatz::real((0..n).map(|_| rng.random_range(0.0..FRAC_PI_2)).collect()),
                GmMode::General => ProductAnsatz {
                    thetas: (0..n).map(|_| rng.random_range(0.0..PI)).collect(),
                    phis: Some((0..n).map(|_| rng.random_range(0.0..TAU)).collect()),
                },
            };
            ascend(state, start, options.mode, options.tol, options.max_sweeps)
                .map(|(a, v, _)| (a, v))
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&i, &j| {
        runs[j]
            .1
            .total_cmp(&runs[i].1)
            .then_with(|| cmp_lex(&runs[i].0.thetas, &runs[j].0.thetas))
    });
    let best = &runs[order[0]];
    let converged = order.len() < 2 || (best.1 - runs[order[1]].1).abs() <= options.tol;
    let lambda_sq = best.1.min(1.0);
    Ok(GmResult {
        lambda_sq,
        g: -lambda_sq.log2(),
        argmax: best.0.clone(),
        restarts,
        converged,
    })
}

fn cmp_lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// GM of the reduced `|h_{2N+1}⟩` in non-negative mode.
pub fn gm_crio(n: usize, options: &GmOptions) -> Result<GmResult> {
    gm_optimize(&reduced_crio_state(n)?, options)
}

/// GM of `|φ_{2N}⟩`.
pub fn gm_phi(n: usize, options: &GmOptions) -> Result<GmResult> {
    gm_optimize(&phi_state(n)?, options)
}

/// One row of the entanglement-resource comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceRow {
    pub systems: usize,
    pub state: String,
    pub gm: f64,
}

/// Rows for `N = 1..=max_n`: the graph state on `2N+1` qubits and `|φ_{2N}⟩`
/// on `2N` qubits, with numerically optimized GM.
pub fn resource_table(max_n: usize, options: &GmOptions) -> Result<Vec<ResourceRow>> {
    let mut rows = Vec::new();
    for n in 1..=max_n {
        rows.push(ResourceRow {
            systems: 2 * n + 1,
            state: format!("h_{}", 2 * n + 1),
            gm: gm_crio(n, options)?.g,
        });
        rows.push(ResourceRow {
            systems: 2 * n,
            state: format!("phi_{}", 2 * n),
            gm: gm_phi(n, options)?.g,
        });
    }
    Ok(rows)
}

pub fn resource_table_csv(rows: &[ResourceRow]) -> String {
    let mut out = String::from("systems,state,gm\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.9}\n", r.systems, r.state, r.gm));
    }
    out
}

/// The all-`π/4` real ansatz.
pub fn symmetric_ansatz(len: usize) -> ProductAnsatz {
    ProductAnsatz::real(vec![FRAC_PI_4; len])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn fast(mode: GmMode) -> GmOptions {
        GmOptions {
            restarts: 16,
            ..GmOptions::with_mode(mode)
        }
    }

    #[test]
    fn overlap_examples() {
        let zeros = QuantumState::zeros(vec!["x", "y", "z"]);
        assert!((overlap(&zeros, &ProductAnsatz::real(vec![0.0; 3])).unwrap() - 1.0).norm() < 1e-15);
        let g3 = reduced_crio_state(1).unwrap();
        let v = overlap(&g3, &symmetric_ansatz(3)).unwrap();
        assert!((v.re - 1.0 / SQRT_2).abs() < 1e-12 && v.im.abs() < 1e-15);
        assert!(overlap(&g3, &symmetric_ansatz(2)).is_err());
    }

    #[test]
    fn overlap_against_brute_force_sum() {
        let g5 = reduced_crio_state(2).unwrap();
        let v = overlap(&g5, &symmetric_ansatz(5)).unwrap();
        // every product amplitude is 2^{-5/2}
        let brute: f64 = g5.amplitudes().iter().map(|a| a.re).sum::<f64>() / 2f64.powf(2.5);
        assert!((v.re - brute).abs() < 1e-12);
        assert!((v.re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reduction_matches_expected_states() {
        let g3 = hadamard_reduce(&crio_state(1).unwrap(), &["a1"]).unwrap();
        for (i, a) in g3.amplitudes().iter().enumerate() {
            let want = if [0b000, 0b011, 0b110, 0b101].contains(&i) { 0.5 } else { 0.0 };
            assert!((a.re - want).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
        for n in 1..=3 {
            let g = reduced_crio_state(n).unwrap();
            assert!(g.amplitudes().iter().all(|a| a.re >= -1e-12 && a.im.abs() < 1e-12));
        }
        // H on the group qubits alone leaves signs behind
        let partial = hadamard_reduce(&crio_state(2).unwrap(), &["a3"]).unwrap();
        assert!(partial.amplitudes().iter().any(|a| a.re < -1e-12));
        let h5 = crio_state(2).unwrap();
        let twice = hadamard_reduce(&h5, &["a2", "a2"]).unwrap();
        assert!(twice.amplitudes().iter().zip(h5.amplitudes()).all(|(x, y)| (x - y).norm() < 1e-14));
    }

    #[test]
    fn closed_form_examples() {
        for n in 1..=4 {
            let v = closed_form_overlap(n, &vec![FRAC_PI_4; 2 * n + 1]).unwrap();
            assert!((v - 2f64.powf(-(n as f64) / 2.0)).abs() < 1e-12);
        }
        // θ_1 = 0, rest π/4, N = 2: cosine product is 1
        let mut th = vec![FRAC_PI_4; 5];
        th[0] = 0.0;
        let v = closed_form_overlap(2, &th).unwrap();
        assert!((v - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        let exact = overlap(&reduced_crio_state(2).unwrap(), &ProductAnsatz::real(th)).unwrap();
        assert!((v - exact.re).abs() < 1e-12);
        // θ_1 = π/2 with every pair summing to π/2
        let th = [FRAC_PI_2, 0.1, 0.4, FRAC_PI_2 - 0.1, FRAC_PI_2 - 0.4];
        assert!((closed_form_overlap(2, &th).unwrap() - 2f64.powf(-1.5)).abs() < 1e-12);
        assert!(closed_form_overlap(2, &[0.0, 0.0, 0.0, 0.0, 2.0]).is_err());
        assert!(closed_form_overlap(2, &[0.0; 4]).is_err());
    }

    #[test]
    fn symmetric_point_is_stationary() {
        for n in 1..=3 {
            let m = 2 * n + 1;
            let h = 1e-5;
            let mut grad_sq = 0.0;
            for i in 0..m {
                let mut p = vec![FRAC_PI_4; m];
                let mut q = p.clone();
                p[i] += h;
                q[i] -= h;
                let d = (closed_form_overlap(n, &p).unwrap() - closed_form_overlap(n, &q).unwrap()) / (2.0 * h);
                grad_sq += d * d;
            }
            assert!(grad_sq.sqrt() <= 1e-6);
        }
    }

    #[test]
    fn separable_state_has_zero_gm() {
        let plus = QuantumState::plus(vec!["x", "y", "z"]);
        let r = gm_optimize(&plus, &fast(GmMode::Nonneg)).unwrap();
        assert!((r.lambda_sq - 1.0).abs() < 1e-12 && r.g.abs() < 1e-11);
        let r = gm_optimize(&plus, &fast(GmMode::General)).unwrap();
        assert!((r.lambda_sq - 1.0).abs() < 1e-10);
    }

    #[test]
    fn three_qubit_graph_state() {
        let r = gm_crio(1, &fast(GmMode::Nonneg)).unwrap();
        assert!((r.lambda_sq - 0.5).abs() < 1e-10);
        assert!((r.g - 1.0).abs() < 1e-9);
        assert!((r.g + r.lambda_sq.log2()).abs() < 1e-12);
        for t in &r.argmax.thetas {
            assert!((t - FRAC_PI_4).abs() < 1e-4, "{:?}", r.argmax);
        }
        assert!(r.converged);
    }

    #[test]
    fn nonneg_mode_rejects_signed_states() {
        let h3 = crio_state(1).unwrap();
        assert!(matches!(
            gm_optimize(&h3, &fast(GmMode::Nonneg)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn general_mode_agrees_with_reduced_nonneg_mode() {
        for n in 1..=2 {
            let general = gm_optimize(&crio_state(n).unwrap(), &fast(GmMode::General)).unwrap();
            let nonneg = gm_crio(n, &fast(GmMode::Nonneg)).unwrap();
            assert!((general.g - nonneg.g).abs() < 1e-6, "N={n}: {} vs {}", general.g, nonneg.g);
        }
    }

    #[test]
    fn bell_pairs() {
        for n in 1..=2 {
            let r = gm_phi(n, &fast(GmMode::Nonneg)).unwrap();
            assert!((r.g - n as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn ascent_is_monotone_and_bounded() {
        let state = reduced_crio_state(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let start = ProductAnsatz::real((0..5).map(|_| rng.random_range(0.0..FRAC_PI_2)).collect());
            let (_, v, hist) = ascend(&state, start, GmMode::Nonneg, 1e-10, 500).unwrap();
            assert!(hist.windows(2).all(|w| w[1] >= w[0]));
            assert!(v <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn restarts_are_deterministic() {
        let s = reduced_crio_state(2).unwrap();
        let a = gm_optimize(&s, &fast(GmMode::Nonneg)).unwrap();
        let b = gm_optimize(&s, &fast(GmMode::Nonneg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_and_table_layout() {
        let r = gm_crio(1, &fast(GmMode::Nonneg)).unwrap();
        let v = serde_json::to_value(r.report("h3", 1)).unwrap();
        for k in ["state_id", "N", "lambda_sq", "G", "argmax_thetas", "restarts", "converged"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        let rows = resource_table(1, &fast(GmMode::Nonneg)).unwrap();
        let csv = resource_table_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "systems,state,gm");
        assert!(lines[1].starts_with("3,h_3,1.0000000"));
        assert!(lines[2].starts_with("2,phi_2,1.0000000"));
    }
}
