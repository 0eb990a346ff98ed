//! The CRIO protocol as an explicit LOCC run.
//!
//! A [`Plan`] lists every local action and classical message of STEPs 1–6.
//! The executor enforces ownership: a party may only touch its own qubits,
//! and may only condition on outcomes it measured or was sent. Outcomes are
//! enumerated exhaustively, sampled from a seeded RNG, or forced.
//!
//! The same plan also runs on a symbolic [`Stator`], which lets each step be
//! cross-checked against stators re-extracted from simulated states.

mod plan;

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use plan::{Action, Condition, LocalOp, Naming, Party, Plan};

use crate::error::{Error, Result};
use crate::graphstate::{build_graph_state_labeled, crio_graph, CrioTopology};
use crate::qcore::{
    fidelity_up_to_phase, rotation, MeasurementRecord, PauliAxis, QuantumState, StateExport,
};
use crate::stator::{default_probes, stator_from_states, ProbeRun, Stator};
use crate::{ALGEBRA_TOL, PIPELINE_TOL};

/// How measurement outcomes are chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeMode {
    /// Every branch with nonzero probability.
    Enumerate,
    /// One branch drawn with a ChaCha8 stream seeded by the value.
    Sample(u64),
    /// One branch with outcomes taken in measurement order.
    Forced(Vec<u8>),
}

/// Mode names accepted in run configuration files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    #[default]
    Enumerate,
    Sample,
}

fn default_true() -> bool {
    true
}

/// Run configuration, also the JSON file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub axes: Vec<PauliAxis>,
    pub betas: Vec<f64>,
    pub target_states: Vec<[C64; 2]>,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub permitted: bool,
    /// Groups `k ∈ 3..=N+1` wired to the controller; all when absent.
    #[serde(default)]
    pub controlled_groups: Option<Vec<usize>>,
    /// STEP-3 correction bit used when the controller stays silent.
    #[serde(default)]
    pub guess: u8,
}

impl ProtocolConfig {
    pub fn new(n: usize, axes: Vec<PauliAxis>, betas: Vec<f64>, target_states: Vec<[C64; 2]>) -> Self {
        ProtocolConfig {
            n,
            axes,
            betas,
            target_states,
            mode: RunMode::Enumerate,
            seed: 0,
            permitted: true,
            controlled_groups: None,
            guess: 0,
        }
    }

    pub fn outcome_mode(&self) -> OutcomeMode {
        match self.mode {
            RunMode::Enumerate => OutcomeMode::Enumerate,
            RunMode::Sample => OutcomeMode::Sample(self.seed),
        }
    }

    pub fn topology(&self) -> Result<CrioTopology> {
        match &self.controlled_groups {
            None => CrioTopology::full(self.n),
            Some(g) => CrioTopology::new(self.n, g.iter().copied()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::OutOfRange {
                value: 0.0,
                range: "N >= 1",
            });
        }
        for len in [self.axes.len(), self.betas.len(), self.target_states.len()] {
            if len != self.n {
                return Err(Error::ArityMismatch {
                    expected: self.n,
                    got: len,
                });
            }
        }
        for t in &self.target_states {
            check_normalized(t)?;
        }
        self.topology()?;
        Ok(())
    }

    pub fn plan(&self) -> Result<Plan> {
        self.validate()?;
        Plan::crio(
            Naming::generic(self.n),
            self.topology()?,
            self.axes.clone(),
            self.betas.clone(),
            self.permitted,
            self.guess,
        )
    }
}

fn check_normalized(v: &[C64; 2]) -> Result<()> {
    let norm = v[0].norm_sqr() + v[1].norm_sqr();
    if (norm - 1.0).abs() > PIPELINE_TOL {
        return Err(Error::Unnormalized(norm));
    }
    Ok(())
}

/// One classical bit sent between parties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalMessage {
    pub from: String,
    pub to: String,
    pub step: u8,
    /// The measured qubit the bit refers to.
    pub qubit: String,
    pub payload: u8,
}

/// A conditional operation that actually fired.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub step: u8,
    pub party: String,
    pub qubit: String,
    pub op: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Outcome bits in measurement order.
    pub bits: String,
    pub outcomes: Vec<MeasurementRecord>,
    pub probability: f64,
    pub corrections: Vec<Correction>,
    pub transcript: Vec<ClassicalMessage>,
    /// Final target state when it is pure (all shared qubits measured).
    pub final_state: Option<StateExport>,
    /// Fidelity of the targets with the requested output.
    pub fidelity: f64,
    pub target_fidelities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    #[serde(rename = "N")]
    pub n: usize,
    pub permitted: bool,
    pub guess: Option<u8>,
    pub controlled_groups: Vec<usize>,
    pub targets: Vec<String>,
    pub measurements_per_branch: usize,
    pub branches: Vec<Branch>,
}

impl ProtocolResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn min_fidelity(&self) -> f64 {
        self.branches.iter().map(|b| b.fidelity).fold(1.0, f64::min)
    }

    /// Probability-weighted mean fidelity.
    pub fn mean_fidelity(&self) -> f64 {
        let p = self.total_probability();
        self.branches.iter().map(|b| b.probability * b.fidelity).sum::<f64>() / p
    }

    pub fn min_target_fidelity(&self, index: usize) -> f64 {
        self.branches
            .iter()
            .map(|b| b.target_fidelities[index])
            .fold(1.0, f64::min)
    }

    /// Every branch reaches fidelity `1 − tol`.
    pub fn succeeded(&self, tol: f64) -> bool {
        self.min_fidelity() >= 1.0 - tol
    }
}

#[derive(Clone)]
struct Walker {
    state: QuantumState,
    outcomes: BTreeMap<String, u8>,
    records: Vec<MeasurementRecord>,
    corrections: Vec<Correction>,
    transcript: Vec<ClassicalMessage>,
    known: BTreeSet<(String, String)>,
    probability: f64,
}

enum Chooser<'a> {
    Enumerate,
    Sample(Box<ChaCha8Rng>),
    Forced(std::slice::Iter<'a, u8>),
}

/// Applies a non-measurement action.
fn apply_action(plan: &Plan, action: &Action, w: &mut Walker) -> Result<()> {
    match action {
        Action::Gate { party, qubit, op, .. } => {
            plan.check_locality(party, &[qubit])?;
            w.state.apply_1q(&op.matrix(), qubit)
        }
        Action::ControlledSigma {
            party,
            control,
            target,
            axis,
            ..
        } => {
            plan.check_locality(party, &[control, target])?;
            w.state.apply_controlled(control, target, &axis.matrix())
        }
        Action::Send { step, from, to, qubit } => {
            plan.check_locality(from, &[qubit])?;
            let payload = *w.outcomes.get(qubit).ok_or_else(|| Error::LocalityViolation {
                party: from.clone(),
                qubit: qubit.clone(),
            })?;
            plan.party(to)?;
            w.known.insert((to.clone(), qubit.clone()));
            w.transcript.push(ClassicalMessage {
                from: from.clone(),
                to: to.clone(),
                step: *step,
                qubit: qubit.clone(),
                payload,
            });
            Ok(())
        }
        Action::Conditional {
            step,
            party,
            qubit,
            op,
            on,
        } => {
            plan.check_locality(party, &[qubit])?;
            let bit = match on {
                Condition::Guess(g) => *g,
                Condition::Outcome(source) => {
                    let own = plan.party(party)?.owned_qubits.contains(source);
                    if !own && !w.known.contains(&(party.clone(), source.clone())) {
                        return Err(Error::LocalityViolation {
                            party: party.clone(),
                            qubit: source.clone(),
                        });
                    }
                    *w.outcomes.get(source).ok_or_else(|| Error::LocalityViolation {
                        party: party.clone(),
                        qubit: source.clone(),
                    })?
                }
            };
            if bit == 1 {
                w.state.apply_1q(&op.matrix(), qubit)?;
                w.corrections.push(Correction {
                    step: *step,
                    party: party.clone(),
                    qubit: qubit.clone(),
                    op: op.to_string(),
                });
            }
            Ok(())
        }
        Action::Measure { .. } => unreachable!("measurements are handled by the walker"),
    }
}

fn walk(
    plan: &Plan,
    start: usize,
    mut w: Walker,
    chooser: &mut Chooser<'_>,
    out: &mut Vec<Walker>,
) -> Result<()> {
    for idx in start..plan.actions.len() {
        let action = &plan.actions[idx];
        let Action::Measure {
            party, qubit, basis, ..
        } = action
        else {
            apply_action(plan, action, &mut w)?;
            continue;
        };
        plan.check_locality(party, &[qubit])?;
        let probs = w.state.outcome_probabilities(qubit, *basis)?;
        let chosen: Vec<u8> = match chooser {
            Chooser::Enumerate => (0..2u8).filter(|&o| probs[o as usize] > ALGEBRA_TOL).collect(),
            Chooser::Sample(rng) => {
                let r: f64 = rand::Rng::random(rng);
                vec![u8::from(r >= probs[0])]
            }
            Chooser::Forced(it) => {
                let o = *it.next().ok_or(Error::ArityMismatch {
                    expected: plan.num_measurements(),
                    got: 0,
                })?;
                vec![o & 1]
            }
        };
        for outcome in chosen {
            let mut next = w.clone();
            let (record, rest) = next.state.discard_with_outcome(qubit, *basis, outcome)?;
            next.probability *= record.probability;
            next.state = rest;
            next.outcomes.insert(qubit.clone(), outcome);
            next.records.push(record);
            walk(plan, idx + 1, next, chooser, out)?;
        }
        return Ok(());
    }
    out.push(w);
    Ok(())
}

fn initial_state(plan: &Plan, targets: &[[C64; 2]]) -> Result<QuantumState> {
    let held = QuantumState::product(plan.naming.targets().to_vec(), targets)?;
    initial_with(plan, &held)
}

/// Graph state on the shared qubits followed by the held target register.
fn initial_with(plan: &Plan, held: &QuantumState) -> Result<QuantumState> {
    let graph = crio_graph(&plan.topology);
    let shared = build_graph_state_labeled(&graph, plan.naming.qubits())?;
    shared.tensor(held)
}

/// `⊗_j e^{iβ_j σ_{n_j}}|Ψ_j⟩`, one factor per target.
fn expected_factors(plan: &Plan, targets: &[[C64; 2]]) -> Vec<[C64; 2]> {
    targets
        .iter()
        .zip(plan.axes.iter().zip(&plan.betas))
        .map(|(t, (axis, beta))| rotation(axis, *beta).apply(*t))
        .collect()
}

/// `sqrt(⟨e|ρ|e⟩)` for the reduced state of `state` on `kept`.
fn mixed_fidelity(state: &QuantumState, kept: &[String], expected: &QuantumState) -> Result<f64> {
    let rho = state.reduced_density(kept)?;
    let e = expected.amplitudes();
    let mut acc = C64::new(0.0, 0.0);
    for r in 0..e.len() {
        for c in 0..e.len() {
            acc += e[r].conj() * rho[(r, c)] * e[c];
        }
    }
    Ok(acc.re.max(0.0).sqrt().min(1.0))
}

fn finish(plan: &Plan, targets: &[[C64; 2]], w: Walker) -> Result<Branch> {
    let names = plan.naming.targets().to_vec();
    let factors = expected_factors(plan, targets);
    let expected = QuantumState::product(names.clone(), &factors)?;
    let pure = w.state.num_qubits() == names.len();
    let (fidelity, final_state) = if pure {
        let fin = w.state.reordered(&names)?;
        (fidelity_up_to_phase(&fin, &expected)?, Some(fin.to_export()))
    } else {
        (mixed_fidelity(&w.state, &names, &expected)?, None)
    };
    let mut target_fidelities = Vec::with_capacity(names.len());
    for (name, f) in names.iter().zip(&factors) {
        let single = QuantumState::product(vec![name.clone()], &[*f])?;
        target_fidelities.push(mixed_fidelity(&w.state, std::slice::from_ref(name), &single)?);
    }
    Ok(Branch {
        bits: w.records.iter().map(|r| char::from(b'0' + r.outcome)).collect(),
        outcomes: w.records,
        probability: w.probability,
        corrections: w.corrections,
        transcript: w.transcript,
        final_state,
        fidelity,
        target_fidelities,
    })
}

/// Runs a plan on the given target inputs.
pub fn execute(plan: &Plan, targets: &[[C64; 2]], mode: &OutcomeMode) -> Result<ProtocolResult> {
    if targets.len() != plan.naming.n() {
        return Err(Error::ArityMismatch {
            expected: plan.naming.n(),
            got: targets.len(),
        });
    }
    for t in targets {
        check_normalized(t)?;
    }
    let start = Walker {
        state: initial_state(plan, targets)?,
        outcomes: BTreeMap::new(),
        records: Vec::new(),
        corrections: Vec::new(),
        transcript: Vec::new(),
        known: BTreeSet::new(),
        probability: 1.0,
    };
    let mut chooser = match mode {
        OutcomeMode::Enumerate => Chooser::Enumerate,
        OutcomeMode::Sample(seed) => Chooser::Sample(Box::new(ChaCha8Rng::seed_from_u64(*seed))),
        OutcomeMode::Forced(o) => Chooser::Forced(o.iter()),
    };
    let mut leaves = Vec::new();
    walk(plan, 0, start, &mut chooser, &mut leaves)?;
    let branches = leaves
        .into_iter()
        .map(|w| finish(plan, targets, w))
        .collect::<Result<Vec<_>>>()?;
    let permitted = plan.actions.iter().any(|a| {
        matches!(a, Action::Measure { qubit, .. } if qubit == plan.naming.qubit(1))
    });
    let guess = plan.actions.iter().find_map(|a| match a {
        Action::Conditional {
            on: Condition::Guess(g),
            ..
        } => Some(*g),
        _ => None,
    });
    Ok(ProtocolResult {
        n: plan.naming.n(),
        permitted,
        guess,
        controlled_groups: plan.topology.controlled_groups().iter().copied().collect(),
        targets: plan.naming.targets().to_vec(),
        measurements_per_branch: plan.num_measurements(),
        branches,
    })
}

/// General `(2N+1)`-party run with labels `a1..a_{2N+1}`.
pub fn run_crio(config: &ProtocolConfig) -> Result<ProtocolResult> {
    let plan = config.plan()?;
    execute(&plan, &config.target_states, &config.outcome_mode())
}

/// Alice, Bob and Charlie; Charlie's target `C` receives `e^{iασ_n}`.
pub fn run_tripartite(
    axis: PauliAxis,
    alpha: f64,
    target: [C64; 2],
    mode: &OutcomeMode,
    permitted: bool,
) -> Result<ProtocolResult> {
    let plan = Plan::crio(
        Naming::tripartite(),
        CrioTopology::full(1)?,
        vec![axis],
        vec![alpha],
        permitted,
        0,
    )?;
    execute(&plan, &[target], mode)
}

/// Alice..Eve; `D` receives `e^{iασ_{n_D}}` and `E` receives `e^{iβσ_{n_E}}`.
pub fn run_fivepartite(
    axes: [PauliAxis; 2],
    alpha: f64,
    beta: f64,
    targets: [[C64; 2]; 2],
    mode: &OutcomeMode,
    permitted: bool,
) -> Result<ProtocolResult> {
    let plan = Plan::crio(
        Naming::fivepartite(),
        CrioTopology::full(2)?,
        axes.to_vec(),
        vec![alpha, beta],
        permitted,
        0,
    )?;
    execute(&plan, &targets, mode)
}

/// Outcome of completing the protocol with one guessed STEP-3 bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessSummary {
    pub guess: u8,
    pub min_fidelity: f64,
    pub mean_fidelity: f64,
    pub branches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlDenialReport {
    #[serde(rename = "N")]
    pub n: usize,
    /// Purity of the non-controller qubits once the controller is ignored,
    /// taken after the last step that precedes the controller's measurement.
    pub purity: f64,
    pub guesses: Vec<GuessSummary>,
    /// Largest worst-branch fidelity over the guesses.
    pub best_min_fidelity: f64,
    /// Every guess leaves a branch below `1 − 1e-6`.
    pub blocked: bool,
}

/// Runs without the controller: the reduced state it leaves behind and the
/// fidelities reached when the STEP-3 bit is guessed.
pub fn control_denial_report(
    n: usize,
    axes: Vec<PauliAxis>,
    betas: Vec<f64>,
    targets: Vec<[C64; 2]>,
) -> Result<ControlDenialReport> {
    let mut config = ProtocolConfig::new(n, axes, betas, targets);
    config.permitted = false;
    let plan = config.plan()?;

    let mut w = Walker {
        state: initial_state(&plan, &config.target_states)?,
        outcomes: BTreeMap::new(),
        records: Vec::new(),
        corrections: Vec::new(),
        transcript: Vec::new(),
        known: BTreeSet::new(),
        probability: 1.0,
    };
    for action in plan.actions.iter().take_while(|a| a.step() <= 2) {
        apply_action(&plan, action, &mut w)?;
    }
    let controller = plan.naming.qubit(1);
    let others: Vec<String> = w
        .state
        .labels()
        .iter()
        .filter(|l| *l != controller)
        .cloned()
        .collect();
    let purity = w.state.reduced_purity(&others)?;

    let mut guesses = Vec::new();
    for g in [0u8, 1] {
        config.guess = g;
        let r = run_crio(&config)?;
        guesses.push(GuessSummary {
            guess: g,
            min_fidelity: r.min_fidelity(),
            mean_fidelity: r.mean_fidelity(),
            branches: r.branches.len(),
        });
    }
    let best_min_fidelity = guesses.iter().map(|g| g.min_fidelity).fold(0.0, f64::max);
    Ok(ControlDenialReport {
        n,
        purity,
        guesses,
        best_min_fidelity,
        blocked: best_min_fidelity < 1.0 - 1e-6,
    })
}

/// Stator after each step, obtained by running the plan symbolically on the
/// graph state with fixed outcomes. Step 0 is the initial stator.
pub fn symbolic_stators(plan: &Plan, outcomes: &[u8]) -> Result<Vec<(u8, Stator)>> {
    let graph = crio_graph(&plan.topology);
    let shared = build_graph_state_labeled(&graph, plan.naming.qubits())?;
    let targets = plan.naming.targets().to_vec();
    let mut s = Stator::from_control_state(&shared, targets.clone(), plan.axes.clone())?;
    let mut seen: BTreeMap<String, u8> = BTreeMap::new();
    let mut next_outcome = outcomes.iter();
    let mut snaps = vec![(0u8, s.clone())];
    for (idx, action) in plan.actions.iter().enumerate() {
        match action {
            Action::Gate { qubit, op, .. } => {
                s = s.apply_control_unitary(qubit, &op.matrix())?;
            }
            Action::ControlledSigma { control, target, .. } => {
                s = s.apply_controlled_sigma(control, target)?;
            }
            Action::Measure { qubit, basis, .. } => {
                let o = *next_outcome.next().ok_or(Error::ArityMismatch {
                    expected: plan.num_measurements(),
                    got: outcomes.len(),
                })? & 1;
                seen.insert(qubit.clone(), o);
                s = s.project_control(qubit, *basis, o)?;
            }
            Action::Send { .. } => {}
            Action::Conditional { qubit, op, on, .. } => {
                let bit = match on {
                    Condition::Guess(g) => *g,
                    Condition::Outcome(q) => seen[q],
                };
                if bit == 1 {
                    s = if targets.contains(qubit) {
                        match op {
                            LocalOp::ISigma(_) => s.apply_target_sigma(qubit, C64::new(0.0, 1.0))?,
                            other => {
                                return Err(Error::Parse(format!(
                                    "{other} on a target has no stator form"
                                )))
                            }
                        }
                    } else {
                        s.apply_control_unitary(qubit, &op.matrix())?
                    };
                }
            }
        }
        let boundary = plan
            .actions
            .get(idx + 1)
            .is_none_or(|a| a.step() != action.step());
        if boundary {
            snaps.push((action.step(), s.clone()));
        }
    }
    Ok(snaps)
}

/// Joint state after each step of a single forced branch.
fn simulated_snapshots(
    plan: &Plan,
    held: &QuantumState,
    outcomes: &[u8],
) -> Result<Vec<(u8, QuantumState)>> {
    let mut w = Walker {
        state: initial_with(plan, held)?,
        outcomes: BTreeMap::new(),
        records: Vec::new(),
        corrections: Vec::new(),
        transcript: Vec::new(),
        known: BTreeSet::new(),
        probability: 1.0,
    };
    let mut next_outcome = outcomes.iter();
    let mut snaps = vec![(0u8, w.state.clone())];
    for (idx, action) in plan.actions.iter().enumerate() {
        if let Action::Measure {
            party, qubit, basis, ..
        } = action
        {
            plan.check_locality(party, &[qubit])?;
            let o = *next_outcome.next().ok_or(Error::ArityMismatch {
                expected: plan.num_measurements(),
                got: outcomes.len(),
            })? & 1;
            let (_, rest) = w.state.discard_with_outcome(qubit, *basis, o)?;
            w.state = rest;
            w.outcomes.insert(qubit.clone(), o);
        } else {
            apply_action(plan, action, &mut w)?;
        }
        let boundary = plan
            .actions
            .get(idx + 1)
            .is_none_or(|a| a.step() != action.step());
        if boundary {
            snaps.push((action.step(), w.state.clone()));
        }
    }
    Ok(snaps)
}

/// Agreement between the symbolic and the re-extracted stator at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepAgreement {
    pub step: u8,
    pub terms: usize,
    pub mismatch: f64,
}

/// Runs one forced branch both symbolically and on statevectors fed with the
/// standard probe inputs, re-extracts the stator at every step and compares.
pub fn dual_path_check(plan: &Plan, outcomes: &[u8]) -> Result<Vec<StepAgreement>> {
    let symbolic = symbolic_stators(plan, outcomes)?;
    let targets = plan.naming.targets().to_vec();
    let probes = default_probes(&targets);
    let per_probe = probes
        .iter()
        .map(|p| simulated_snapshots(plan, p, outcomes))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(symbolic.len());
    for (i, (step, sym)) in symbolic.iter().enumerate() {
        let runs: Vec<ProbeRun> = probes
            .iter()
            .zip(&per_probe)
            .map(|(p, snaps)| ProbeRun {
                input: p.clone(),
                joint: snaps[i].1.clone(),
            })
            .collect();
        let controls: Vec<String> = runs[0]
            .joint
            .labels()
            .iter()
            .filter(|l| !targets.contains(l))
            .cloned()
            .collect();
        let extracted = stator_from_states(&runs, &controls, &targets, &plan.axes)?;
        out.push(StepAgreement {
            step: *step,
            terms: sym.num_terms(),
            mismatch: extracted.scalar_mismatch(sym),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
