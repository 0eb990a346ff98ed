use super::*;
use crate::graphstate::Graph;
use crate::qcore::index_to_bits;
use crate::stator::OperatorWord;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn random_axis(rng: &mut ChaCha8Rng) -> PauliAxis {
    let z: f64 = rng.random_range(-1.0..1.0);
    PauliAxis::from_angles(z.acos(), rng.random_range(0.0..std::f64::consts::TAU))
}

fn random_qubit(rng: &mut ChaCha8Rng) -> [C64; 2] {
    let v = [
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    ];
    let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / norm, v[1] / norm]
}

fn random_config(n: usize, rng: &mut ChaCha8Rng) -> ProtocolConfig {
    ProtocolConfig::new(
        n,
        (0..n).map(|_| random_axis(rng)).collect(),
        (0..n).map(|_| rng.random_range(-3.2..3.2)).collect(),
        (0..n).map(|_| random_qubit(rng)).collect(),
    )
}

#[test]
fn zero_angle_is_identity_on_every_branch() {
    let axis = PauliAxis::from_angles(1.1, 0.3);
    let psi = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
    let r = run_tripartite(axis, 0.0, psi, &OutcomeMode::Enumerate, true).unwrap();
    assert_eq!(r.branches.len(), 8);
    for b in &r.branches {
        assert!(b.fidelity >= 1.0 - 1e-12);
        let fin = QuantumState::try_from(b.final_state.clone().unwrap()).unwrap();
        let orig = QuantumState::product(vec!["C"], &[psi]).unwrap();
        assert!(fidelity_up_to_phase(&fin, &orig).unwrap() >= 1.0 - 1e-12);
    }
}

#[test]
fn controller_minus_outcome_triggers_sigma_x_on_b() {
    let axis = PauliAxis::from_angles(0.4, 2.0);
    let psi = [ONE, ZERO];
    let r = run_tripartite(axis, 0.9, psi, &OutcomeMode::Forced(vec![1, 0, 0]), true).unwrap();
    let b = &r.branches[0];
    assert_eq!(
        b.corrections,
        vec![Correction {
            step: 3,
            party: "Bob".into(),
            qubit: "b".into(),
            op: "σ_x".into()
        }]
    );
    assert!(b.fidelity >= 1.0 - 1e-12);

    // dropping the correction breaks the branch
    let mut plan = Plan::crio(
        Naming::tripartite(),
        CrioTopology::full(1).unwrap(),
        vec![axis],
        vec![0.9],
        true,
        0,
    )
    .unwrap();
    plan.actions
        .retain(|a| !matches!(a, Action::Conditional { step: 3, .. }));
    let broken = execute(&plan, &[psi], &OutcomeMode::Forced(vec![1, 0, 0])).unwrap();
    assert!(broken.branches[0].fidelity < 1.0 - 1e-3);
}

#[test]
fn tripartite_quarter_turn_about_x() {
    let r = run_tripartite(PauliAxis::X, FRAC_PI_2, [ONE, ZERO], &OutcomeMode::Enumerate, true)
        .unwrap();
    let one = QuantumState::basis_state(vec!["C"], &[1]).unwrap();
    for b in &r.branches {
        let fin = QuantumState::try_from(b.final_state.clone().unwrap()).unwrap();
        assert!(fidelity_up_to_phase(&fin, &one).unwrap() >= 1.0 - 1e-12);
    }
}

#[test]
fn tripartite_matches_generic_single_group() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let cfg = random_config(1, &mut rng);
        let generic = run_crio(&cfg).unwrap();
        let named = run_tripartite(
            cfg.axes[0],
            cfg.betas[0],
            cfg.target_states[0],
            &OutcomeMode::Enumerate,
            true,
        )
        .unwrap();
        assert_eq!(generic.branches.len(), named.branches.len());
        for (g, t) in generic.branches.iter().zip(&named.branches) {
            assert_eq!(g.bits, t.bits);
            assert!((g.probability - t.probability).abs() < 1e-14);
            let ga = &g.final_state.as_ref().unwrap().amplitudes;
            let ta = &t.final_state.as_ref().unwrap().amplitudes;
            for (x, y) in ga.iter().zip(ta) {
                assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
            }
            assert_eq!(g.corrections.len(), t.corrections.len());
        }
    }
}

#[test]
fn five_party_random_run_succeeds_on_all_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let axes = [random_axis(&mut rng), random_axis(&mut rng)];
    let targets = [random_qubit(&mut rng), random_qubit(&mut rng)];
    let (alpha, beta) = (0.37, -2.2);
    let r = run_fivepartite(axes, alpha, beta, targets, &OutcomeMode::Enumerate, true).unwrap();
    assert_eq!(r.branches.len(), 32);
    assert!((r.total_probability() - 1.0).abs() < 1e-10);
    // independent oracle: apply the two rotations directly
    let direct = QuantumState::product(
        vec!["D", "E"],
        &[
            rotation(&axes[0], alpha).apply(targets[0]),
            rotation(&axes[1], beta).apply(targets[1]),
        ],
    )
    .unwrap();
    for b in &r.branches {
        let fin = QuantumState::try_from(b.final_state.clone().unwrap()).unwrap();
        assert!(fidelity_up_to_phase(&fin, &direct).unwrap() >= 1.0 - 1e-10);
    }
}

#[test]
fn five_party_zero_angles_leave_targets_unchanged() {
    let targets = [[ONE, ZERO], [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)]];
    let axes = [PauliAxis::Y, PauliAxis::from_angles(0.5, 0.5)];
    let r = run_fivepartite(axes, 0.0, 0.0, targets, &OutcomeMode::Enumerate, true).unwrap();
    let orig = QuantumState::product(vec!["D", "E"], &targets).unwrap();
    for b in &r.branches {
        let fin = QuantumState::try_from(b.final_state.clone().unwrap()).unwrap();
        assert!(fidelity_up_to_phase(&fin, &orig).unwrap() >= 1.0 - 1e-12);
    }
}

#[test]
fn five_party_step_four_corrections_go_to_partners() {
    let axes = [PauliAxis::Z, PauliAxis::X];
    let t = [[ONE, ZERO], [ONE, ZERO]];
    // outcomes: a, d, e, b, c
    let r = run_fivepartite(axes, 0.1, 0.2, t, &OutcomeMode::Forced(vec![0, 1, 1, 0, 0]), true)
        .unwrap();
    let step4: Vec<(String, String)> = r.branches[0]
        .corrections
        .iter()
        .filter(|c| c.step == 4)
        .map(|c| (c.party.clone(), c.qubit.clone()))
        .collect();
    assert_eq!(
        step4,
        vec![("Bob".into(), "b".into()), ("Charlie".into(), "c".into())]
    );
}

#[test]
fn random_runs_succeed_for_small_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 1..=3 {
        for _ in 0..4 {
            let r = run_crio(&random_config(n, &mut rng)).unwrap();
            assert_eq!(r.branches.len(), 1 << (2 * n + 1));
            assert!((r.total_probability() - 1.0).abs() < 1e-10);
            assert!(r.succeeded(1e-10), "N={n}: {}", r.min_fidelity());
        }
    }
}

#[test]
fn corrections_follow_broadcast_bits() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 2;
    let r = run_crio(&random_config(n, &mut rng)).unwrap();
    for b in &r.branches {
        let bit = |q: &str| b.outcomes.iter().find(|m| m.qubit == q).unwrap().outcome;
        let mut want = Vec::new();
        if bit("a1") == 1 {
            want.push((3, "a2".to_string()));
            want.push((3, "a3".to_string()));
        }
        for j in n + 2..=2 * n + 1 {
            if bit(&format!("a{j}")) == 1 {
                want.push((4, format!("a{}", j - n)));
            }
        }
        for k in 2..=n + 1 {
            if bit(&format!("a{k}")) == 1 {
                want.push((6, format!("O{}", k + n)));
            }
        }
        let got: Vec<(u8, String)> = b.corrections.iter().map(|c| (c.step, c.qubit.clone())).collect();
        assert_eq!(got, want, "branch {}", b.bits);
    }
}

#[test]
fn message_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=3 {
        let cfg = random_config(n, &mut rng);
        let plan = cfg.plan().unwrap();
        assert_eq!(plan.num_measurements(), 1 + 2 * n);
        let r = run_crio(&cfg).unwrap();
        assert_eq!(r.measurements_per_branch, 1 + 2 * n);
        for b in &r.branches {
            assert_eq!(b.outcomes.len(), 1 + 2 * n);
            // STEP 3 counted once per recipient
            assert_eq!(b.transcript.len(), n + 2 * n);
            for m in &b.transcript {
                let v = serde_json::to_value(m).unwrap();
                let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
                assert_eq!(keys, ["from", "payload", "qubit", "step", "to"]);
                assert!(m.payload <= 1);
            }
        }
    }
}

#[test]
fn knowledge_is_split_between_parties() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = random_config(2, &mut rng);
    let plan = cfg.plan().unwrap();
    let owners: Vec<usize> = ["a1", "a2", "a3", "a4", "a5", "O4", "O5"]
        .iter()
        .map(|q| plan.parties.iter().filter(|p| p.owned_qubits.contains(*q)).count())
        .collect();
    assert!(owners.iter().all(|&c| c == 1));
    for p in &plan.parties {
        assert!(!(p.knows_angle.is_some() && p.knows_axis.is_some()));
    }
    assert_eq!(plan.party("A2").unwrap().knows_angle, Some(cfg.betas[0]));
    assert_eq!(plan.party("A4").unwrap().knows_axis, Some(cfg.axes[0]));
}

#[test]
fn locality_is_enforced() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = random_config(1, &mut rng);
    let mut plan = cfg.plan().unwrap();
    if let Some(Action::Gate { party, .. }) = plan
        .actions
        .iter_mut()
        .find(|a| matches!(a, Action::Gate { step: 5, .. }))
    {
        *party = "A3".into();
    }
    assert!(matches!(
        execute(&plan, &cfg.target_states, &OutcomeMode::Enumerate),
        Err(Error::LocalityViolation { .. })
    ));

    // a correction conditioned on a bit nobody sent
    let mut plan = cfg.plan().unwrap();
    plan.actions.retain(|a| !matches!(a, Action::Send { step: 4, .. }));
    assert!(matches!(
        execute(&plan, &cfg.target_states, &OutcomeMode::Enumerate),
        Err(Error::LocalityViolation { .. })
    ));
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut cfg = ProtocolConfig::new(1, vec![PauliAxis::X], vec![0.1], vec![[ONE, ONE]]);
    assert!(matches!(run_crio(&cfg), Err(Error::Unnormalized(_))));
    cfg.target_states = vec![[ONE, ZERO]];
    cfg.betas = vec![];
    assert!(matches!(run_crio(&cfg), Err(Error::ArityMismatch { .. })));
    let mut cfg = ProtocolConfig::new(2, vec![PauliAxis::X; 2], vec![0.1; 2], vec![[ONE, ZERO]; 2]);
    cfg.controlled_groups = Some(vec![4]);
    assert!(matches!(run_crio(&cfg), Err(Error::GroupOutOfRange { .. })));
}

#[test]
fn sampled_runs_are_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cfg = random_config(3, &mut rng);
    cfg.mode = RunMode::Sample;
    cfg.seed = 99;
    let a = run_crio(&cfg).unwrap();
    let b = run_crio(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.branches.len(), 1);
    assert!(a.succeeded(1e-10));
    let distinct: BTreeSet<String> = (0..16)
        .map(|s| {
            cfg.seed = s;
            run_crio(&cfg).unwrap().branches[0].bits.clone()
        })
        .collect();
    assert!(distinct.len() > 1);
}

#[test]
fn config_json_round_trip() {
    let json = r#"{"N":1,"axes":[[0,0,1]],"betas":[0.5],"target_states":[[[1,0],[0,0]]],
                   "mode":"sample","seed":7}"#;
    let cfg: ProtocolConfig = serde_json::from_str(json).unwrap();
    assert!(cfg.permitted && cfg.controlled_groups.is_none());
    assert_eq!(cfg.outcome_mode(), OutcomeMode::Sample(7));
    let back: ProtocolConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn partial_control_uses_reduced_graph_and_succeeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut cfg = random_config(2, &mut rng);
    cfg.controlled_groups = Some(vec![]);
    let g = crio_graph(&cfg.topology().unwrap());
    assert_eq!(g, Graph::new(5, [(1, 2), (1, 4), (3, 5)]).unwrap());
    let r = run_crio(&cfg).unwrap();
    assert_eq!(r.branches.len(), 32);
    assert!(r.min_target_fidelity(0) >= 1.0 - 1e-10);
    assert!(r.succeeded(1e-10));
    // only the controlled group hears from the controller
    for b in &r.branches {
        let step3: Vec<&str> = b
            .transcript
            .iter()
            .filter(|m| m.step == 3)
            .map(|m| m.to.as_str())
            .collect();
        assert_eq!(step3, ["A2"]);
    }
}

#[test]
fn denial_blocks_generic_rotation() {
    let psi = [C64::new(0.8, 0.0), C64::new(0.0, 0.6)];
    let rep = control_denial_report(1, vec![PauliAxis::X], vec![0.7], vec![psi]).unwrap();
    assert!(rep.purity < 1.0 - 1e-6);
    assert!(rep.blocked, "{rep:?}");
    for g in &rep.guesses {
        assert_eq!(g.branches, 4);
        assert!(g.min_fidelity < 1.0 - 1e-6);
    }
}

#[test]
fn denial_with_zero_angle_still_decoheres_target() {
    // Without the controller's bit the target is left as an equal mixture of
    // |ψ⟩ and σ_n|ψ⟩, so even the identity is not delivered for generic |ψ⟩.
    let psi = [C64::new(0.8, 0.0), C64::new(0.0, 0.6)];
    let rep = control_denial_report(1, vec![PauliAxis::X], vec![0.0], vec![psi]).unwrap();
    let overlap = (psi[0].conj() * psi[1] + psi[1].conj() * psi[0]).norm_sqr();
    let want = ((1.0 + overlap) / 2.0).sqrt();
    for g in &rep.guesses {
        assert!((g.min_fidelity - want).abs() < 1e-10, "{g:?}");
    }
    // an eigenstate of σ_n survives
    let plus = [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)];
    let rep = control_denial_report(1, vec![PauliAxis::X], vec![0.0], vec![plus]).unwrap();
    assert!(rep.best_min_fidelity >= 1.0 - 1e-12);
}

#[test]
fn denial_purity_for_two_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cfg = random_config(2, &mut rng);
    let rep = control_denial_report(2, cfg.axes, cfg.betas, cfg.target_states).unwrap();
    assert!((rep.purity - 0.5).abs() < 1e-10);
    assert_eq!(rep.guesses[0].branches, 16);
}

#[test]
fn stator_after_hadamard_layer_has_double_register_form() {
    let axes = vec![PauliAxis::from_angles(0.3, 1.0), PauliAxis::from_angles(2.0, 4.0)];
    let plan = Plan::crio(Naming::fivepartite(), CrioTopology::full(2).unwrap(), axes.clone(), vec![0.2, 0.4], true, 0)
        .unwrap();
    let snaps = symbolic_stators(&plan, &[0, 0, 0, 0, 0]).unwrap();
    assert_eq!(snaps[1].0, 1);
    assert_eq!(snaps[1].1.num_terms(), 32);
    let (step, s) = &snaps[2];
    assert_eq!(*step, 2);
    // |+⟩_a Σ_q |q, q⟩⊗σ^q + |−⟩_a Σ_q |q, q̄⟩⊗σ^{q̄} over (b,c | d,e)
    let mut expected = Stator::new(vec!["a", "b", "c", "d", "e"], vec!["D", "E"], axes).unwrap();
    for q in 0..4 {
        let qs = index_to_bits(q, 2);
        let flipped: Vec<u8> = qs.iter().map(|b| b ^ 1).collect();
        for a in [0u8, 1] {
            let sign = if a == 0 { ONE } else { -ONE };
            expected
                .add_term([vec![a], qs.clone(), qs.clone()].concat(), OperatorWord(qs.clone()), ONE)
                .unwrap();
            expected
                .add_term(
                    [vec![a], qs.clone(), flipped.clone()].concat(),
                    OperatorWord(flipped.clone()),
                    sign,
                )
                .unwrap();
        }
    }
    assert!(s.equivalent_up_to_scalar(&expected, 1e-12));
    assert_eq!(s.num_terms(), 16);
}

#[test]
fn final_control_stator_is_an_eigenoperator() {
    // just before STEP 5 the stator is Σ_q |q⟩⊗σ^q on the operators' qubits
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in 1..=3 {
        let cfg = random_config(n, &mut rng);
        let plan = cfg.plan().unwrap();
        for outcomes in [vec![0u8; 2 * n + 1], vec![1u8; 2 * n + 1]] {
            let snaps = symbolic_stators(&plan, &outcomes).unwrap();
            let (_, s) = snaps.iter().find(|(st, _)| *st == 4).unwrap();
            assert_eq!(s.num_terms(), 1 << n);
            let alphas: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            assert!(s.eigenoperator_residual(&alphas).unwrap() <= 1e-12);
        }
    }
}

#[test]
fn dual_path_agreement_on_every_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for n in 1..=2 {
        let cfg = random_config(n, &mut rng);
        let plan = cfg.plan().unwrap();
        let m = plan.num_measurements();
        for b in 0..(1usize << m) {
            let outcomes = index_to_bits(b, m);
            let steps = dual_path_check(&plan, &outcomes).unwrap();
            assert_eq!(steps.len(), if n == 1 { 6 } else { 7 });
            for s in steps {
                assert!(s.mismatch <= 1e-10, "N={n} branch {b} step {}: {}", s.step, s.mismatch);
            }
        }
    }
    // one branch at three groups
    let cfg = random_config(3, &mut rng);
    let steps = dual_path_check(&cfg.plan().unwrap(), &[1, 0, 1, 1, 0, 0, 1]).unwrap();
    assert!(steps.iter().all(|s| s.mismatch <= 1e-10));
}
