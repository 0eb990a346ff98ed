use std::f64::consts::{FRAC_PI_4, TAU};
use std::fmt::Write as _;

use anyhow::Result;
use crio_core::gm::{gm_crio, gm_phi};
use crio_core::graphstate::{amplitude_oracle, crio_state};
use crio_core::povm::{
    enumerate_case2, outcome_probability, random_params, simulate_branch, success_rate,
};
use crio_core::protocol::{control_denial_report, run_crio};
use crio_core::qcore::index_to_bits;
use crio_core::{GmMode, GmOptions, PauliAxis, ProtocolConfig, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::Outcome;
use crate::report::{emit, envelope, header, Format};
use crate::Common;

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct VerifyConfig {
    seed: u64,
}

fn random_axis(rng: &mut ChaCha8Rng) -> PauliAxis {
    let z: f64 = rng.random_range(-1.0..1.0);
    PauliAxis::from_angles(z.acos(), rng.random_range(0.0..TAU))
}

fn random_qubit(rng: &mut ChaCha8Rng) -> [C64; 2] {
    let t: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let p: f64 = rng.random_range(0.0..TAU);
    [C64::new((t / 2.0).cos(), 0.0), C64::from_polar((t / 2.0).sin(), p)]
}

fn random_config(n: usize, rng: &mut ChaCha8Rng) -> ProtocolConfig {
    ProtocolConfig::new(
        n,
        (0..n).map(|_| random_axis(rng)).collect(),
        (0..n).map(|_| rng.random_range(-3.2..3.2)).collect(),
        (0..n).map(|_| random_qubit(rng)).collect(),
    )
}

fn checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut worst: f64 = 1.0;
    for n in 1..=3 {
        for _ in 0..5 {
            worst = worst.min(run_crio(&random_config(n, &mut rng))?.min_fidelity());
        }
    }
    out.push(Check {
        name: "protocol",
        pass: worst >= 1.0 - 1e-10,
        detail: format!("min fidelity {worst:.15} over N=1..3"),
    });

    let mut dev: f64 = 0.0;
    for n in 1..=3 {
        let s = crio_state(n)?;
        for i in 0..(1usize << (2 * n + 1)) {
            let bits = index_to_bits(i, 2 * n + 1);
            dev = dev.max((s.amplitude(&bits).re - amplitude_oracle(n, &bits)?).abs());
        }
    }
    out.push(Check {
        name: "graph-state",
        pass: dev <= 1e-12,
        detail: format!("oracle deviation {dev:.1e}"),
    });

    let opts = GmOptions {
        restarts: 16,
        seed,
        ..GmOptions::with_mode(GmMode::Nonneg)
    };
    let mut gm_dev: f64 = 0.0;
    for n in 1..=2 {
        gm_dev = gm_dev.max((gm_crio(n, &opts)?.g - n as f64).abs());
        gm_dev = gm_dev.max((gm_phi(n, &opts)?.g - n as f64).abs());
    }
    out.push(Check {
        name: "geometric-measure",
        pass: gm_dev < 1e-6,
        detail: format!("max |G - N| {gm_dev:.1e}"),
    });

    let mut p_dev: f64 = 0.0;
    for _ in 0..200 {
        let p = random_params(&mut rng);
        let axis = random_axis(&mut rng);
        for (j, k) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            p_dev = p_dev.max((outcome_probability(&p, axis, j, k)? - 0.25).abs());
        }
    }
    out.push(Check {
        name: "outcome-probabilities",
        pass: p_dev <= 1e-10,
        detail: format!("max |p - 1/4| {p_dev:.1e}"),
    });

    let quarter = (0..8).all(|m| success_rate(m as f64 * FRAC_PI_4).success_rate == 0.5);
    let generic = (0..10).all(|_| success_rate(rng.random_range(0.0..TAU)).success_rate == 0.25);
    let axis = random_axis(&mut rng);
    let mut simulated = true;
    for r in enumerate_case2(FRAC_PI_4)?.iter().chain(enumerate_case2(0.3)?.iter()) {
        let s = simulate_branch(&r.params, axis, r.j, r.k, &r.realized.alphas)?;
        simulated &= s.schmidt_second <= 1e-10 && s.rotation_defects.iter().all(|d| *d <= 1e-10);
    }
    out.push(Check {
        name: "control-power",
        pass: quarter && generic && simulated,
        detail: format!("multiples of pi/4 {quarter}, generic {generic}, rows simulated {simulated}"),
    });

    let rep = control_denial_report(1, vec![random_axis(&mut rng)], vec![0.7], vec![random_qubit(&mut rng)])?;
    out.push(Check {
        name: "control-denial",
        pass: rep.blocked && rep.purity < 1.0 - 1e-6,
        detail: format!("best guessed fidelity {:.6}, purity {:.6}", rep.best_min_fidelity, rep.purity),
    });

    let mut cfg = random_config(2, &mut rng);
    cfg.controlled_groups = Some(Vec::new());
    let f = run_crio(&cfg)?.min_target_fidelity(0);
    out.push(Check {
        name: "partial-control",
        pass: f >= 1.0 - 1e-10,
        detail: format!("min fidelity on the controlled group {f:.15}"),
    });
    Ok(out)
}

pub fn verify_all(common: &Common) -> Result<Outcome> {
    let config = VerifyConfig {
        seed: common.seed.unwrap_or(0),
    };
    let checks = checks(config.seed)?;
    let verified = checks.iter().all(|c| c.pass);
    let body = match common.format.unwrap_or(Format::Text) {
        Format::Json => envelope("verify-all", &config, verified, &checks)?,
        Format::Csv => {
            let mut out = header("verify-all", &config) + "check,pass,detail\n";
            for c in &checks {
                let _ = writeln!(out, "{},{},\"{}\"", c.name, c.pass, c.detail);
            }
            out
        }
        Format::Text => {
            let mut out = header("verify-all", &config);
            for c in &checks {
                let _ = writeln!(out, "[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            out
        }
    };
    emit(&body, common.out.as_deref())?;
    Ok(Outcome { verified })
}
