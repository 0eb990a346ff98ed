//! Parties, ownership and the action list of one protocol run.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstate::{party_name, qubit_label, target_label, CrioTopology};
use crate::qcore::{rotation, Basis, Mat2, PauliAxis};

/// Qubit, target and party names for vertices `1..=2N+1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Naming {
    qubits: Vec<String>,
    targets: Vec<String>,
    parties: Vec<String>,
}

impl Naming {
    /// `a1..a_{2N+1}`, `O_{N+2}..O_{2N+1}`, `A1..A_{2N+1}`.
    pub fn generic(n: usize) -> Self {
        Naming {
            qubits: (1..=2 * n + 1).map(qubit_label).collect(),
            targets: (n + 2..=2 * n + 1).map(target_label).collect(),
            parties: (1..=2 * n + 1).map(party_name).collect(),
        }
    }

    /// Alice, Bob, Charlie sharing `a, b, c`; Charlie holds `C`.
    pub fn tripartite() -> Self {
        Naming {
            qubits: vec!["a".into(), "b".into(), "c".into()],
            targets: vec!["C".into()],
            parties: vec!["Alice".into(), "Bob".into(), "Charlie".into()],
        }
    }

    /// Alice..Eve sharing `a..e`; David holds `D`, Eve holds `E`.
    pub fn fivepartite() -> Self {
        Naming {
            qubits: ["a", "b", "c", "d", "e"].map(String::from).to_vec(),
            targets: vec!["D".into(), "E".into()],
            parties: ["Alice", "Bob", "Charlie", "David", "Eve"].map(String::from).to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.targets.len()
    }

    /// Qubit of vertex `k` (1-based).
    pub fn qubit(&self, k: usize) -> &str {
        &self.qubits[k - 1]
    }

    /// Target held by vertex `j ∈ N+2..=2N+1`.
    pub fn target(&self, j: usize) -> &str {
        &self.targets[j - self.n() - 2]
    }

    pub fn party(&self, k: usize) -> &str {
        &self.parties[k - 1]
    }

    pub fn qubits(&self) -> &[String] {
        &self.qubits
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }
}

/// A participant with its qubits and private knowledge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Party {
    pub id: String,
    pub owned_qubits: BTreeSet<String>,
    pub knows_angle: Option<f64>,
    pub knows_axis: Option<PauliAxis>,
}

/// Single-qubit operations a party may apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LocalOp {
    Hadamard,
    PauliX,
    PauliZ,
    /// `e^{iβσ_x}`.
    XRotation(f64),
    /// `iσ_n` for an axis Pauli.
    ISigma(PauliAxis),
}

impl LocalOp {
    pub fn matrix(&self) -> Mat2 {
        match self {
            LocalOp::Hadamard => Mat2::hadamard(),
            LocalOp::PauliX => Mat2::pauli_x(),
            LocalOp::PauliZ => Mat2::pauli_z(),
            LocalOp::XRotation(b) => rotation(&PauliAxis::X, *b),
            LocalOp::ISigma(axis) => axis.matrix().scale(C64::new(0.0, 1.0)),
        }
    }
}

impl fmt::Display for LocalOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocalOp::Hadamard => write!(f, "H"),
            LocalOp::PauliX => write!(f, "σ_x"),
            LocalOp::PauliZ => write!(f, "σ_z"),
            LocalOp::XRotation(_) => write!(f, "e^(iβσ_x)"),
            LocalOp::ISigma(_) => write!(f, "iσ_n"),
        }
    }
}

/// What a conditional correction depends on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    /// The outcome bit of the measurement of this qubit.
    Outcome(String),
    /// A bit fixed in advance, standing in for a message that never arrives.
    Guess(u8),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Gate {
        step: u8,
        party: String,
        qubit: String,
        op: LocalOp,
    },
    /// `|0⟩⟨0|⊗I + |1⟩⟨1|⊗σ_n` from `control` to `target`.
    ControlledSigma {
        step: u8,
        party: String,
        control: String,
        target: String,
        axis: PauliAxis,
    },
    Measure {
        step: u8,
        party: String,
        qubit: String,
        basis: Basis,
    },
    /// Sends the outcome of the measurement of `qubit`.
    Send {
        step: u8,
        from: String,
        to: String,
        qubit: String,
    },
    /// Applies `op` when the condition bit is 1.
    Conditional {
        step: u8,
        party: String,
        qubit: String,
        op: LocalOp,
        on: Condition,
    },
}

impl Action {
    pub fn step(&self) -> u8 {
        match self {
            Action::Gate { step, .. }
            | Action::ControlledSigma { step, .. }
            | Action::Measure { step, .. }
            | Action::Send { step, .. }
            | Action::Conditional { step, .. } => *step,
        }
    }
}

/// The full action list plus who owns what.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub naming: Naming,
    pub topology: CrioTopology,
    pub axes: Vec<PauliAxis>,
    pub betas: Vec<f64>,
    pub parties: Vec<Party>,
    pub actions: Vec<Action>,
}

impl Plan {
    /// Builds STEPs 1–6. Without permission the controller neither measures
    /// nor sends, and the STEP-3 corrections follow `guess`.
    pub fn crio(
        naming: Naming,
        topology: CrioTopology,
        axes: Vec<PauliAxis>,
        betas: Vec<f64>,
        permitted: bool,
        guess: u8,
    ) -> Result<Self> {
        let n = naming.n();
        if topology.n() != n {
            return Err(Error::ArityMismatch {
                expected: n,
                got: topology.n(),
            });
        }
        for len in [axes.len(), betas.len()] {
            if len != n {
                return Err(Error::ArityMismatch { expected: n, got: len });
            }
        }

        let mut parties = Vec::with_capacity(2 * n + 1);
        for k in 1..=2 * n + 1 {
            let mut owned = BTreeSet::from([naming.qubit(k).to_string()]);
            let (mut angle, mut axis) = (None, None);
            if k >= n + 2 {
                owned.insert(naming.target(k).to_string());
                axis = Some(axes[k - n - 2]);
            } else if k >= 2 {
                angle = Some(betas[k - 2]);
            }
            parties.push(Party {
                id: naming.party(k).to_string(),
                owned_qubits: owned,
                knows_angle: angle,
                knows_axis: axis,
            });
        }

        let q = |k: usize| naming.qubit(k).to_string();
        let p = |k: usize| naming.party(k).to_string();
        let mut actions = Vec::new();

        for j in n + 2..=2 * n + 1 {
            actions.push(Action::ControlledSigma {
                step: 1,
                party: p(j),
                control: q(j),
                target: naming.target(j).to_string(),
                axis: axes[j - n - 2],
            });
        }
        for k in 3..=n + 1 {
            actions.push(Action::Gate {
                step: 2,
                party: p(k),
                qubit: q(k),
                op: LocalOp::Hadamard,
            });
        }

        let controlled: Vec<usize> = (2..=n + 1).filter(|&k| topology.is_controlled(k)).collect();
        if permitted {
            actions.push(Action::Measure {
                step: 3,
                party: p(1),
                qubit: q(1),
                basis: Basis::X,
            });
            for &k in &controlled {
                actions.push(Action::Send {
                    step: 3,
                    from: p(1),
                    to: p(k),
                    qubit: q(1),
                });
            }
        }
        for &k in &controlled {
            let on = if permitted {
                Condition::Outcome(q(1))
            } else {
                Condition::Guess(guess & 1)
            };
            actions.push(Action::Conditional {
                step: 3,
                party: p(k),
                qubit: q(k),
                op: LocalOp::PauliX,
                on,
            });
        }

        for j in n + 2..=2 * n + 1 {
            let k = j - n;
            actions.push(Action::Measure {
                step: 4,
                party: p(j),
                qubit: q(j),
                basis: Basis::X,
            });
            actions.push(Action::Send {
                step: 4,
                from: p(j),
                to: p(k),
                qubit: q(j),
            });
            actions.push(Action::Conditional {
                step: 4,
                party: p(k),
                qubit: q(k),
                op: LocalOp::PauliZ,
                on: Condition::Outcome(q(j)),
            });
        }
        for k in 2..=n + 1 {
            actions.push(Action::Gate {
                step: 5,
                party: p(k),
                qubit: q(k),
                op: LocalOp::XRotation(betas[k - 2]),
            });
        }
        for k in 2..=n + 1 {
            let j = k + n;
            actions.push(Action::Measure {
                step: 6,
                party: p(k),
                qubit: q(k),
                basis: Basis::Z,
            });
            actions.push(Action::Send {
                step: 6,
                from: p(k),
                to: p(j),
                qubit: q(k),
            });
            actions.push(Action::Conditional {
                step: 6,
                party: p(j),
                qubit: naming.target(j).to_string(),
                op: LocalOp::ISigma(axes[k - 2]),
                on: Condition::Outcome(q(k)),
            });
        }

        Ok(Plan {
            naming,
            topology,
            axes,
            betas,
            parties,
            actions,
        })
    }

    pub fn party(&self, id: &str) -> Result<&Party> {
        self.parties
            .iter()
            .find(|p| p.id == id)
            .ok_or_else(|| Error::Parse(format!("unknown party `{id}`")))
    }

    /// Errors unless `party` owns every listed qubit.
    pub fn check_locality(&self, party: &str, qubits: &[&str]) -> Result<()> {
        let owner = self.party(party)?;
        for q in qubits {
            if !owner.owned_qubits.contains(*q) {
                return Err(Error::LocalityViolation {
                    party: party.to_string(),
                    qubit: q.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn num_measurements(&self) -> usize {
        self.actions
            .iter()
            .filter(|a| matches!(a, Action::Measure { .. }))
            .count()
    }
}
