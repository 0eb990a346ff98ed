//! Graphs, graph states built from CZ circuits, and the CRIO graph family.
//!
//! Vertices are 1-based. In a CRIO graph on `2N+1` vertices, vertex 1 is the
//! controller, vertices `2..=N+1` hold the rotation angles and vertices
//! `N+2..=2N+1` hold the remote targets `O_{N+2}..O_{2N+1}`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::QuantumState;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    num_vertices: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if num_vertices == 0 {
            return Err(Error::InvalidGraph("a graph needs at least one vertex".into()));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop on vertex {u}")));
            }
            for w in [u, v] {
                if w == 0 || w > num_vertices {
                    return Err(Error::InvalidGraph(format!(
                        "vertex {w} outside 1..={num_vertices}"
                    )));
                }
            }
            if !set.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge {{{u},{v}}}")));
            }
        }
        Ok(Graph {
            num_vertices,
            edges: set,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Edges as `(min, max)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }
}

/// Edge-list text: a header line `n=<num_vertices>` followed by one `u v`
/// pair per line. Blank lines and `#` comments are ignored.
impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let n = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse(format!("bad header `{header}`, expected n=<count>")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let parse = |p: Option<&str>| {
                p.and_then(|x| x.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse(format!("bad edge line `{line}`")))
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!("bad edge line `{line}`")));
            }
            edges.push((u, v));
        }
        Graph::new(n, edges)
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n={}", self.num_vertices)?;
        for (u, v) in &self.edges {
            writeln!(f, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Label of qubit `a_k`.
pub fn qubit_label(k: usize) -> String {
    format!("a{k}")
}

/// Label of the remote target system `O_j`.
pub fn target_label(j: usize) -> String {
    format!("O{j}")
}

/// Name of participant `A_k`.
pub fn party_name(k: usize) -> String {
    format!("A{k}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Controller,
    /// Holds a rotation angle and the stator control qubit.
    Operator,
    /// Owns a remote target system.
    Holder,
}

/// Role of each vertex of a CRIO graph with `n` groups.
pub fn vertex_roles(n: usize) -> Vec<(usize, Role)> {
    (1..=2 * n + 1)
        .map(|k| {
            let role = match k {
                1 => Role::Controller,
                k if k <= n + 1 => Role::Operator,
                _ => Role::Holder,
            };
            (k, role)
        })
        .collect()
}

/// `∏_{e∈E} CZ_e |+⟩^{⊗n}` on qubits `a1..an`.
pub fn build_graph_state(graph: &Graph) -> QuantumState {
    let labels: Vec<String> = (1..=graph.num_vertices).map(qubit_label).collect();
    build_graph_state_labeled(graph, &labels).expect("labels match vertex count")
}

pub fn build_graph_state_labeled<S: AsRef<str>>(graph: &Graph, labels: &[S]) -> Result<QuantumState> {
    apply_edges(graph.num_vertices, graph.edges(), labels)
}

fn apply_edges<S: AsRef<str>>(
    n: usize,
    edges: impl IntoIterator<Item = (usize, usize)>,
    labels: &[S],
) -> Result<QuantumState> {
    if labels.len() != n {
        return Err(Error::ArityMismatch {
            expected: n,
            got: labels.len(),
        });
    }
    let owned: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
    let mut state = QuantumState::normalized(owned.clone(), vec![C64::new(1.0, 0.0); 1 << n])?;
    for (u, v) in edges {
        state.apply_cz(&owned[u - 1], &owned[v - 1])?;
    }
    Ok(state)
}

/// Which groups `k ∈ 3..=N+1` are wired to the controller. The group of
/// `(A_2, A_{N+2})` is always controlled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrioTopology {
    n: usize,
    controlled_groups: BTreeSet<usize>,
}

impl CrioTopology {
    pub fn full(n: usize) -> Result<Self> {
        Self::new(n, 3..=n + 1)
    }

    pub fn new(n: usize, controlled_groups: impl IntoIterator<Item = usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("N must be at least 1".into()));
        }
        let groups: BTreeSet<usize> = controlled_groups.into_iter().collect();
        if let Some(&g) = groups.iter().find(|&&g| !(3..=n + 1).contains(&g)) {
            return Err(Error::GroupOutOfRange { group: g, max: n + 1 });
        }
        Ok(CrioTopology {
            n,
            controlled_groups: groups,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn controlled_groups(&self) -> &BTreeSet<usize> {
        &self.controlled_groups
    }

    /// Whether the group whose operator is `A_k` (`k ∈ 2..=N+1`) follows the
    /// controller.
    pub fn is_controlled(&self, k: usize) -> bool {
        k == 2 || self.controlled_groups.contains(&k)
    }

    pub fn is_full(&self) -> bool {
        self.controlled_groups.len() == self.n - 1
    }
}

/// Edges `{1,2}`, `{1,N+2}` and, for each `k ∈ 3..=N+1`, `{k,k+N}` plus the
/// pair `{2,k}`, `{k,N+2}` when group `k` is controlled.
pub fn crio_graph(topology: &CrioTopology) -> Graph {
    let n = topology.n;
    let mut edges = vec![(1, 2), (1, n + 2)];
    for k in 3..=n + 1 {
        if topology.controlled_groups.contains(&k) {
            edges.push((2, k));
            edges.push((k, n + 2));
        }
        edges.push((k, k + n));
    }
    Graph::new(2 * n + 1, edges).expect("CRIO edges are valid")
}

/// `|h_{2N+1}⟩` with full control.
pub fn crio_state(n: usize) -> Result<QuantumState> {
    Ok(build_graph_state(&crio_graph(&CrioTopology::full(n)?)))
}

/// `f(x) = q1q2 ⊕ q1q_{N+2} ⊕_{k=3}^{N+1} (q2qk ⊕ qkq_{N+2} ⊕ qkq_{k+N})`.
pub fn crio_phase_function(n: usize, bits: &[u8]) -> Result<u8> {
    if n == 0 || bits.len() != 2 * n + 1 {
        return Err(Error::ArityMismatch {
            expected: 2 * n + 1,
            got: bits.len(),
        });
    }
    let q = |i: usize| bits[i - 1] & 1;
    let mut f = (q(1) & q(2)) ^ (q(1) & q(n + 2));
    for k in 3..=n + 1 {
        f ^= (q(2) & q(k)) ^ (q(k) & q(n + 2)) ^ (q(k) & q(k + n));
    }
    Ok(f)
}

/// Direct amplitude `(−1)^{f(x)} / (2^N √2)` of `|h_{2N+1}⟩`.
pub fn amplitude_oracle(n: usize, bits: &[u8]) -> Result<f64> {
    let sign = if crio_phase_function(n, bits)? == 0 { 1.0 } else { -1.0 };
    Ok(sign / (2f64.powi(n as i32) * std::f64::consts::SQRT_2))
}

/// `|φ_{2N}⟩ = 2^{-N/2} Σ_q |q, q⟩` on `2N` qubits.
pub fn phi_state(n: usize) -> Result<QuantumState> {
    if n == 0 {
        return Err(Error::OutOfRange {
            value: 0.0,
            range: "N >= 1",
        });
    }
    let labels: Vec<String> = (1..=2 * n).map(qubit_label).collect();
    let mut amps = vec![C64::new(0.0, 0.0); 1 << (2 * n)];
    for q in 0..(1usize << n) {
        amps[(q << n) | q] = C64::new(1.0, 0.0);
    }
    QuantumState::normalized(labels, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{index_to_bits, Mat2};

    const S: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn empty_graph_is_plus_product() {
        let g = Graph::new(2, []).unwrap();
        let s = build_graph_state(&g);
        for a in s.amplitudes() {
            assert!((a.re - 0.5).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn graph_validation() {
        assert!(Graph::new(0, []).is_err());
        assert!(Graph::new(3, [(1, 1)]).is_err());
        assert!(Graph::new(3, [(1, 4)]).is_err());
        assert!(Graph::new(3, [(1, 2), (2, 1)]).is_err());
        assert_eq!(Graph::new(3, [(2, 1)]).unwrap().edges().collect::<Vec<_>>(), vec![(1, 2)]);
    }

    #[test]
    fn h3_matches_printed_expansion() {
        let g = Graph::new(3, [(1, 2), (1, 3)]).unwrap();
        let s = build_graph_state(&g);
        // +|000⟩+|001⟩+|010⟩+|011⟩+|100⟩−|101⟩−|110⟩+|111⟩
        let signs = [1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0, 1.0];
        for (a, sign) in s.amplitudes().iter().zip(signs) {
            assert!((a.re - sign / (2.0 * S)).abs() < 1e-15);
        }
        assert!((s.amplitude(&[1, 0, 1]).re + 1.0 / (2.0 * S)).abs() < 1e-15);
    }

    #[test]
    fn h5_matches_printed_expansion() {
        let s = crio_state(2).unwrap();
        let minus = [
            "00101", "10101", "01111", "11111", "01100", "11000", "11001", "11101", "00110",
            "10010", "10011", "10111",
        ];
        for i in 0..32 {
            let bits = index_to_bits(i, 5);
            let key: String = bits.iter().map(|b| char::from(b'0' + b)).collect();
            let sign = if minus.contains(&key.as_str()) { -1.0 } else { 1.0 };
            assert!(
                (s.amplitudes()[i].re - sign / (4.0 * S)).abs() < 1e-15,
                "amplitude of |{key}⟩"
            );
        }
    }

    #[test]
    fn crio_graph_shapes() {
        let g1 = crio_graph(&CrioTopology::full(1).unwrap());
        assert_eq!(g1.edges().collect::<Vec<_>>(), vec![(1, 2), (1, 3)]);
        let g5 = crio_graph(&CrioTopology::full(2).unwrap());
        assert_eq!(
            g5.edges().collect::<Vec<_>>(),
            vec![(1, 2), (1, 4), (2, 3), (3, 4), (3, 5)]
        );
        let partial = crio_graph(&CrioTopology::new(2, []).unwrap());
        assert_eq!(partial.edges().collect::<Vec<_>>(), vec![(1, 2), (1, 4), (3, 5)]);
        for n in 2..=6 {
            assert_eq!(
                crio_graph(&CrioTopology::full(n).unwrap()).num_edges(),
                3 * (n - 1) + 2
            );
        }
        assert!(matches!(
            CrioTopology::new(3, [5]),
            Err(Error::GroupOutOfRange { group: 5, max: 4 })
        ));
        assert!(CrioTopology::new(3, [2]).is_err());
    }

    #[test]
    fn oracle_examples() {
        assert!((amplitude_oracle(2, &[0; 5]).unwrap() - 1.0 / (4.0 * S)).abs() < 1e-15);
        assert!((amplitude_oracle(1, &[1, 0, 1]).unwrap() + 1.0 / (2.0 * S)).abs() < 1e-15);
        assert!(amplitude_oracle(2, &[0; 4]).is_err());
    }

    #[test]
    fn oracle_matches_circuit_for_n2() {
        let s = crio_state(2).unwrap();
        for i in 0..32 {
            let want = amplitude_oracle(2, &index_to_bits(i, 5)).unwrap();
            assert!((s.amplitudes()[i] - C64::new(want, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn edge_order_is_irrelevant() {
        let g = crio_graph(&CrioTopology::full(3).unwrap());
        let labels: Vec<String> = (1..=7).map(qubit_label).collect();
        let forward = apply_edges(7, g.edges(), &labels).unwrap();
        let mut rev: Vec<_> = g.edges().collect();
        rev.reverse();
        rev.rotate_left(3);
        let backward = apply_edges(7, rev, &labels).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn amplitudes_have_equal_magnitude() {
        let s = crio_state(3).unwrap();
        let m = 1.0 / (128f64).sqrt();
        assert!(s.amplitudes().iter().all(|a| (a.norm() - m).abs() < 1e-15));
    }

    #[test]
    fn hadamard_on_a_gives_nonnegative_g3() {
        let mut s = crio_state(1).unwrap();
        s.apply_1q(&Mat2::hadamard(), "a1").unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            let want = if [0, 3, 6, 5].contains(&i) { 0.5 } else { 0.0 };
            assert!((a.re - want).abs() < 1e-15 && a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn phi_examples() {
        let bell = phi_state(1).unwrap();
        assert!((bell.amplitude(&[0, 0]).re - 1.0 / S).abs() < 1e-15);
        assert!((bell.amplitude(&[1, 1]).re - 1.0 / S).abs() < 1e-15);
        let phi4 = phi_state(2).unwrap();
        for (i, a) in phi4.amplitudes().iter().enumerate() {
            let want = if [0b0000, 0b0101, 0b1010, 0b1111].contains(&i) { 0.5 } else { 0.0 };
            assert!((a.re - want).abs() < 1e-15);
        }
        assert_eq!(phi4.amplitude(&[0, 1, 1, 0]), C64::new(0.0, 0.0));
    }

    #[test]
    fn edge_list_round_trip_and_errors() {
        let g = crio_graph(&CrioTopology::full(2).unwrap());
        let text = g.to_string();
        assert!(text.starts_with("n=5\n1 2\n"));
        assert_eq!(text.parse::<Graph>().unwrap(), g);
        assert_eq!("n=1\n".parse::<Graph>().unwrap().num_edges(), 0);
        assert!("1 2\n".parse::<Graph>().is_err());
        assert!("n=3\n1 x\n".parse::<Graph>().is_err());
        assert!("n=3\n1 2 3\n".parse::<Graph>().is_err());
        assert!("n=3\n1 5\n".parse::<Graph>().is_err());
    }
}
