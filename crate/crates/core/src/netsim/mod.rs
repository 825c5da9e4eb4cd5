//! Zero-delay combinational netlist evaluation and per-net signal
//! probability under PRBS, exhaustive or constant stimulus.

mod blif;

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prbs::LfsrState;
use crate::stress::{signal_probability_histogram, CellStress, Histogram, StressError};

pub use blif::parse_blif;

pub type NetId = usize;

/// Largest input count accepted by the exhaustive source.
pub const MAX_EXHAUSTIVE_INPUTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: unsupported directive {directive}")]
    Unsupported { line: usize, directive: String },
    #[error("line {line}: net `{net}` has no driver")]
    Undriven { line: usize, net: String },
    #[error("line {line}: net `{net}` is driven more than once")]
    DuplicateDriver { line: usize, net: String },
    #[error("line {line}: combinational cycle through net `{net}`")]
    Cycle { line: usize, net: String },
    #[error("no value for primary input `{0}`")]
    MissingInput(String),
    #[error("expected {expected} input values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("exhaustive source needs at most {MAX_EXHAUSTIVE_INPUTS} inputs (netlist has {0})")]
    TooManyInputs(usize),
    #[error(transparent)]
    Stress(#[from] StressError),
}

/// Sum-of-products cover. Each row is `(care, bits)` over the fanins; a row
/// matches when the fanin word agrees with `bits` on every `care` position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub rows: Vec<(u64, u64)>,
    /// False for an off-set cover (rows list where the output is 0).
    pub on_set: bool,
}

impl Cover {
    pub fn eval(&self, fanin_word: u64) -> bool {
        let hit = self
            .rows
            .iter()
            .any(|&(care, bits)| fanin_word & care == bits);
        hit == self.on_set
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub output: NetId,
    pub fanins: Vec<NetId>,
    pub cover: Cover,
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct Netlist {
    pub model: Option<String>,
    n_inputs: usize,
    outputs: Vec<NetId>,
    nets: Vec<String>,
    index: HashMap<String, NetId>,
    nodes: Vec<Node>,
    order: Vec<usize>,
    forced_injection_nets: Vec<NetId>,
}

impl Netlist {
    pub fn inputs(&self) -> &[String] {
        &self.nets[..self.n_inputs]
    }

    pub fn outputs(&self) -> impl Iterator<Item = &str> {
        self.outputs.iter().map(|&n| self.nets[n].as_str())
    }

    pub fn net_names(&self) -> &[String] {
        &self.nets
    }

    pub fn net(&self, name: &str) -> Option<NetId> {
        self.index.get(name).copied()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Node indices in evaluation order.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn forced_injection_nets(&self) -> impl Iterator<Item = &str> {
        self.forced_injection_nets
            .iter()
            .map(|&n| self.nets[n].as_str())
    }

    pub fn set_forced_injection_nets<S: AsRef<str>>(
        &mut self,
        names: &[S],
    ) -> Result<(), NetlistError> {
        let mut ids = names
            .iter()
            .map(|n| {
                self.net(n.as_ref())
                    .ok_or_else(|| NetlistError::UnknownNet(n.as_ref().into()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        ids.sort_unstable();
        ids.dedup();
        self.forced_injection_nets = ids;
        Ok(())
    }

    fn eval_node(&self, node: &Node, values: &[bool]) -> bool {
        let word = node
            .fanins
            .iter()
            .enumerate()
            .fold(0u64, |w, (i, &f)| w | (u64::from(values[f]) << i));
        node.cover.eval(word)
    }

    /// Evaluates every net for inputs given in declaration order. Forced nets
    /// are not overridden here.
    pub fn evaluate_vector(&self, inputs: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if inputs.len() != self.n_inputs {
            return Err(NetlistError::Arity {
                expected: self.n_inputs,
                got: inputs.len(),
            });
        }
        let mut values = vec![false; self.nets.len()];
        values[..self.n_inputs].copy_from_slice(inputs);
        for &i in &self.order {
            let node = &self.nodes[i];
            values[node.output] = self.eval_node(node, &values);
        }
        Ok(values)
    }

    /// Evaluates every net from a by-name assignment of the primary inputs.
    pub fn evaluate(
        &self,
        assignment: &HashMap<String, bool>,
    ) -> Result<HashMap<String, bool>, NetlistError> {
        let inputs = self
            .inputs()
            .iter()
            .map(|n| {
                assignment
                    .get(n)
                    .copied()
                    .ok_or_else(|| NetlistError::MissingInput(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let values = self.evaluate_vector(&inputs)?;
        Ok(self.nets.iter().cloned().zip(values).collect())
    }

    /// One stimulus step with forced nets overridden by `force` before their
    /// fanout is evaluated.
    fn step(&self, values: &mut [bool], forced: &[bool], force: &mut LfsrState) {
        for &n in &self.forced_injection_nets {
            if n < self.n_inputs {
                values[n] = force.next_bit();
            }
        }
        for &i in &self.order {
            let node = &self.nodes[i];
            let out = node.output;
            values[out] = if forced[out] {
                force.next_bit()
            } else {
                self.eval_node(node, values)
            };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Successive PRBS23 bits, one per input per vector.
    Lfsr { seed: u64 },
    /// All `2^k` input vectors in counting order; input `i` is bit `i`.
    Exhaustive,
    /// The same vector every step; input `i` takes bit `i` of the pattern.
    Constant { pattern: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetStress {
    pub net: String,
    pub stress: CellStress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityReport {
    pub vectors: u64,
    pub nets: Vec<NetStress>,
    pub histogram: Histogram,
}

impl ProbabilityReport {
    pub fn probability(&self, net: &str) -> Option<f64> {
        self.nets
            .iter()
            .find(|n| n.net == net)
            .and_then(|n| n.stress.signal_probability())
    }

    /// Nets whose probability lies outside `[lo, hi]`.
    pub fn out_of_band(&self, lo: f64, hi: f64) -> Vec<&str> {
        self.nets
            .iter()
            .filter(|n| {
                let p = n.stress.signal_probability().unwrap_or(0.0);
                p < lo || p > hi
            })
            .map(|n| n.net.as_str())
            .collect()
    }

    pub fn in_band_fraction(&self, lo: f64, hi: f64) -> f64 {
        if self.nets.is_empty() {
            return 0.0;
        }
        1.0 - self.out_of_band(lo, hi).len() as f64 / self.nets.len() as f64
    }

    pub fn write_nets_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["net", "prob", "toggles", "max_static_interval"])?;
        for n in &self.nets {
            let p = n.stress.signal_probability().unwrap_or(0.0);
            w.write_record([
                n.net.clone(),
                format!("{p}"),
                n.stress.toggle_count.to_string(),
                n.stress.max_static_interval.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Drives `n_vectors` stimulus vectors (ignored for the exhaustive source,
/// which always applies `2^k`). Vector `t` holds its values over `[t, t+1)`.
pub fn probability_run(
    netlist: &Netlist,
    source: Source,
    n_vectors: u64,
    bins: usize,
) -> Result<ProbabilityReport, NetlistError> {
    let k = netlist.n_inputs;
    let vectors = match source {
        Source::Exhaustive if k > MAX_EXHAUSTIVE_INPUTS => {
            return Err(NetlistError::TooManyInputs(k))
        }
        Source::Exhaustive => 1u64 << k,
        _ => n_vectors,
    };
    let mut stim = match source {
        Source::Lfsr { seed } => LfsrState::prbs23(seed),
        _ => LfsrState::prbs23(1),
    };
    let force_seed = match source {
        Source::Lfsr { seed } => seed ^ 0x5a5a,
        _ => 0x5a5a,
    };
    let mut force = LfsrState::prbs15(force_seed);
    let mut forced = vec![false; netlist.nets.len()];
    for &n in &netlist.forced_injection_nets {
        forced[n] = true;
    }

    let mut cells = vec![CellStress::new(0, false); netlist.nets.len()];
    let mut values = vec![false; netlist.nets.len()];
    for t in 0..vectors {
        for (i, v) in values[..k].iter_mut().enumerate() {
            *v = match source {
                Source::Lfsr { .. } => stim.next_bit(),
                Source::Exhaustive => (t >> i) & 1 == 1,
                Source::Constant { pattern } => i < 64 && (pattern >> i) & 1 == 1,
            };
        }
        netlist.step(&mut values, &forced, &mut force);
        for (cell, &v) in cells.iter_mut().zip(&values) {
            cell.observe(t, v)?;
        }
    }
    for cell in &mut cells {
        cell.finalize(vectors)?;
    }
    let histogram = signal_probability_histogram(&cells, bins)?;
    let nets = netlist
        .nets
        .iter()
        .cloned()
        .zip(cells)
        .map(|(net, stress)| NetStress { net, stress })
        .collect();
    Ok(ProbabilityReport {
        vectors,
        nets,
        histogram,
    })
}
