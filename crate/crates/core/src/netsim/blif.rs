//! Parser for the combinational BLIF subset: `.model`, `.inputs`,
//! `.outputs`, `.names` with `0`/`1`/`-` cover rows, and `.end`.

use std::collections::HashMap;

use petgraph::algo::toposort;
use petgraph::graph::DiGraph;

use super::{Cover, NetId, Netlist, NetlistError, Node};

/// A logical line after joining `\` continuations, tagged with the physical
/// line it started on.
struct Logical {
    line: usize,
    text: String,
}

fn logical_lines(text: &str) -> Vec<Logical> {
    let mut out = Vec::new();
    let mut pending: Option<Logical> = None;
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let (body, cont) = match body.trim_end().strip_suffix('\\') {
            Some(b) => (b, true),
            None => (body, false),
        };
        let cur = pending.get_or_insert_with(|| Logical {
            line: i + 1,
            text: String::new(),
        });
        cur.text.push(' ');
        cur.text.push_str(body);
        if !cont {
            let done = pending.take().expect("just inserted");
            if !done.text.trim().is_empty() {
                out.push(done);
            }
        }
    }
    if let Some(done) = pending {
        if !done.text.trim().is_empty() {
            out.push(done);
        }
    }
    out
}

struct PendingNode {
    line: usize,
    fanins: Vec<String>,
    output: String,
    rows: Vec<(String, bool)>,
}

fn finish_cover(p: &PendingNode) -> Result<Cover, NetlistError> {
    let k = p.fanins.len();
    let mut on = None;
    let mut rows = Vec::with_capacity(p.rows.len());
    for (pattern, value) in &p.rows {
        if *on.get_or_insert(*value) != *value {
            return Err(NetlistError::Malformed {
                line: p.line,
                msg: format!("cover for `{}` mixes on-set and off-set rows", p.output),
            });
        }
        let mut care = 0u64;
        let mut bits = 0u64;
        for (i, ch) in pattern.chars().enumerate() {
            match ch {
                '1' => {
                    care |= 1 << i;
                    bits |= 1 << i;
                }
                '0' => care |= 1 << i,
                '-' => {}
                _ => unreachable!("validated when the row was read"),
            }
        }
        debug_assert!(pattern.len() == k);
        rows.push((care, bits));
    }
    Ok(Cover {
        rows,
        // An empty cover is the constant 0.
        on_set: on.unwrap_or(true),
    })
}

pub fn parse_blif(text: &str) -> Result<Netlist, NetlistError> {
    let mut model = None;
    let mut inputs: Vec<(String, usize)> = Vec::new();
    let mut outputs: Vec<(String, usize)> = Vec::new();
    let mut pending: Vec<PendingNode> = Vec::new();
    let mut in_names = false;

    for Logical { line, text } in logical_lines(text) {
        let mut toks = text.split_whitespace();
        let head = toks.next().expect("non-empty logical line");
        if let Some(directive) = head.strip_prefix('.') {
            in_names = false;
            match directive {
                "model" => model = toks.next().map(str::to_owned),
                "inputs" => inputs.extend(toks.map(|t| (t.to_owned(), line))),
                "outputs" => outputs.extend(toks.map(|t| (t.to_owned(), line))),
                "names" => {
                    let mut nets: Vec<String> = toks.map(str::to_owned).collect();
                    let output = nets.pop().ok_or(NetlistError::Malformed {
                        line,
                        msg: ".names needs at least an output net".into(),
                    })?;
                    if nets.len() > 64 {
                        return Err(NetlistError::Malformed {
                            line,
                            msg: format!("{} fanins; at most 64 supported", nets.len()),
                        });
                    }
                    pending.push(PendingNode {
                        line,
                        fanins: nets,
                        output,
                        rows: Vec::new(),
                    });
                    in_names = true;
                }
                "end" => break,
                other => {
                    return Err(NetlistError::Unsupported {
                        line,
                        directive: format!(".{other}"),
                    })
                }
            }
            continue;
        }
        if !in_names {
            return Err(NetlistError::Malformed {
                line,
                msg: format!("cover row `{}` outside a .names block", text.trim()),
            });
        }
        let node = pending.last_mut().expect("in_names implies a node");
        let fields: Vec<&str> = std::iter::once(head).chain(toks).collect();
        let (pattern, value) = match (node.fanins.len(), fields.as_slice()) {
            (0, [v]) => ("", *v),
            (k, [p, v]) if k > 0 => (*p, *v),
            _ => {
                return Err(NetlistError::Malformed {
                    line,
                    msg: format!("bad cover row `{}`", text.trim()),
                })
            }
        };
        if pattern.len() != node.fanins.len()
            || !pattern.chars().all(|c| matches!(c, '0' | '1' | '-'))
        {
            return Err(NetlistError::Malformed {
                line,
                msg: format!(
                    "cover pattern `{pattern}` does not match {} fanins",
                    node.fanins.len()
                ),
            });
        }
        let value = match value {
            "1" => true,
            "0" => false,
            _ => {
                return Err(NetlistError::Malformed {
                    line,
                    msg: format!("cover output `{value}` must be 0 or 1"),
                })
            }
        };
        node.rows.push((pattern.to_owned(), value));
    }

    // Net table: primary inputs first, then node outputs in file order.
    let mut nets: Vec<String> = Vec::new();
    let mut index: HashMap<String, NetId> = HashMap::new();
    for (name, line) in &inputs {
        if index.insert(name.clone(), nets.len()).is_some() {
            return Err(NetlistError::DuplicateDriver {
                line: *line,
                net: name.clone(),
            });
        }
        nets.push(name.clone());
    }
    let n_inputs = nets.len();
    for p in &pending {
        if index.contains_key(&p.output) {
            return Err(NetlistError::DuplicateDriver {
                line: p.line,
                net: p.output.clone(),
            });
        }
        index.insert(p.output.clone(), nets.len());
        nets.push(p.output.clone());
    }

    let mut nodes = Vec::with_capacity(pending.len());
    for p in &pending {
        let fanins = p
            .fanins
            .iter()
            .map(|f| {
                index.get(f).copied().ok_or(NetlistError::Undriven {
                    line: p.line,
                    net: f.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        nodes.push(Node {
            output: index[&p.output],
            fanins,
            cover: finish_cover(p)?,
            line: p.line,
        });
    }
    let outputs = outputs
        .into_iter()
        .map(|(name, line)| {
            index
                .get(&name)
                .copied()
                .ok_or(NetlistError::Undriven { line, net: name })
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Node-level dependency graph; nodes driven by a primary input have no edge.
    let mut g = DiGraph::<usize, ()>::with_capacity(nodes.len(), 0);
    let ids: Vec<_> = (0..nodes.len()).map(|i| g.add_node(i)).collect();
    for (i, node) in nodes.iter().enumerate() {
        for &f in &node.fanins {
            if f >= n_inputs {
                g.add_edge(ids[f - n_inputs], ids[i], ());
            }
        }
    }
    let order = toposort(&g, None).map_err(|cycle| {
        let node = &nodes[g[cycle.node_id()]];
        NetlistError::Cycle {
            line: node.line,
            net: nets[node.output].clone(),
        }
    })?;

    Ok(Netlist {
        model,
        n_inputs,
        outputs,
        nets,
        index,
        nodes,
        order: order.into_iter().map(|n| g[n]).collect(),
        forced_injection_nets: Vec::new(),
    })
}
