//! `perm` subcommands: inputs, evaluation, and the structural audit used by `verify`.

use anyhow::{anyhow, bail, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeSet;
use urysohn::finperm::{
    biindex, commensurated, is_block, is_primitive, is_transitive, is_two_transitive, minimal_block,
    partition_automorphism_gens, schlichting_orbit, subset_action, symmetric_group_gens, transfer_character, BaseObject,
    CommensurationContext, EventualSet, FinPermutation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Blocks,
    Biindex,
    Tr,
    Schlichting,
}

/// Everything a `perm` computation depends on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermInput {
    pub op: Op,
    #[serde(default)]
    pub gens: Vec<FinPermutation>,
    /// Size of the finite set `{0, …, n−1}` the generators act on.
    #[serde(default)]
    pub n: usize,
    /// Act on `k`-subsets instead of points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<FinPermutation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<EventualSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilizer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

impl PermInput {
    pub fn new(op: Op) -> Self {
        PermInput {
            op,
            gens: vec![],
            n: 0,
            subsets: None,
            pair: None,
            base: None,
            sigma: None,
            x: None,
            stabilizer: None,
            value: None,
            depth: None,
        }
    }
}

/// Generators from `--gen` texts, `--sym n` and `--partition-aut k,m`.
pub fn generators(texts: &[String], sym: Option<usize>, part: Option<(usize, usize)>) -> Result<(Vec<FinPermutation>, usize)> {
    let mut gens: Vec<FinPermutation> = texts.iter().map(|t| t.parse()).collect::<Result<_, _>>()?;
    let mut n = 0;
    if let Some(s) = sym {
        gens.extend(symmetric_group_gens(s));
        n = s;
    }
    if let Some((k, m)) = part {
        gens.extend(partition_automorphism_gens(k, m));
        n = n.max(k * m);
    }
    Ok((gens, n))
}

/// The generators acting on the chosen finite set, and its size.
fn domain(input: &PermInput) -> Result<(Vec<FinPermutation>, usize)> {
    match input.subsets {
        None => Ok((input.gens.clone(), input.n)),
        Some(k) => {
            let (subs, ind) = subset_action(&input.gens, input.n, k)?;
            Ok((ind, subs.len()))
        }
    }
}

fn show(s: &BTreeSet<usize>) -> Vec<usize> {
    s.iter().copied().collect()
}

pub fn run(input: &PermInput) -> Result<Value> {
    Ok(match input.op {
        Op::Blocks => {
            let (g, m) = domain(input)?;
            if let Some((a, b)) = input.pair {
                json!({ "block": show(&minimal_block(&g, m, a, b)?) })
            } else if !is_transitive(&g, m)? {
                json!({ "transitive": false })
            } else {
                let mut blocks: BTreeSet<Vec<usize>> = BTreeSet::new();
                for b in 1..m {
                    blocks.insert(show(&minimal_block(&g, m, 0, b)?));
                }
                json!({ "transitive": true, "primitive": is_primitive(&g, m)?, "blocks": blocks })
            }
        }
        Op::Biindex => {
            let (g, m) = domain(input)?;
            let base = input.base.unwrap_or(0);
            json!({ "biindex": biindex(&g, m, base)?, "two_transitive": is_two_transitive(&g, m)? })
        }
        Op::Tr => {
            let sigma = input.sigma.as_ref().ok_or_else(|| anyhow!("tr needs --sigma"))?;
            let c = CommensurationContext::new(input.x.clone().unwrap_or_else(EventualSet::evens))?;
            match commensurated(sigma, &c) {
                Some(d) => json!({ "commensurates": true, "difference": d, "tr": transfer_character(sigma, &c)? }),
                None => json!({ "commensurates": false }),
            }
        }
        Op::Schlichting => {
            let kind = input.stabilizer.as_deref().ok_or_else(|| anyhow!("schlichting needs --type"))?;
            let base = BaseObject::parse(kind, input.value.as_deref().unwrap_or(""))?;
            let g = schlichting_orbit(&input.gens, &base, input.depth.unwrap_or(4))?;
            let objects: Vec<String> = g.objects.iter().map(|o| o.to_string()).collect();
            json!({ "objects": objects, "edges": g.edges })
        }
    })
}

/// Direct checks of recorded claims that do not rerun the producing algorithm.
pub fn audit(input: &PermInput, result: &Value) -> Result<Vec<String>> {
    let mut out = Vec::new();
    if input.op != Op::Blocks {
        return Ok(out);
    }
    let (g, m) = domain(input)?;
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    if let Some(b) = result.get("block") {
        blocks.push(serde_json::from_value(b.clone())?);
    }
    if let Some(bs) = result.get("blocks") {
        blocks.extend(serde_json::from_value::<Vec<Vec<usize>>>(bs.clone())?);
    }
    for b in blocks {
        let set: BTreeSet<usize> = b.iter().copied().collect();
        if set.iter().any(|&x| x >= m) {
            bail!("block {b:?} leaves the domain");
        }
        if !is_block(&g, m, &set)? {
            out.push(format!("{b:?} is not a block"));
        }
    }
    if result.get("primitive") == Some(&Value::Bool(true)) {
        if let Some(bs) = result.get("blocks").and_then(Value::as_array) {
            if bs.iter().any(|b| b.as_array().map_or(0, |a| a.len()) != m) {
                out.push("a proper block is recorded for a primitive action".into());
            }
        }
    }
    Ok(out)
}
