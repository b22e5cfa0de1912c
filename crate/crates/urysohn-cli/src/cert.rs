//! Certificates and their independent re-verification.

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashMap;
use urysohn::agent::verify_graph;
use urysohn::distance_set::DistanceSetJson;
use urysohn::genericity::{verify_prefixes, verify_transcript, Transcript};
use urysohn::group::{Group, GroupSpec};
use urysohn::metric::{check_metric, katetov_extend, FiniteMetricSpace, KatetovFunction};
use urysohn::scalar::{self, Scalar};
use urysohn::tower::{PointId, TermRecord, Tower};
use urysohn::{unbounded, DistanceSet};

use crate::perm::{self, PermInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    MetricCheck,
    Realization,
    Extension,
    SchedulerTranscript,
    Witness,
    FinpermResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn of(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: Kind,
    pub payload: Value,
    pub status: Status,
}

impl Certificate {
    pub fn new<T: Serialize>(kind: Kind, payload: &T, ok: bool) -> Result<Self> {
        Ok(Certificate { kind, payload: serde_json::to_value(payload)?, status: Status::of(ok) })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCheck {
    pub space: FiniteMetricSpace,
    pub violations: Vec<String>,
}

/// A tower window: the exported terms, the window's record ids and its distance matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    #[serde(rename = "S")]
    pub set: DistanceSetJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    pub records: Vec<TermRecord>,
    pub points: Vec<PointId>,
    pub dist: Vec<Vec<String>>,
    /// A realized point and the distances it was asked to have.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prescribed: Option<Prescribed>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prescribed {
    pub point: PointId,
    pub f: Vec<(PointId, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Extension {
    Katetov { space: FiniteMetricSpace, f: KatetovFunction, values: Vec<String> },
    /// A finite piece of an isometry extending `phi`, in record ids.
    Isometry {
        #[serde(rename = "S")]
        set: DistanceSetJson,
        records: Vec<TermRecord>,
        phi: Vec<(PointId, PointId)>,
        graph: Vec<(PointId, PointId)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPayload {
    pub group: GroupSpec,
    pub records: Vec<TermRecord>,
    pub f: Vec<PointId>,
    #[serde(rename = "K")]
    pub k: String,
    pub gamma: String,
    pub threshold: String,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinpermPayload {
    pub input: PermInput,
    pub result: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub kind: Option<Kind>,
    pub checks: usize,
    pub failures: Vec<String>,
    pub ok: bool,
}

pub fn one_point(set: DistanceSet) -> FiniteMetricSpace {
    FiniteMetricSpace::new(set, vec!["o".into()], vec![vec![Scalar::from_integer(0.into())]])
}

/// Plain tower over one point, or the group tower matching the distance set.
pub fn tower_for(set: DistanceSet, group: Option<&GroupSpec>) -> Result<Tower> {
    Ok(match group {
        None => Tower::plain(one_point(set)),
        Some(spec) => {
            let g = Group::new(spec.clone())?;
            if set.is_bounded() {
                Tower::equivariant(set, g)?
            } else {
                Tower::unbounded(g)
            }
        }
    })
}

pub fn window_payload(t: &mut Tower, group: Option<&GroupSpec>, pts: &[PointId]) -> Window {
    let dist = pts.iter().map(|&p| pts.iter().map(|&q| scalar::fmt(&t.distance(p, q))).collect()).collect();
    Window {
        set: (&t.set).into(),
        group: group.cloned(),
        records: t.export(pts),
        points: pts.to_vec(),
        dist,
        prescribed: None,
    }
}

fn import(t: &mut Tower, records: &[TermRecord]) -> Result<HashMap<usize, PointId>> {
    Ok(t.import(records)?)
}

fn id(map: &HashMap<usize, PointId>, p: PointId) -> Result<PointId> {
    map.get(&p).copied().ok_or_else(|| anyhow!("record {p} is not in the certificate"))
}

/// Re-checks every claim of the certificate from its inputs alone.
pub fn verify(v: &Value) -> Result<Report> {
    let empty = v.as_object().is_some_and(|o| o.is_empty()) || v.get("payload").is_some_and(Value::is_null);
    if empty {
        return Ok(Report { kind: None, checks: 0, failures: vec![], ok: true });
    }
    let c: Certificate = serde_json::from_value(v.clone()).context("certificate schema")?;
    let mut failures = Vec::new();
    let mut checks = 0usize;
    match c.kind {
        Kind::MetricCheck => {
            let p: MetricCheck = serde_json::from_value(c.payload.clone())?;
            let got = check_metric(&p.space);
            checks += 1;
            if got != p.violations {
                failures.push(format!("violations recorded {:?}, recomputed {:?}", p.violations, got));
            }
            if !got.is_empty() {
                failures.extend(got.iter().map(|g| format!("metric: {g}")));
            }
        }
        Kind::Realization => {
            let w: Window = serde_json::from_value(c.payload.clone())?;
            let set = DistanceSet::try_from(w.set.clone())?;
            let mut t = tower_for(set.clone(), w.group.as_ref())?;
            let map = import(&mut t, &w.records)?;
            let pts: Vec<PointId> = w.points.iter().map(|&p| id(&map, p)).collect::<Result<_>>()?;
            let mut rows = Vec::new();
            for (i, &p) in pts.iter().enumerate() {
                let mut row = Vec::new();
                for (j, &q) in pts.iter().enumerate() {
                    let d = t.distance(p, q);
                    checks += 1;
                    let rec = w.dist.get(i).and_then(|r| r.get(j));
                    if rec.map(|r| scalar::parse(r).ok()) != Some(Some(d.clone())) {
                        failures.push(format!(
                            "distance ({}, {}): recorded {}, computed {}",
                            w.points[i],
                            w.points[j],
                            rec.map_or("nothing", |s| s.as_str()),
                            scalar::fmt(&d)
                        ));
                    }
                    row.push(d);
                }
                rows.push(row);
            }
            let labels = w.points.iter().map(|p| p.to_string()).collect();
            failures.extend(check_metric(&FiniteMetricSpace::new(set, labels, rows)).into_iter().map(|e| format!("metric: {e}")));
            if let Some(pr) = &w.prescribed {
                let z = id(&map, pr.point)?;
                for (x, v) in &pr.f {
                    checks += 1;
                    let d = t.distance(z, id(&map, *x)?);
                    if scalar::parse(v).ok() != Some(d.clone()) {
                        failures.push(format!("realized point: d({}, {x}) = {} instead of {v}", pr.point, scalar::fmt(&d)));
                    }
                }
            }
        }
        Kind::Extension => match serde_json::from_value(c.payload.clone())? {
            Extension::Katetov { space, f, values } => {
                checks += 1;
                if let Err(e) = f.check(&space) {
                    failures.push(format!("not a Katětov function: {e}"));
                } else {
                    let got = katetov_extend(&f, &space)?;
                    let got_s: Vec<String> = got.iter().map(scalar::fmt).collect();
                    if got_s != values {
                        failures.push(format!("extension values recorded {values:?}, computed {got_s:?}"));
                    }
                    let n = space.len();
                    let mut dist = space.dist.clone();
                    for (i, row) in dist.iter_mut().enumerate() {
                        row.push(got[i].clone());
                    }
                    let mut last = got.clone();
                    last.push(Scalar::from_integer(0.into()));
                    dist.push(last);
                    let mut labels = space.points.clone();
                    labels.push(format!("p{n}"));
                    let ext = FiniteMetricSpace::new(space.set.clone(), labels, dist);
                    failures.extend(check_metric(&ext).into_iter().map(|e| format!("extended space: {e}")));
                }
            }
            Extension::Isometry { set, records, phi, graph } => {
                let mut t = tower_for(DistanceSet::try_from(set)?, None)?;
                let map = import(&mut t, &records)?;
                for pair in &phi {
                    checks += 1;
                    if !graph.contains(pair) {
                        failures.push(format!("φ pair {pair:?} missing from the extension"));
                    }
                }
                let g: Vec<(PointId, PointId)> =
                    graph.iter().map(|&(x, y)| Ok((id(&map, x)?, id(&map, y)?))).collect::<Result<_>>()?;
                let (n, ok) = verify_graph(&mut t, &g);
                checks += n;
                if !ok {
                    failures.push("the extension does not preserve distances".into());
                }
            }
        },
        Kind::SchedulerTranscript => {
            let tr: Transcript = serde_json::from_value(c.payload.clone())?;
            let r = verify_transcript(&tr)?;
            checks += r.homogeneity + r.faithfulness;
            failures.extend(r.failures);
            for (k, r) in verify_prefixes(&tr)?.into_iter().enumerate() {
                checks += r.entries;
                failures.extend(r.failures.into_iter().map(|f| format!("prefix {k}: {f}")));
            }
        }
        Kind::Witness => {
            let w: WitnessPayload = serde_json::from_value(c.payload.clone())?;
            let g = Group::new(w.group.clone())?;
            let gamma = g.parse(&w.gamma)?;
            let mut t = Tower::unbounded(g.clone());
            let map = import(&mut t, &w.records)?;
            let f: Vec<PointId> = w.f.iter().map(|&p| id(&map, p)).collect::<Result<_>>()?;
            let k = scalar::parse(&w.k)?;
            let nf = unbounded::threshold(&mut t, &f)?;
            checks += 1;
            if nf.to_string() != w.threshold {
                failures.push(format!("threshold recorded {}, computed {nf}", w.threshold));
            }
            if k < Scalar::from_integer(nf) {
                failures.push(format!("K = {} lies below the threshold", w.k));
            }
            let x0 = t.group_point(&g.identity());
            let pts: Vec<PointId> = f.iter().copied().chain([x0]).collect();
            for &x in &pts {
                for &y in &pts {
                    checks += 1;
                    let gy = t.act(&gamma, y)?;
                    let d = t.distance(x, gy);
                    if d != k {
                        failures.push(format!("d({x}, γ{y}) = {} instead of {}", scalar::fmt(&d), w.k));
                    }
                }
            }
        }
        Kind::FinpermResult => {
            let p: FinpermPayload = serde_json::from_value(c.payload.clone())?;
            checks += 1;
            let got = perm::run(&p.input)?;
            if got != p.result {
                failures.push(format!("result recorded {}, recomputed {got}", p.result));
            }
            failures.extend(perm::audit(&p.input, &p.result)?);
        }
    }
    if c.status == Status::Fail {
        failures.push("the producing run recorded a failure".into());
    }
    Ok(Report { kind: Some(c.kind), checks, ok: failures.is_empty(), failures })
}
