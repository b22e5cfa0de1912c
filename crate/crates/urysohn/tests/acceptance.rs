//! Acceptance checks. One PASS/FAIL line per criterion; exits nonzero if any fails.
//!
//! Every comparison is exact (rational equality, zero tolerance). The only pinned
//! tolerances are wall-clock budgets, listed per criterion below.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use urysohn::action::{induced_action, mixing_counterexamples, mixing_witness, strong_freeness_check};
use urysohn::agent::{extend_isometry, Constraint, Spaces};
use urysohn::finperm::{
    biindex, group_elements, is_primitive, minimal_block, partition_automorphism_gens, subset_action,
    symmetric_group_gens, transfer_character, CommensurationContext, EventualSet, FinPermutation,
};
use urysohn::genericity::{run_scheduler, verify_prefixes, verify_transcript, SetupSpec, Transcript};
use urysohn::group::{Group, GroupSpec};
use urysohn::metric::FiniteMetricSpace;
use urysohn::scalar::{self, int};
use urysohn::tower::{combinations, PointId, Tower};
use urysohn::unbounded::{disconnection_witness, level_scale, threshold, ScaleFunction};
use urysohn::{DistanceSet, Scalar};

const SEED: u64 = 20240601;

const BUDGET_WINDOW: Duration = Duration::from_secs(60); // per window
const BUDGET_EXTENSION: Duration = Duration::from_secs(10);
const BUDGET_GRAPH: Duration = Duration::from_secs(30);
const BUDGET_BACK_AND_FORTH: Duration = Duration::from_secs(30);
const BUDGET_ACTIONS: Duration = Duration::from_secs(60);
const BUDGET_SCHEDULER: Duration = Duration::from_secs(300); // per preset
const BUDGET_UNBOUNDED: Duration = Duration::from_secs(120);
const BUDGET_FINPERM: Duration = Duration::from_secs(60);

const PRESETS: [&str; 4] = ["Z*Z", "Z*Z2", "HNN-F2", "surface"];

/// Result of one criterion run: its verdict, a summary, and the certificate it produced.
struct Outcome {
    ok: bool,
    detail: String,
    cert: String,
}

type Run = Result<Outcome, String>;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn one_point(set: DistanceSet) -> FiniteMetricSpace {
    FiniteMetricSpace::new(set, vec!["o".into()], vec![vec![scalar::zero()]])
}

fn explicit_012() -> DistanceSet {
    DistanceSet::explicit(vec![int(0), int(1), int(2)])
}

fn unit_interval() -> DistanceSet {
    DistanceSet::RationalBounded(int(1))
}

fn matrix(t: &mut Tower, pts: &[PointId]) -> Vec<Vec<Scalar>> {
    pts.iter().map(|&p| pts.iter().map(|&q| t.distance(p, q)).collect()).collect()
}

fn fmt_matrix(d: &[Vec<Scalar>]) -> Vec<Vec<String>> {
    d.iter().map(|r| r.iter().map(scalar::fmt).collect()).collect()
}

// ---- 1 ----

fn window_soundness(set: DistanceSet, max_den: Option<i64>) -> Run {
    let start = Instant::now();
    let mut t = Tower::plain(one_point(set.clone()));
    let pts = t.window(150, 0);
    if pts.len() != 150 {
        return Ok(Outcome { ok: false, detail: format!("window has {} points", pts.len()), cert: String::new() });
    }
    let d = matrix(&mut t, &pts);
    let mut bad = Vec::new();
    for i in 0..150 {
        if !d[i][i].is_zero() {
            bad.push(format!("d({i},{i}) ≠ 0"));
        }
        for j in 0..150 {
            let v = &d[i][j];
            if i != j && !v.is_positive() {
                bad.push(format!("d({i},{j}) = {}", scalar::fmt(v)));
            }
            if *v != d[j][i] || !set.contains(v) {
                bad.push(format!("d({i},{j}) = {} asymmetric or outside S", scalar::fmt(v)));
            }
            if let Some(m) = max_den {
                if *v.denom() > BigInt::from(m) {
                    bad.push(format!("d({i},{j}) = {} has a large denominator", scalar::fmt(v)));
                }
            }
        }
    }
    let mut triangles = 0usize;
    for c in combinations(150, 3) {
        let (a, b, e) = (c[0], c[1], c[2]);
        triangles += 1;
        let ok = d[a][e] <= &d[a][b] + &d[b][e] && d[a][b] <= &d[a][e] + &d[e][b] && d[b][e] <= &d[b][a] + &d[a][e];
        if !ok {
            bad.push(format!("triangle ({a},{b},{e})"));
        }
    }
    let elapsed = start.elapsed();
    let cert = json!({ "records": t.export(&pts), "points": pts, "dist": fmt_matrix(&d) }).to_string();
    Ok(Outcome {
        ok: bad.is_empty() && elapsed <= BUDGET_WINDOW,
        detail: format!(
            "S={}: {triangles} triangles, {} violations, {:.1}s (budget {}s)",
            set.describe(),
            bad.len(),
            elapsed.as_secs_f64(),
            BUDGET_WINDOW.as_secs()
        ) + &bad.first().map(|b| format!("; first: {b}")).unwrap_or_default(),
        cert,
    })
}

fn c1() -> Run {
    let a = window_soundness(explicit_012(), None)?;
    let b = window_soundness(unit_interval(), Some(24))?;
    Ok(Outcome { ok: a.ok && b.ok, detail: format!("{}; {}", a.detail, b.detail), cert: a.cert + &b.cert })
}

// ---- 2 ----

fn c2() -> Run {
    let mut t = Tower::plain(one_point(unit_interval()));
    let base = t.window(40, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = Vec::new();
    let mut realized = Vec::new();
    for i in 0..100 {
        let k = rng.gen_range(1..=6);
        let pts: Vec<PointId> = base.choose_multiple(&mut rng, k).copied().collect();
        let f = t.random_katetov(&mut rng, &pts, &scalar::one());
        let z = t.realize(&f).map_err(err)?;
        for (x, v) in &f {
            let d = t.distance(z, *x);
            if d != *v {
                bad.push(format!("function {i}: d(z, {x}) = {} instead of {}", scalar::fmt(&d), scalar::fmt(v)));
            }
        }
        let f: Vec<(PointId, String)> = f.iter().map(|(p, v)| (*p, scalar::fmt(v))).collect();
        realized.push(json!({ "f": f, "z": z }));
    }
    let cert = json!({ "realized": realized, "records": t.export(&(0..t.len()).collect::<Vec<_>>()) }).to_string();
    Ok(Outcome { ok: bad.is_empty(), detail: format!("100 functions, {} mismatches", bad.len()), cert })
}

// ---- 3 ----

fn c3() -> Run {
    let mut t = Tower::plain(one_point(explicit_012()));
    let first = t.window(12, 0);
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for k in 0..=2 {
        subsets.extend(combinations(12, k));
    }
    let mut checked = 0usize;
    let mut bad = Vec::new();
    let mut witnesses = Vec::new();
    for u in &subsets {
        for v in &subsets {
            if u.iter().any(|i| v.contains(i)) {
                continue;
            }
            let mut f: Vec<(PointId, Scalar)> = u.iter().map(|&i| (first[i], int(1))).collect();
            f.extend(v.iter().map(|&i| (first[i], int(2))));
            let z = t.realize(&f).map_err(err)?;
            checked += 1;
            let fine = f.iter().all(|(x, want)| t.distance(z, *x) == *want);
            if !fine {
                bad.push(format!("U={u:?} V={v:?}"));
            }
            witnesses.push(z);
        }
    }
    Ok(Outcome {
        ok: bad.is_empty(),
        detail: format!("{checked} disjoint pairs (U, V), {} without a witness", bad.len()),
        cert: json!({ "witnesses": witnesses, "records": t.export(&witnesses) }).to_string(),
    })
}

// ---- 4 ----

fn c4() -> Run {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let mut t = Tower::plain(one_point(unit_interval()));
    let agenda = t.window(25, 0);
    let xs: Vec<PointId> = agenda.choose_multiple(&mut rng, 5).copied().collect();
    // images with the same distance pattern, built one realization at a time
    let mut ys: Vec<PointId> = vec![*agenda.choose(&mut rng).unwrap()];
    for i in 1..5 {
        let f: Vec<(PointId, Scalar)> = (0..i).map(|j| (ys[j], t.distance(xs[i], xs[j]))).collect();
        ys.push(t.realize(&f).map_err(err)?);
    }
    let phi: Vec<(PointId, PointId)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    let mut sp = Spaces::One(&mut t);
    let mut a = extend_isometry(&mut sp, Constraint::None, &phi, &agenda, &[]).map_err(err)?;
    let mut images = Vec::new();
    for &p in &agenda {
        images.push(a.apply(&mut sp, p).map_err(err)?);
    }
    let t = sp.side(true);
    let mut pairs = 0usize;
    let mut bad = Vec::new();
    for i in 0..25 {
        for j in (i + 1)..25 {
            pairs += 1;
            if t.distance(agenda[i], agenda[j]) != t.distance(images[i], images[j]) {
                bad.push((i, j));
            }
        }
    }
    let phi_kept = phi.iter().all(|(x, y)| images[agenda.iter().position(|p| p == x).unwrap()] == *y);

    // empty map between two independently seeded towers
    let mut t1 = Tower::plain(one_point(explicit_012()));
    let mut seed_rng = ChaCha8Rng::seed_from_u64(SEED + 40);
    let n = 4;
    let mut d = vec![vec![int(0); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = int(rng_pick(&mut seed_rng));
            d[i][j] = v.clone();
            d[j][i] = v;
        }
    }
    let mut t2 = Tower::plain(FiniteMetricSpace::new(explicit_012(), (0..n).map(|i| format!("s{i}")).collect(), d));
    let w1 = t1.window(25, 0);
    let w2 = t2.window(25, 0);
    let mut sp = Spaces::Two(&mut t1, &mut t2);
    let mut b = extend_isometry(&mut sp, Constraint::None, &[], &w1, &w2).map_err(err)?;
    let mut im = Vec::new();
    for &p in &w1 {
        im.push(b.apply(&mut sp, p).map_err(err)?);
    }
    let mut cross_bad = 0usize;
    let mut cross_pairs = 0usize;
    for i in 0..25 {
        for j in (i + 1)..25 {
            cross_pairs += 1;
            let l = sp.side(true).distance(w1[i], w1[j]);
            if l != sp.side(false).distance(im[i], im[j]) {
                cross_bad += 1;
            }
        }
    }
    for &q in &w2 {
        let p = b.apply_inv(&mut sp, q).map_err(err)?;
        if b.apply(&mut sp, p).map_err(err)? != q {
            cross_bad += 1;
        }
    }
    Ok(Outcome {
        ok: bad.is_empty() && phi_kept && pairs == 300 && cross_bad == 0 && cross_pairs == 300,
        detail: format!(
            "5-point φ kept: {phi_kept}, {pairs} pairs with {} mismatches; two towers: {cross_pairs} pairs and 25 back points, {cross_bad} failures",
            bad.len()
        ),
        cert: json!({ "phi": phi, "graph": a.graph(), "cross": b.graph() }).to_string(),
    })
}

fn rng_pick(rng: &mut ChaCha8Rng) -> i64 {
    // distances 1 and 2 always satisfy the triangle inequality
    rng.gen_range(1..=2)
}

// ---- 5 ----

fn actions_for(label: &str, spec: GroupSpec, seed: u64) -> Result<(bool, String, serde_json::Value), String> {
    let g = Group::new(spec).map_err(err)?;
    let mut a = induced_action(g.clone(), unit_interval()).map_err(err)?;
    let pts = a.tower().unwrap().window(12, 4);
    let elems: Vec<_> = g.ball(3, 200).into_iter().filter(|e| !g.is_identity(e)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample: Vec<_> = (0..100).map(|_| (elems.choose(&mut rng).unwrap().clone(), *pts.choose(&mut rng).unwrap())).collect();
    let free = strong_freeness_check(&mut a, &sample).map_err(err)?;
    let f = &pts[..4];
    let ex = mixing_witness(&mut a, f).map_err(err)?;
    let bad = mixing_counterexamples(&mut a, f, &ex, 8, 20000).map_err(err)?;
    let ball = g.ball(8, 20000).len();
    let exceptions: Vec<String> = ex.iter().map(|e| g.format(e)).collect();
    Ok((
        free.ok && bad.is_empty(),
        format!(
            "{label}: freeness {}/100, |E_F| = {}, {} counterexamples in a ball of {ball}",
            100 - free.witnesses.len(),
            ex.len(),
            bad.len()
        ),
        json!({ "freeness": free, "exceptions": exceptions }),
    ))
}

fn c5() -> Run {
    let (a, da, ca) = actions_for("Z", GroupSpec::integers("a"), SEED + 5)?;
    let (b, db, cb) = actions_for("F2", GroupSpec::free(&["a", "b"]), SEED + 6)?;
    Ok(Outcome {
        ok: a && b,
        detail: format!("{da}; {db}"),
        cert: json!([ca, cb]).to_string(),
    })
}

// ---- 6, 7 ----

fn scheduled(name: &str, seed: u64) -> Result<(Transcript, Duration), String> {
    let start = Instant::now();
    let spec = SetupSpec::preset(name).ok_or_else(|| format!("no preset {name}"))?;
    let run = run_scheduler(&spec, 15, seed).map_err(|f| format!("{name}: {}", f.error))?;
    Ok((run.transcript, start.elapsed()))
}

/// 5 homogeneity and 10 faithfulness requirements, all confirmed in a fresh tower.
fn transcript_ok(name: &str, tr: &Transcript, took: Duration) -> Result<(bool, String), String> {
    let r = verify_transcript(tr).map_err(err)?;
    let ok = r.ok() && r.homogeneity == 5 && r.faithfulness == 10 && took <= BUDGET_SCHEDULER;
    let first = r.failures.first().map(|f| format!(" first failure: {f}")).unwrap_or_default();
    Ok((ok, format!("{name} {}+{} in {:.1}s{first}", r.homogeneity, r.faithfulness, took.as_secs_f64())))
}

fn c6(runs: &mut Vec<(String, Transcript)>) -> Run {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut certs = String::new();
    for (i, name) in PRESETS.iter().enumerate() {
        let (tr, took) = scheduled(name, SEED + i as u64)?;
        let (good, text) = transcript_ok(name, &tr, took)?;
        ok &= good;
        parts.push(text);
        certs += &serde_json::to_string(&tr).map_err(err)?;
        runs.push((name.to_string(), tr));
    }
    Ok(Outcome { ok, detail: parts.join(", "), cert: certs })
}

fn prefixes(runs: &[(String, Transcript)]) -> Run {
    let mut ok = !runs.is_empty();
    let mut parts = Vec::new();
    for (name, tr) in runs {
        let reports = verify_prefixes(tr).map_err(err)?;
        let failing: Vec<usize> = reports.iter().enumerate().filter(|(_, r)| !r.ok()).map(|(k, _)| k).collect();
        let checks: usize = reports.iter().map(|r| r.entries).sum();
        ok &= failing.is_empty() && reports.len() == tr.entries.len();
        parts.push(format!("{name} {} prefixes/{checks} re-checks, failing {failing:?}", reports.len()));
    }
    Ok(Outcome { ok, detail: parts.join(", "), cert: String::new() })
}

fn c7(runs: &[(String, Transcript)]) -> Run {
    prefixes(runs)
}

// ---- 8 ----

/// `n` repeated `φ(n)` times, built from `φ` alone.
fn preimage_oracle(phi: &ScaleFunction, upto: u64) -> Vec<BigInt> {
    let mut seq = Vec::new();
    for n in 1..=upto {
        let c: u64 = phi.phi(n).try_into().unwrap();
        seq.extend(std::iter::repeat(BigInt::from(n)).take(c as usize));
    }
    seq
}

fn scale_tables() -> (bool, String) {
    let scales = vec![
        ScaleFunction::Identity,
        ScaleFunction::Doubling { n: BigInt::from(3) },
        ScaleFunction::Table { phi: vec![1, 2, 2, 5, 7] },
        level_scale(2),
        level_scale(4),
    ];
    let mut bad = Vec::new();
    for s in &scales {
        let seq = preimage_oracle(s, 31);
        for (i, want) in seq.iter().enumerate() {
            let got = s.apply(&BigInt::from(i + 1));
            if got != *want {
                bad.push(format!("{s:?}: f({}) = {got}, expected {want}", i + 1));
                break;
            }
        }
        for n in 1..=30u64 {
            let count = (1..=seq.len()).filter(|&m| s.apply(&BigInt::from(m)) == BigInt::from(n)).count();
            if BigInt::from(count) != s.phi(n) {
                bad.push(format!("{s:?}: |f⁻¹({n})| = {count}"));
            }
        }
        for a in 1..=30 {
            for b in 1..=30 {
                let (x, y) = (BigInt::from(a), BigInt::from(b));
                if s.apply(&(&x + &y)) > s.apply(&x) + s.apply(&y) {
                    bad.push(format!("{s:?}: not subadditive at ({a}, {b})"));
                }
            }
        }
    }
    (bad.is_empty(), format!("{} scale functions, {} failures", scales.len(), bad.len()) + &bad.first().map(|b| format!("; {b}")).unwrap_or_default())
}

fn witnesses() -> Result<(bool, String, serde_json::Value), String> {
    let g = Group::new(GroupSpec::integers("a")).map_err(err)?;
    let mut t = Tower::unbounded(g.clone());
    let f = t.window(2, 1);
    let nf = threshold(&mut t, &f).map_err(err)?;
    let ks: Vec<BigInt> = vec![nf.clone(), &nf + 1u32, &nf + 7u32, &nf * 2u32, &nf * 3u32 + 5u32];
    let records = t.export(&f);
    let mut bad = 0usize;
    let mut out = Vec::new();
    for k in &ks {
        let w = disconnection_witness(&mut t, &f, k).map_err(err)?;
        // re-check in a fresh tower holding only F
        let mut fresh = Tower::unbounded(g.clone());
        let map = fresh.import(&records).map_err(err)?;
        let ff: Vec<PointId> = f.iter().map(|p| map[p]).collect();
        for &x in &ff {
            for &y in &ff {
                let gy = fresh.act(&w.gamma, y).map_err(err)?;
                if fresh.distance(x, gy) != Scalar::from_integer(k.clone()) {
                    bad += 1;
                }
            }
        }
        out.push(json!({ "K": k.to_string(), "witness": w, "gamma": g.format(&w.gamma) }));
    }
    let below = disconnection_witness(&mut t, &f, &(&nf - 1u32)).is_err() || nf <= BigInt::one();
    Ok((
        bad == 0 && below && nf.is_positive(),
        format!("N(F) = {nf}, K ∈ {:?}: {bad} wrong distances, K = N(F)−1 refused: {below}", ks.iter().map(|k| k.to_string()).collect::<Vec<_>>()),
        json!({ "records": records, "witnesses": out }),
    ))
}

fn c8() -> Run {
    let start = Instant::now();
    let (tables_ok, tables) = scale_tables();
    let (wit_ok, wit, wcert) = witnesses()?;
    let (tr, took) = scheduled("unbounded-Z*Z", SEED + 8)?;
    let (sched_ok, sched) = transcript_ok("unbounded-Z*Z", &tr, took)?;
    let pre = prefixes(&[("unbounded-Z*Z".into(), tr.clone())])?;
    let elapsed = start.elapsed();
    Ok(Outcome {
        ok: tables_ok && wit_ok && sched_ok && pre.ok && elapsed <= BUDGET_UNBOUNDED,
        detail: format!(
            "{tables}; {wit}; {sched}; {}; {:.1}s (budget {}s)",
            pre.detail,
            elapsed.as_secs_f64(),
            BUDGET_UNBOUNDED.as_secs()
        ),
        cert: json!({ "witnesses": wcert, "transcript": tr }).to_string(),
    })
}

// ---- 9 ----

fn all_perms(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for q in all_perms(n - 1) {
        for i in 0..n {
            let mut v = q.clone();
            v.insert(i, n - 1);
            out.push(v);
        }
    }
    out
}

fn image(v: &[usize], s: &BTreeSet<usize>) -> BTreeSet<usize> {
    s.iter().map(|&x| v[x]).collect()
}

/// Size of the subgroup generated by `gens`, by closure under composition.
fn closure_size(gens: &[Vec<usize>]) -> usize {
    let n = gens.first().map_or(0, |g| g.len());
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut stack = vec![(0..n).collect::<Vec<usize>>()];
    while let Some(x) = stack.pop() {
        if !seen.insert(x.clone()) {
            continue;
        }
        for g in gens {
            stack.push(x.iter().map(|&i| g[i]).collect());
        }
    }
    seen.len()
}

/// `tr` counted pointwise on an initial segment past every irregularity.
fn tr_oracle(sigma: &FinPermutation, x: &EventualSet, upto: u64) -> i64 {
    let inv = sigma.inverse();
    let mut tr = 0i64;
    for y in 0..upto {
        let in_image = x.contains(inv.apply(y));
        match (in_image, x.contains(y)) {
            (true, false) => tr += 1,
            (false, true) => tr -= 1,
            _ => {}
        }
    }
    tr
}

fn c9() -> Run {
    let mut bad: Vec<String> = Vec::new();
    let mut out = serde_json::Map::new();

    // biindex of the 2-set stabilizer in S6, against H-orbits on 2-subsets
    let (subs, ind) = subset_action(&symmetric_group_gens(6), 6, 2).map_err(err)?;
    let base: BTreeSet<usize> = [0, 1].into();
    let got = biindex(&ind, subs.len(), subs.iter().position(|s| *s == base).unwrap()).map_err(err)?;
    let stab: Vec<Vec<usize>> = all_perms(6).into_iter().filter(|v| image(v, &base) == base).collect();
    let mut orbits: BTreeSet<BTreeSet<BTreeSet<usize>>> = BTreeSet::new();
    for s in &subs {
        orbits.insert(stab.iter().map(|v| image(v, s)).collect());
    }
    if got != 3 || orbits.len() != 3 {
        bad.push(format!("biindex {got}, orbit count {}", orbits.len()));
    }
    out.insert("biindex".into(), json!(got));

    // S6 natural action is primitive; the pair-partition automorphisms are not
    let s6 = symmetric_group_gens(6);
    let s6_prim = is_primitive(&s6, 6).map_err(err)?;
    let p2 = partition_automorphism_gens(2, 3);
    let p2_prim = is_primitive(&p2, 6).map_err(err)?;
    let p2_elems = group_elements(&p2, 6).map_err(err)?;
    let mut blocks = Vec::new();
    for a in [0usize, 2, 4] {
        let blk = minimal_block(&p2, 6, a, a + 1).map_err(err)?;
        let want: BTreeSet<usize> = [a, a + 1].into();
        let is_blk = p2_elems.iter().all(|v| {
            let im = image(v, &blk);
            im == blk || im.is_disjoint(&blk)
        });
        if blk != want || !is_blk {
            bad.push(format!("block of ({a}, {}) is {blk:?}", a + 1));
        }
        blocks.push(blk);
    }
    if !s6_prim || p2_prim {
        bad.push(format!("S6 primitive {s6_prim}, P2 primitive {p2_prim}"));
    }
    out.insert("blocks".into(), json!(blocks));

    // tr vanishes on finitely supported permutations
    let c = CommensurationContext::evens();
    let x = EventualSet::evens();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    let mut finitary = Vec::new();
    for _ in 0..50 {
        let s = FinPermutation::random_finitary(&mut rng, 24);
        let tr = transfer_character(&s, &c).map_err(err)?;
        if tr != 0 || tr_oracle(&s, &x, 64) != 0 || !s.is_finitely_supported() {
            bad.push(format!("tr({s}) = {tr}"));
        }
        finitary.push(s.to_string());
    }
    out.insert("finitary".into(), json!(finitary));

    // paired shift and its powers
    let sh = FinPermutation::paired_shift();
    let mut powers = Vec::new();
    for k in 1..=5i64 {
        let sk = sh.pow(k);
        let tr = transfer_character(&sk, &c).map_err(err)?;
        let oracle = tr_oracle(&sk, &x, 200);
        if tr != -k || oracle != -k {
            bad.push(format!("tr(σ^{k}) = {tr}, pointwise {oracle}"));
        }
        powers.push(tr);
    }
    out.insert("shift_powers".into(), json!(powers));

    // primitivity of S_n on k-subsets against maximality of the stabilizer, n ≤ 5
    let mut agreed = 0usize;
    for n in 2..=5usize {
        let elems = all_perms(n);
        for k in 1..n {
            let (subs, ind) = subset_action(&symmetric_group_gens(n), n, k).map_err(err)?;
            let a = &subs[0];
            let stab: Vec<Vec<usize>> = elems.iter().filter(|v| image(v, a) == *a).cloned().collect();
            let maximal = elems.iter().filter(|v| image(v, a) != *a).all(|v| {
                let mut gens = stab.clone();
                gens.push(v.clone());
                closure_size(&gens) == elems.len()
            });
            let prim = is_primitive(&ind, subs.len()).map_err(err)?;
            if prim != maximal {
                bad.push(format!("n={n} k={k}: primitive {prim}, maximal {maximal}"));
            } else {
                agreed += 1;
            }
        }
    }
    out.insert("agreements".into(), json!(agreed));

    Ok(Outcome {
        ok: bad.is_empty(),
        detail: format!(
            "biindex {got}, S6 primitive, P2 blocks {blocks:?}, tr: 50 finitary + σ^1..5 = {powers:?}, {agreed} (n, k) agreements"
        ) + &bad.first().map(|b| format!("; first failure: {b}")).unwrap_or_default(),
        cert: serde_json::Value::Object(out).to_string(),
    })
}

// ---- driver ----

fn report(name: &str, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Run) -> (bool, String) {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    let (ok, detail, cert) = match r {
        Ok(o) => (o.ok, o.detail, o.cert),
        Err(e) => (false, format!("error: {e}"), String::new()),
    };
    let in_time = budget.map_or(true, |b| took <= b);
    let ok = ok && in_time;
    let budget = budget.map(|b| format!(", budget {}s", b.as_secs())).unwrap_or_default();
    println!("{} {name} {title}: {detail} [{:.1}s{budget}]", if ok { "PASS" } else { "FAIL" }, took.as_secs_f64());
    (ok, cert)
}

fn main() {
    let mut all = true;
    let mut certs: Vec<(&str, String)> = Vec::new();
    let mut runs: Vec<(String, Transcript)> = Vec::new();

    let (ok, c) = report("c1", "metric soundness", Some(2 * BUDGET_WINDOW), c1);
    all &= ok;
    certs.push(("c1", c));
    let (ok, c) = report("c2", "extension property", Some(BUDGET_EXTENSION), c2);
    all &= ok;
    certs.push(("c2", c));
    let (ok, c) = report("c3", "random-graph axiom", Some(BUDGET_GRAPH), c3);
    all &= ok;
    certs.push(("c3", c));
    let (ok, c) = report("c4", "back-and-forth", Some(BUDGET_BACK_AND_FORTH), c4);
    all &= ok;
    certs.push(("c4", c));
    let (ok, c) = report("c5", "induced-action certificates", Some(BUDGET_ACTIONS), c5);
    all &= ok;
    certs.push(("c5", c));
    let (ok, c) = report("c6", "scheduler soundness", Some(4 * BUDGET_SCHEDULER), || c6(&mut runs));
    all &= ok;
    certs.push(("c6", c));
    let (ok, _) = report("c7", "persistence", None, || c7(&runs));
    all &= ok;
    let (ok, c) = report("c8", "unbounded machinery", Some(BUDGET_UNBOUNDED), c8);
    all &= ok;
    certs.push(("c8", c));
    let (ok, c) = report("c9", "finperm checks", Some(BUDGET_FINPERM), c9);
    all &= ok;
    certs.push(("c9", c));

    let (ok, _) = report("c10", "determinism", None, || {
        let mut differ = Vec::new();
        for (name, first) in &certs {
            let again = match *name {
                "c1" => c1(),
                "c2" => c2(),
                "c3" => c3(),
                "c4" => c4(),
                "c5" => c5(),
                "c6" => c6(&mut Vec::new()),
                "c8" => c8(),
                "c9" => c9(),
                _ => unreachable!(),
            }?;
            if first.is_empty() || again.cert.as_bytes() != first.as_bytes() {
                differ.push(*name);
            }
        }
        let total: usize = certs.iter().map(|c| c.1.len()).sum();
        Ok(Outcome {
            ok: differ.is_empty(),
            detail: format!("{} certificates ({total} bytes) rerun, differing: {differ:?}", certs.len()),
            cert: String::new(),
        })
    });
    all &= ok;

    if !all {
        std::process::exit(1);
    }
}
