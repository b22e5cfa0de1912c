//! `urysohn`: build windows of Urysohn-type spaces, run and verify genericity schedules,
//! and compute with finitary permutation groups.

mod cert;
mod perm;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use urysohn::action::{
    hcf_action_witness, induced_action, mixing_counterexamples, mixing_witness, strong_freeness_check, GroupAction,
};
use urysohn::agent::{extend_isometry, Constraint, Spaces};
use urysohn::finperm::EventualSet;
use urysohn::genericity::{run_scheduler, SetupSpec};
use urysohn::group::{presets, Group, GroupSpec, Subgroup};
use urysohn::metric::{amalgam, check_metric, katetov_extend, FiniteMetricSpace, KatetovFunction};
use urysohn::scalar;
use urysohn::tower::{PointId, Tower};
use urysohn::unbounded::{disconnection_witness, level_descriptors};
use urysohn::DistanceSet;

use cert::{Certificate, Extension, Kind, MetricCheck, Prescribed, WitnessPayload};
use perm::{Op, PermInput};

#[derive(Parser)]
#[command(name = "urysohn", version, about = "Exact Katětov towers, generic actions and finitary permutation groups")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Report errors on standard error as JSON.
    #[arg(long, global = true)]
    json_errors: bool,
    #[arg(long, global = true, default_value_t = 5000)]
    budget_points: usize,
    #[arg(long, global = true, default_value_t = 1000)]
    budget_steps: usize,
    #[arg(long, global = true, default_value_t = 16)]
    budget_radius: usize,
    /// Write the output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Finite metric spaces.
    Metric {
        #[command(subcommand)]
        cmd: MetricCmd,
    },
    /// One-point extensions.
    Katetov {
        #[command(subcommand)]
        cmd: KatetovCmd,
    },
    /// Metric amalgam of spaces sharing the labels in `--base`.
    Amalgam {
        files: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        base: Vec<String>,
    },
    /// Windows of S-Urysohn spaces.
    Urysohn {
        #[command(subcommand)]
        cmd: UrysohnCmd,
    },
    /// Normal forms in group presets.
    Group {
        #[command(subcommand)]
        cmd: GroupCmd,
    },
    /// Induced actions on towers over a group.
    Action {
        #[command(subcommand)]
        cmd: ActionCmd,
    },
    /// Genericity scheduler.
    Generic {
        #[command(subcommand)]
        cmd: GenericCmd,
    },
    /// The ℚ⁺ tower and disconnection witnesses.
    Unbounded {
        #[command(subcommand)]
        cmd: UnboundedCmd,
    },
    /// Finitary permutation groups.
    Perm {
        #[command(subcommand)]
        cmd: PermCmd,
    },
    /// Re-check a certificate from scratch.
    Verify { file: PathBuf },
}

#[derive(Subcommand)]
enum MetricCmd {
    Check { file: PathBuf },
}

#[derive(Subcommand)]
enum KatetovCmd {
    Extend {
        #[arg(long)]
        space: PathBuf,
        /// Support as `index:value,…`.
        #[arg(long)]
        f: String,
    },
}

#[derive(Subcommand)]
enum UrysohnCmd {
    Build {
        /// `0,1/2,1`, `Q[0,M]`, `aN` or `Q+`.
        #[arg(long = "S")]
        set: String,
        #[arg(long, default_value_t = 50)]
        points: usize,
    },
    /// Realize a point with prescribed distances to points of a window certificate.
    Realize {
        #[arg(long)]
        window: PathBuf,
        /// `record:value,…`.
        #[arg(long)]
        f: String,
    },
    /// Extend a partial isometry between window points by back-and-forth.
    Extend {
        #[arg(long = "S")]
        set: String,
        /// `i:j,…` as window positions.
        #[arg(long)]
        phi: String,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
}

#[derive(Subcommand)]
enum GroupCmd {
    Reduce {
        #[arg(long)]
        group: String,
        #[arg(long)]
        word: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Free,
    Mixing,
    Hcf,
}

#[derive(Subcommand)]
enum ActionCmd {
    Build {
        #[arg(long)]
        group: String,
        #[arg(long = "S", default_value = "Q[0,1]")]
        set: String,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    Check {
        #[arg(long, value_enum)]
        property: Property,
        #[arg(long)]
        group: String,
        #[arg(long = "S", default_value = "Q[0,1]")]
        set: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 8)]
        radius: usize,
        /// Generator word of the cyclic subgroup `Σ` for `hcf`; trivial when omitted.
        #[arg(long)]
        sigma: Option<String>,
    },
}

#[derive(Subcommand)]
enum GenericCmd {
    Run {
        #[arg(long, conflicts_with = "setup")]
        preset: Option<String>,
        #[arg(long)]
        setup: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    Verify { file: PathBuf },
}

#[derive(Subcommand)]
enum UnboundedCmd {
    Build {
        #[arg(long, default_value_t = 5)]
        levels: u32,
        /// Length of the printed φ and f_φ tables.
        #[arg(long, default_value_t = 30)]
        terms: u64,
    },
    Witness {
        #[arg(long = "K")]
        k: String,
        #[arg(long, default_value = "Z")]
        group: String,
        /// Size of `F`, taken from the start of the window.
        #[arg(long, default_value_t = 2)]
        points: usize,
    },
}

#[derive(clap::Args, Clone)]
struct GenArgs {
    /// A generator, e.g. `(0 1)(2 3 4)`.
    #[arg(long = "gen")]
    gens: Vec<String>,
    /// Add generators of `S_n` and act on `{0, …, n−1}`.
    #[arg(long)]
    sym: Option<usize>,
    /// Add generators of the automorphisms of `k·m` points cut into `m` classes of size `k`.
    #[arg(long, value_delimiter = ',')]
    partition_aut: Option<Vec<usize>>,
    /// Size of the finite set; defaults to the one implied by `--sym` / `--partition-aut`.
    #[arg(long)]
    n: Option<usize>,
    /// Act on `k`-subsets.
    #[arg(long)]
    subsets: Option<usize>,
}

#[derive(Subcommand)]
enum PermCmd {
    Blocks {
        #[command(flatten)]
        g: GenArgs,
        #[arg(long, value_delimiter = ',')]
        pair: Option<Vec<usize>>,
    },
    Biindex {
        #[command(flatten)]
        g: GenArgs,
        #[arg(long)]
        base: Option<usize>,
    },
    Tr {
        #[arg(long)]
        sigma: String,
        /// `evens`, `odds`, or numbers and pieces `[r mod m, n>=a]`.
        #[arg(long, default_value = "evens")]
        x: String,
    },
    Schlichting {
        #[command(flatten)]
        g: GenArgs,
        /// `k-set`, `commensurated` or `partition`.
        #[arg(long = "type")]
        kind: String,
        #[arg(long)]
        value: String,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
}

/// Failures that are not usage errors.
#[derive(Debug)]
struct Failed(String);

impl std::fmt::Display for Failed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failed {}

fn parse_set(text: &str) -> Result<DistanceSet> {
    let t = text.trim();
    let s = if t == "Q+" {
        DistanceSet::RationalUnbounded
    } else if let Some(m) = t.strip_prefix("Q[0,").and_then(|r| r.strip_suffix(']')) {
        DistanceSet::RationalBounded(scalar::parse(m)?)
    } else if let Some(step) = t.strip_suffix('N') {
        DistanceSet::GridUnbounded(scalar::parse(step)?)
    } else {
        DistanceSet::parse_explicit(t)?
    };
    let bad = s.validate();
    if !bad.is_empty() {
        bail!("invalid distance set: {}", bad.join("; "));
    }
    Ok(s)
}

fn parse_group(text: &str) -> Result<GroupSpec> {
    if let Some(g) = presets::by_name(text) {
        return Ok(g);
    }
    let path = Path::new(text);
    if path.exists() {
        return Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?);
    }
    bail!("unknown group {text:?}: not a preset and not a file")
}

fn parse_pairs<A: std::str::FromStr, B: std::str::FromStr>(text: &str) -> Result<Vec<(A, B)>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (a, b) = item.split_once(':').ok_or_else(|| anyhow!("expected `a:b`, got {item:?}"))?;
            let a = a.trim().parse().map_err(|_| anyhow!("bad entry {item:?}"))?;
            let b = b.trim().parse().map_err(|_| anyhow!("bad entry {item:?}"))?;
            Ok((a, b))
        })
        .collect()
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

struct Ctx {
    seed: u64,
    budget_points: usize,
    budget_steps: usize,
    budget_radius: usize,
    out: Option<PathBuf>,
}

impl Ctx {
    fn emit(&self, v: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(v)? + "\n";
        match &self.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
            None => print!("{text}"),
        }
        Ok(())
    }

    /// Writes the certificate and fails with exit 1 when it records a failure.
    fn certify(&self, c: &Certificate) -> Result<()> {
        self.emit(&serde_json::to_value(c)?)?;
        if c.status == cert::Status::Fail {
            return Err(Failed(format!("{:?} check failed", c.kind)).into());
        }
        Ok(())
    }

    fn points(&self, n: usize) -> Result<usize> {
        if n == 0 || n > self.budget_points {
            bail!("points must lie in 1..={}", self.budget_points);
        }
        Ok(n)
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.budget_points == 0 || cli.budget_steps == 0 || cli.budget_radius == 0 {
        bail!("budgets must be positive");
    }
    let ctx = Ctx {
        seed: cli.seed,
        budget_points: cli.budget_points,
        budget_steps: cli.budget_steps,
        budget_radius: cli.budget_radius,
        out: cli.out,
    };
    match cli.cmd {
        Cmd::Metric { cmd: MetricCmd::Check { file } } => {
            let space: FiniteMetricSpace = serde_json::from_value(read_json(&file)?)?;
            let violations = check_metric(&space);
            let ok = violations.is_empty();
            ctx.certify(&Certificate::new(Kind::MetricCheck, &MetricCheck { space, violations }, ok)?)
        }
        Cmd::Katetov { cmd: KatetovCmd::Extend { space, f } } => {
            let space: FiniteMetricSpace = serde_json::from_value(read_json(&space)?)?;
            let support: Vec<(usize, String)> = parse_pairs(&f)?;
            let support = support.into_iter().map(|(i, v)| Ok((i, scalar::parse(&v)?))).collect::<Result<Vec<_>>>()?;
            let f = KatetovFunction::new(support);
            f.check(&space)?;
            let values = katetov_extend(&f, &space)?.iter().map(scalar::fmt).collect();
            ctx.certify(&Certificate::new(Kind::Extension, &Extension::Katetov { space, f, values }, true)?)
        }
        Cmd::Amalgam { files, base } => {
            let spaces = files
                .iter()
                .map(|p| Ok(serde_json::from_value(read_json(p)?)?))
                .collect::<Result<Vec<FiniteMetricSpace>>>()?;
            let space = amalgam(&spaces, &base)?;
            let violations = check_metric(&space);
            let ok = violations.is_empty();
            ctx.certify(&Certificate::new(Kind::MetricCheck, &MetricCheck { space, violations }, ok)?)
        }
        Cmd::Urysohn { cmd } => urysohn_cmd(&ctx, cmd),
        Cmd::Group { cmd: GroupCmd::Reduce { group, word } } => {
            let g = Group::new(parse_group(&group)?)?;
            let e = g.parse(&word)?;
            ctx.emit(&json!({ "word": word, "normal_form": g.format(&e), "elem": e }))
        }
        Cmd::Action { cmd } => action_cmd(&ctx, cmd),
        Cmd::Generic { cmd } => generic_cmd(&ctx, cmd),
        Cmd::Unbounded { cmd } => unbounded_cmd(&ctx, cmd),
        Cmd::Perm { cmd } => perm_cmd(&ctx, cmd),
        Cmd::Verify { file } => verify_file(&ctx, &file),
    }
}

fn urysohn_cmd(ctx: &Ctx, cmd: UrysohnCmd) -> Result<()> {
    match cmd {
        UrysohnCmd::Build { set, points } => {
            let n = ctx.points(points)?;
            let mut t = cert::tower_for(parse_set(&set)?, None)?;
            let pts = t.window(n, 0);
            let w = cert::window_payload(&mut t, None, &pts);
            ctx.certify(&Certificate::new(Kind::Realization, &w, true)?)
        }
        UrysohnCmd::Realize { window, f } => {
            let c: Certificate = serde_json::from_value(read_json(&window)?)?;
            if c.kind != Kind::Realization {
                bail!("{} is not a window certificate", window.display());
            }
            let w: cert::Window = serde_json::from_value(c.payload)?;
            let mut t = cert::tower_for(DistanceSet::try_from(w.set.clone())?, w.group.as_ref())?;
            let map = t.import(&w.records)?;
            let wanted: Vec<(PointId, String)> = parse_pairs(&f)?;
            let mut fv = Vec::new();
            for (x, v) in &wanted {
                let p = *map.get(x).ok_or_else(|| anyhow!("record {x} is not in the window"))?;
                fv.push((p, scalar::parse(v)?));
            }
            let z = t.realize(&fv)?;
            let mut pts: Vec<PointId> = w.points.iter().map(|p| map[p]).collect();
            if !pts.contains(&z) {
                pts.push(z);
            }
            let mut out = cert::window_payload(&mut t, w.group.as_ref(), &pts);
            let f = fv.iter().map(|(p, v)| (*p, scalar::fmt(v))).collect();
            out.prescribed = Some(Prescribed { point: z, f });
            ctx.certify(&Certificate::new(Kind::Realization, &out, true)?)
        }
        UrysohnCmd::Extend { set, phi, points } => {
            let n = ctx.points(points)?;
            let set = parse_set(&set)?;
            let mut t = cert::tower_for(set.clone(), None)?;
            let win = t.window(n, 0);
            let pos: Vec<(usize, usize)> = parse_pairs(&phi)?;
            let mut pairs = Vec::new();
            for (i, j) in pos {
                let (a, b) = (win.get(i), win.get(j));
                pairs.push((*a.ok_or_else(|| anyhow!("no window point {i}"))?, *b.ok_or_else(|| anyhow!("no window point {j}"))?));
            }
            let agent = extend_isometry(&mut Spaces::One(&mut t), Constraint::None, &pairs, &win, &win)?;
            let graph = agent.graph();
            let mut touched: Vec<PointId> = graph.iter().flat_map(|&(a, b)| [a, b]).collect();
            touched.sort_unstable();
            touched.dedup();
            let records = t.export(&touched);
            let e = Extension::Isometry { set: (&set).into(), records, phi: pairs, graph };
            ctx.certify(&Certificate::new(Kind::Extension, &e, true)?)
        }
    }
}

fn action_cmd(ctx: &Ctx, cmd: ActionCmd) -> Result<()> {
    match cmd {
        ActionCmd::Build { group, set, points } => {
            let spec = parse_group(&group)?;
            let mut t = cert::tower_for(parse_set(&set)?, Some(&spec))?;
            let pts = t.window(ctx.points(points)?, 4);
            let w = cert::window_payload(&mut t, Some(&spec), &pts);
            ctx.certify(&Certificate::new(Kind::Realization, &w, true)?)
        }
        ActionCmd::Check { property, group, set, samples, radius, sigma } => {
            if radius > ctx.budget_radius {
                bail!("radius exceeds --budget-radius {}", ctx.budget_radius);
            }
            let g = Group::new(parse_group(&group)?)?;
            let mut a = induced_action(g.clone(), parse_set(&set)?)?;
            let win = match &mut a {
                GroupAction::Induced(t) => t.window(8, 4),
                GroupAction::Finite(_) => unreachable!(),
            };
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let report = match property {
                Property::Free => {
                    let ball: Vec<_> = g.ball(3, 400).into_iter().filter(|e| !g.is_identity(e)).collect();
                    let sample: Vec<_> = (0..samples)
                        .map(|_| (ball.choose(&mut rng).unwrap().clone(), *win.choose(&mut rng).unwrap()))
                        .collect();
                    let r = strong_freeness_check(&mut a, &sample)?;
                    json!({ "property": "free", "samples": samples, "ok": r.ok, "violations": r.witnesses.iter().map(|(e, p, d)| json!([g.format(e), p, d])).collect::<Vec<_>>() })
                }
                Property::Mixing => {
                    let f = &win[..win.len().min(4)];
                    let ex = mixing_witness(&mut a, f)?;
                    let bad = mixing_counterexamples(&mut a, f, &ex, radius, 20000)?;
                    json!({ "property": "mixing", "ok": bad.is_empty(), "points": f, "exceptions": ex.iter().map(|e| g.format(e)).collect::<Vec<_>>(), "counterexamples": bad.iter().map(|e| g.format(e)).collect::<Vec<_>>(), "radius": radius })
                }
                Property::Hcf => {
                    let sub = match &sigma {
                        Some(w) => Subgroup::Cyclic { generator: g.parse(w)? },
                        None => Subgroup::Trivial,
                    };
                    let f = &win[..win.len().min(3)];
                    let gg = g.clone();
                    let w = hcf_action_witness(&mut a, &|x| sub.contains(&gg, x), &|_| true, f, radius, 20000)?;
                    json!({ "property": "hcf", "ok": true, "points": f, "witness": g.format(&w) })
                }
            };
            let ok = report["ok"] == Value::Bool(true);
            ctx.emit(&report)?;
            if !ok {
                return Err(Failed("property check failed".into()).into());
            }
            Ok(())
        }
    }
}

fn generic_cmd(ctx: &Ctx, cmd: GenericCmd) -> Result<()> {
    match cmd {
        GenericCmd::Run { preset, setup, steps } => {
            if steps == 0 || steps > ctx.budget_steps {
                bail!("steps must lie in 1..={}", ctx.budget_steps);
            }
            let spec = match (preset, setup) {
                (Some(p), _) => SetupSpec::preset(&p).ok_or_else(|| anyhow!("unknown preset {p:?}"))?,
                (None, Some(f)) => serde_json::from_value(read_json(&f)?)?,
                (None, None) => bail!("give --preset or --setup"),
            };
            match run_scheduler(&spec, steps, ctx.seed) {
                Ok(run) => ctx.certify(&Certificate::new(Kind::SchedulerTranscript, &run.transcript, true)?),
                Err(f) => {
                    ctx.emit(&serde_json::to_value(Certificate::new(Kind::SchedulerTranscript, &f.transcript, false)?)?)?;
                    Err(Failed(format!("scheduler stopped: {}", f.error)).into())
                }
            }
        }
        GenericCmd::Verify { file } => verify_file(ctx, &file),
    }
}

fn unbounded_cmd(ctx: &Ctx, cmd: UnboundedCmd) -> Result<()> {
    match cmd {
        UnboundedCmd::Build { levels, terms } => {
            let levels: Vec<Value> = level_descriptors(levels)
                .into_iter()
                .map(|d| {
                    let phi: Vec<String> = (1..=terms).map(|i| d.scale.phi(i).to_string()).collect();
                    let f: Vec<String> = (0..=terms).map(|m| d.scale.apply(&m.into()).to_string()).collect();
                    json!({ "descriptor": d, "phi": phi, "f_phi": f })
                })
                .collect();
            ctx.emit(&json!({ "levels": levels }))
        }
        UnboundedCmd::Witness { k, group, points } => {
            let spec = parse_group(&group)?;
            let g = Group::new(spec.clone())?;
            let mut t = Tower::unbounded(g.clone());
            let f = t.window(ctx.points(points)?, points);
            let kk = k.parse().map_err(|_| anyhow!("K must be an integer"))?;
            let w = disconnection_witness(&mut t, &f, &kk)?;
            let payload = WitnessPayload {
                group: spec,
                records: t.export(&f),
                f,
                k: kk.to_string(),
                gamma: g.format(&w.gamma),
                threshold: w.threshold.to_string(),
                level: w.level,
            };
            ctx.certify(&Certificate::new(Kind::Witness, &payload, true)?)
        }
    }
}

fn perm_input(op: Op, g: &GenArgs) -> Result<PermInput> {
    let part = match g.partition_aut.as_deref() {
        Some([k, m]) => Some((*k, *m)),
        Some(_) => bail!("--partition-aut takes k,m"),
        None => None,
    };
    let (gens, implied) = perm::generators(&g.gens, g.sym, part)?;
    let mut input = PermInput::new(op);
    input.gens = gens;
    input.n = g.n.unwrap_or(implied);
    input.subsets = g.subsets;
    Ok(input)
}

fn perm_cmd(ctx: &Ctx, cmd: PermCmd) -> Result<()> {
    let input = match cmd {
        PermCmd::Blocks { g, pair } => {
            let mut i = perm_input(Op::Blocks, &g)?;
            i.pair = match pair.as_deref() {
                Some([a, b]) => Some((*a, *b)),
                Some(_) => bail!("--pair takes a,b"),
                None => None,
            };
            i
        }
        PermCmd::Biindex { g, base } => {
            let mut i = perm_input(Op::Biindex, &g)?;
            i.base = base;
            i
        }
        PermCmd::Tr { sigma, x } => {
            let mut i = PermInput::new(Op::Tr);
            i.sigma = Some(sigma.parse()?);
            i.x = Some(x.parse::<EventualSet>()?);
            i
        }
        PermCmd::Schlichting { g, kind, value, depth } => {
            let mut i = perm_input(Op::Schlichting, &g)?;
            i.stabilizer = Some(kind);
            i.value = Some(value);
            i.depth = Some(depth);
            i
        }
    };
    let result = perm::run(&input)?;
    ctx.certify(&Certificate::new(Kind::FinpermResult, &cert::FinpermPayload { input, result }, true)?)
}

fn verify_file(ctx: &Ctx, file: &Path) -> Result<()> {
    let v = read_json(file)?;
    let report = cert::verify(&v)?;
    ctx.emit(&serde_json::to_value(&report)?)?;
    if !report.ok {
        return Err(Failed(format!("{} failed check(s)", report.failures.len())).into());
    }
    Ok(())
}

fn report_error(json_errors: bool, kind: &str, msg: &str) {
    if json_errors {
        eprintln!("{}", json!({ "error": kind, "message": msg }));
    } else {
        eprintln!("error: {msg}");
    }
}

fn main() -> ExitCode {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if json_errors {
                report_error(true, "usage", e.to_string().trim());
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<Failed>().is_some() => {
            report_error(json_errors, "verification", &e.to_string());
            ExitCode::from(1)
        }
        Err(e) => {
            report_error(json_errors, "usage", &format!("{e:#}"));
            ExitCode::from(2)
        }
    }
}
