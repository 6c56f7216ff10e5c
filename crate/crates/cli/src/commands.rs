// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};

use idani_core::eval::{
    attribute_sets, default_beta_grid, default_k_grid, rank_with, MethodSummary, SweepConfig,
    TokenDelta, DEFAULT_K,
};
use idani_core::intervention::PlanRecord;
use idani_core::{
    aggregate_seeds, classify, compute_mean, generate, intervene, load_set, make_plan, run_sweep,
    save_set, score, ClassifierHead, Format, IdaniError, MeanVector, NeuronRanking, ProbeHyper,
    RankMethod, RepresentationSet, Result, SweepReport, SynthSpec, TOOL_VERSION,
};
use serde::Serialize;

use crate::args::*;

/// Every JSON document carries the tool version and the invocation.
#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    tool_version: &'static str,
    config: &'a Command,
    #[serde(flatten)]
    body: T,
}

struct Ctx<'a> {
    command: &'a Command,
}

impl Ctx<'_> {
    fn render<T: Serialize>(&self, body: T) -> Result<String> {
        let doc = Output {
            tool_version: TOOL_VERSION,
            config: self.command,
            body,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Writes `dir/name`, or prints to stdout when `dir` is `None`.
    fn emit<T: Serialize>(&self, dir: Option<&Path>, name: &str, body: T) -> Result<Option<PathBuf>> {
        let text = self.render(body)?;
        match dir {
            Some(dir) => write_file(dir, name, text.as_bytes()).map(Some),
            None => {
                print!("{text}");
                Ok(None)
            }
        }
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| IdaniError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| IdaniError::io(&path, e))?;
    Ok(path)
}

fn load(path: &Path) -> Result<RepresentationSet> {
    load_set(path, Format::from_path(path))
}

fn single_method(choice: MethodChoice) -> Result<RankMethod> {
    match choice {
        MethodChoice::Probeless => Ok(RankMethod::Probeless),
        MethodChoice::Linear => Ok(RankMethod::Linear),
        MethodChoice::Both => Err(IdaniError::InvalidArgument(
            "this subcommand needs a single method (probeless or linear)".into(),
        )),
    }
}

fn check_beta(beta: f64, allow_out_of_range: bool) -> Result<()> {
    if !allow_out_of_range && !(1.0..=10.0).contains(&beta) {
        return Err(IdaniError::InvalidArgument(format!(
            "beta={beta} outside [1, 10]; pass --allow-out-of-range to allow it"
        )));
    }
    Ok(())
}

pub fn run(command: &Command) -> Result<()> {
    let ctx = Ctx { command };
    match command {
        Command::Mean(a) => mean(&ctx, a),
        Command::Rank(a) => rank(&ctx, a),
        Command::Intervene(a) => intervene_cmd(&ctx, a),
        Command::Sweep(a) => sweep(&ctx, a),
        Command::Aggregate(a) => aggregate(&ctx, a),
        Command::SelectThenApply(a) => select_then_apply(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::Attribute(a) => attribute(&ctx, a),
    }
}

fn mean(ctx: &Ctx, a: &MeanArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Means {
        means: Vec<MeanVector>,
    }
    let mut means = vec![compute_mean(&load(&a.source)?)];
    if let Some(t) = &a.target {
        means.push(compute_mean(&load(t)?));
    }
    ctx.emit(a.out.as_deref(), "mean.json", Means { means })?;
    Ok(())
}

fn rankings(
    methods: &[RankMethod],
    source: &RepresentationSet,
    target: &RepresentationSet,
    seed: u64,
) -> Result<Vec<NeuronRanking>> {
    let ms = compute_mean(source);
    let mt = compute_mean(target);
    methods
        .iter()
        .map(|&m| rank_with(m, source, target, &ms, &mt, ProbeHyper::default(), seed))
        .collect()
}

fn rank(ctx: &Ctx, a: &RankArgs) -> Result<()> {
    let source = load(&a.source)?;
    let target = load(&a.target)?;
    for r in rankings(&a.method.methods(), &source, &target, a.seed)? {
        ctx.emit(a.out.as_deref(), &format!("ranking_{}.json", r.method), &r)?;
    }
    Ok(())
}

fn intervene_cmd(ctx: &Ctx, a: &InterveneArgs) -> Result<()> {
    let method = single_method(a.method)?;
    check_beta(a.beta, a.allow_out_of_range)?;
    let source = load(&a.source)?;
    let target = load(&a.target)?;
    let ranking = rankings(&[method], &source, &target, a.seed)?.remove(0);
    let plan = make_plan(&ranking, a.k, a.beta, &compute_mean(&source), &compute_mean(&target))?;
    let out = intervene(&target, &plan)?;
    let format: Format = a.format.into();
    fs::create_dir_all(&a.out).map_err(|e| IdaniError::io(&a.out, e))?;
    save_set(&out, a.out.join(format!("counterfactual.{}", format.extension())), format)?;
    ctx.emit(Some(&a.out), "plan.json", plan.record())?;
    Ok(())
}

fn sweep_config(
    d: usize,
    method: MethodChoice,
    k_grid: &Option<Vec<usize>>,
    beta_grid: &Option<Vec<f64>>,
    seed: u64,
    allow_out_of_range: bool,
) -> SweepConfig {
    SweepConfig {
        methods: method.methods(),
        k_grid: k_grid.clone().unwrap_or_else(|| default_k_grid(d)),
        beta_grid: beta_grid.clone().unwrap_or_else(default_beta_grid),
        seed,
        probe: ProbeHyper::default(),
        allow_out_of_range,
    }
}

#[derive(Serialize)]
struct WithResolved<'a, T: Serialize> {
    resolved: &'a SweepConfig,
    #[serde(flatten)]
    inner: T,
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let source = load(&a.source)?;
    let target = load(&a.target)?;
    let head = ClassifierHead::load(&a.head)?;
    let per_seed = a.seeds.is_some();
    let seeds = a.seeds.clone().unwrap_or_else(|| vec![a.seed.unwrap_or(0)]);
    if seeds.is_empty() {
        return Err(IdaniError::InvalidArgument("--seeds is empty".into()));
    }
    for seed in seeds {
        let cfg = sweep_config(source.d(), a.method, &a.k_grid, &a.beta_grid, seed, a.allow_out_of_range);
        let report = run_sweep(&source, &target, &head, &cfg)?;
        let stem = if per_seed { format!("sweep_seed{seed}") } else { "sweep".to_string() };
        ctx.emit(
            Some(&a.out),
            &format!("{stem}.json"),
            WithResolved { resolved: &cfg, inner: &report },
        )?;
        write_file(&a.out, &format!("{stem}.csv"), report.to_csv().as_bytes())?;
    }
    Ok(())
}

fn aggregate(ctx: &Ctx, a: &AggregateArgs) -> Result<()> {
    let reports = a
        .reports
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| IdaniError::io(p, e))?;
            Ok(serde_json::from_str::<SweepReport>(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    ctx.emit(a.out.as_deref(), "aggregate.json", aggregate_seeds(&reports)?)?;
    Ok(())
}

fn select_then_apply(ctx: &Ctx, a: &SelectArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Selection<'a> {
        resolved: &'a SweepConfig,
        dev_init_score: f64,
        dev_methods: &'a [MethodSummary],
        selected: &'a MethodSummary,
        test: TestResult,
    }
    #[derive(Serialize)]
    struct TestResult {
        n: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        init_score: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        score: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        delta: Option<f64>,
        plan: PlanRecord,
    }

    // Selection: only the source, the labeled dev set and the head.
    let source = load(&a.source)?;
    let dev = load(&a.dev)?;
    let head = ClassifierHead::load(&a.head)?;
    let cfg = sweep_config(source.d(), a.method, &a.k_grid, &a.beta_grid, a.seed, a.allow_out_of_range);
    let dev_report = run_sweep(&source, &dev, &head, &cfg)?;
    let selected = dev_report.best().expect("at least one method").clone();

    // Application: the test set is read only now.
    let test = load(&a.test)?;
    let ranking = rankings(&[selected.method], &source, &test, a.seed)?.remove(0);
    let plan = make_plan(
        &ranking,
        selected.oracle_k,
        selected.oracle_beta,
        &compute_mean(&source),
        &compute_mean(&test),
    )?;
    let adapted = intervene(&test, &plan)?;
    let scored = |set: &RepresentationSet| -> Result<Option<f64>> {
        match set.labels() {
            Some(gold) if gold.iter().any(|&g| g >= 0) => Ok(Some(
                score(&classify(&head, set)?, gold, head.metric(), head.n_classes())?.value,
            )),
            _ => Ok(None),
        }
    };
    let init_score = scored(&test)?;
    let after = scored(&adapted)?;

    let format: Format = a.format.into();
    fs::create_dir_all(&a.out).map_err(|e| IdaniError::io(&a.out, e))?;
    save_set(&adapted, a.out.join(format!("adapted_test.{}", format.extension())), format)?;
    ctx.emit(
        Some(&a.out),
        "selection.json",
        Selection {
            resolved: &cfg,
            dev_init_score: dev_report.init_score,
            dev_methods: &dev_report.methods,
            selected: &selected,
            test: TestResult {
                n: test.n(),
                init_score,
                score: after,
                delta: init_score.zip(after).map(|(b, a)| a - b),
                plan: plan.record(),
            },
        },
    )?;
    Ok(())
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        d: a.d,
        n_per_domain: a.n,
        m_domain: a.m,
        domain_shift: a.shift,
        task_neurons: a.task_neurons,
        task_separation: a.tau,
        noise_sigma: a.sigma,
        n_classes: a.classes,
        head_leakage: a.head_leakage,
        tokens: a.tokens,
        seed: a.seed,
    };
    let out = generate(&spec)?;
    out.write_to(&a.out, a.format.into())?;
    #[derive(Serialize)]
    struct Summary {
        source_score: f64,
        target_score: f64,
    }
    ctx.emit(
        Some(&a.out),
        "synth.json",
        Summary {
            source_score: out.source_score()?,
            target_score: out.target_score()?,
        },
    )?;
    Ok(())
}

fn attribute(ctx: &Ctx, a: &AttributeArgs) -> Result<()> {
    #[derive(Serialize)]
    struct Attribution {
        method: RankMethod,
        k: usize,
        beta: f64,
        tokens: Vec<TokenDelta>,
    }
    let method = single_method(a.method)?;
    check_beta(a.beta, a.allow_out_of_range)?;
    let source = load(&a.source)?;
    let target = load(&a.target)?;
    let head = ClassifierHead::load(&a.head)?;
    let k = a.k.unwrap_or(DEFAULT_K.min(target.d()));
    let ranking = rankings(&[method], &source, &target, a.seed)?.remove(0);
    let plan = make_plan(&ranking, k, a.beta, &compute_mean(&source), &compute_mean(&target))?;
    let counterfactual = intervene(&target, &plan)?;
    let tokens = attribute_sets(&head, &target, &counterfactual, a.top)?;
    ctx.emit(
        a.out.as_deref(),
        "attribution.json",
        Attribution {
            method,
            k,
            beta: a.beta,
            tokens,
        },
    )?;
    Ok(())
}
