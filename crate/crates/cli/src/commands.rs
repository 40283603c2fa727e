use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use comanip_core::acceptance::evaluate_all;
use comanip_core::checks::Battery;
use comanip_core::scenarios::{self, NAMES, SE3_NOMINAL};
use comanip_core::telemetry::write_csv;
use comanip_core::{run_to_failure, ScenarioConfig, SimRecord};
use serde::Serialize;

use crate::overrides;
use crate::{RunArgs, ScenarioArgs, SuiteArgs};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct RunManifest {
    pub name: String,
    pub seed: u64,
    pub version: String,
    pub wall_clock_s: f64,
    pub status: String,
    pub files: Vec<PathBuf>,
    pub config: ScenarioConfig,
}

#[derive(Serialize)]
struct SuiteEntry {
    name: String,
    status: String,
    csv: PathBuf,
}

#[derive(Serialize)]
struct SuiteManifest {
    version: String,
    seed: u64,
    wall_clock_s: f64,
    passed: bool,
    files: Vec<PathBuf>,
    runs: Vec<SuiteEntry>,
}

pub fn load(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_toml(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?
        }
        None => {
            let name = args.scenario.as_deref().unwrap_or(SE3_NOMINAL);
            scenarios::by_name(name, 0).ok_or_else(|| anyhow!("unknown scenario `{name}`"))?
        }
    };
    cfg = overrides::apply(cfg, &args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn status(rec: &SimRecord) -> String {
    match &rec.diverged {
        None => "completed".into(),
        Some(d) => format!("aborted in the step from t = {}: {}", d.time, d.error),
    }
}

fn write_record(rec: &SimRecord, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(rec, BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

fn write_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = toml::to_string(value).context("serializing manifest")?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: &RunArgs) -> Result<bool> {
    let cfg = load(&args.scenario)?;
    let sc = cfg.build()?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", cfg.name, cfg.seed)));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let start = Instant::now();
    let rec = run_to_failure(&sc)?;
    let wall = start.elapsed().as_secs_f64();

    let csv = out.join(format!("{}.csv", cfg.name));
    write_record(&rec, &csv)?;
    let manifest = RunManifest {
        name: cfg.name.clone(),
        seed: cfg.seed,
        version: VERSION.into(),
        wall_clock_s: wall,
        status: status(&rec),
        files: vec![csv.clone()],
        config: cfg,
    };
    write_toml(&manifest, &out.join("manifest.toml"))?;

    println!(
        "{} seed {}: {} samples in {wall:.2} s, final ‖s‖ {:.3e} -> {}",
        manifest.name,
        manifest.seed,
        rec.samples.len(),
        rec.s_norm.last().copied().unwrap_or(f64::NAN),
        csv.display()
    );
    if let Some(d) = &rec.diverged {
        return Err(anyhow!(
            "integrator aborted in the step from t = {}: {}",
            d.time,
            d.error
        ));
    }
    Ok(true)
}

pub fn paper_suite(args: &SuiteArgs) -> Result<bool> {
    let start = Instant::now();
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let configs: Vec<ScenarioConfig> = NAMES
        .iter()
        .map(|n| scenarios::by_name(n, args.seed).unwrap())
        .collect();
    let records: Vec<Result<SimRecord>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| s.spawn(move || -> Result<SimRecord> { Ok(run_to_failure(&cfg.build()?)?) }))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite worker panicked"))
            .collect()
    });

    let mut runs = Vec::new();
    let mut files = Vec::new();
    let mut lines = Vec::new();
    for (cfg, rec) in configs.iter().zip(records) {
        let rec = rec.with_context(|| format!("scenario {}", cfg.name))?;
        let csv = args.out.join(format!("{}.csv", cfg.name));
        write_record(&rec, &csv)?;
        let st = status(&rec);
        lines.push(format!(
            "run {:<17} final ‖s‖ {:.3e}  {st}",
            cfg.name,
            rec.s_norm.last().copied().unwrap_or(f64::NAN)
        ));
        files.push(csv.clone());
        runs.push(SuiteEntry {
            name: cfg.name.clone(),
            status: st,
            csv,
        });
    }

    let results = evaluate_all()?;
    let passed = results.iter().all(|r| r.passed);
    lines.extend(results.iter().map(|r| r.to_string()));
    lines.push(format!(
        "{}/{} criteria passed",
        results.iter().filter(|r| r.passed).count(),
        results.len()
    ));
    for l in &lines {
        println!("{l}");
    }
    let summary = args.out.join("summary.txt");
    fs::write(&summary, lines.join("\n") + "\n").with_context(|| format!("writing {}", summary.display()))?;
    files.push(summary);

    let manifest = SuiteManifest {
        version: VERSION.into(),
        seed: args.seed,
        wall_clock_s: start.elapsed().as_secs_f64(),
        passed,
        files,
        runs,
    };
    write_toml(&manifest, &args.out.join("manifest.toml"))?;
    Ok(passed)
}

pub fn check() -> Result<bool> {
    let start = Instant::now();
    let verdicts = Battery::default().run();
    for v in &verdicts {
        println!("{v}");
    }
    let failed = verdicts.iter().filter(|v| !v.passed).count();
    println!(
        "{} checks, {failed} failed, {:.2} s",
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(failed == 0)
}

pub fn print_config(args: &ScenarioArgs) -> Result<bool> {
    let cfg = load(args)?;
    cfg.validate()?;
    print!("{}", cfg.to_toml());
    Ok(true)
}
