//! Command-line front end: `eval`, `folds`, `phantom`, `stats`, `report`.
//!
//! Every option can also come from a TOML config file (one table per
//! subcommand, same names as the long flags); explicit flags win. Exit
//! codes: 0 success, 1 usage error, 2 data or filesystem error, 3 internal
//! error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use voxmetric::error::{HarnessError, Result};
use voxmetric::evaluate::{run_evaluation, EvalOptions};
use voxmetric::folds::make_folds;
use voxmetric::manifest::{load_manifest, CohortManifest, ModelEntry, PatientEntry};
use voxmetric::report::{load_report, render, ReportFormat};
use voxmetric::EvaluationReport;
use voxmetric_core::stats::{self, Summary};
use voxmetric_core::{generate_phantom, mask_to_volume, perturb_mask, save_nifti, PhantomSpec};

#[derive(Parser)]
#[command(
    name = "voxmetric",
    version,
    about = "Volumetric segmentation scoring: overlap and surface-distance \
             metrics over cohorts of masks"
)]
struct Cli {
    /// TOML file with default option values, one table per subcommand.
    /// Relative paths inside it resolve against its own directory.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every model against every patient and emit a report.
    Eval(EvalArgs),
    /// Assign cross-validation folds to the patients of a manifest.
    Folds(FoldsArgs),
    /// Generate synthetic cohorts with ground truth and simulated
    /// predictions.
    Phantom(PhantomArgs),
    /// Summarize one metric from a saved JSON report.
    Stats(StatsArgs),
    /// Re-render a saved JSON report in another format.
    Report(ReportArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Cohort manifest (TOML).
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Also score overlap with bone voxels removed, where bone masks exist.
    #[arg(long)]
    bones: bool,
    /// Worker threads across patients.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct FoldsArgs {
    /// Cohort manifest (TOML).
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
    /// Number of folds.
    #[arg(short, value_name = "N")]
    k: Option<usize>,
    /// Sort patients by acquisition date before dealing them into folds.
    #[arg(long)]
    by_date: bool,
    /// Write the assignment here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PhantomArgs {
    /// Phantom description (TOML); a built-in small case when omitted.
    #[arg(long, value_name = "PATH")]
    spec: Option<PathBuf>,
    /// Base random seed; case i uses seed + i.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Number of cases to generate.
    #[arg(long, value_name = "N")]
    count: Option<usize>,
    /// Directory for the volumes and the generated manifest.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Boundary noise of the simulated models, millimetres; one model per
    /// level.
    #[arg(long, value_name = "MM", value_delimiter = ',')]
    noise_levels: Option<Vec<f64>>,
    /// Fraction of connected regions each simulated model drops.
    #[arg(long, value_name = "RATIO")]
    drop: Option<f64>,
}

#[derive(Args)]
struct StatsArgs {
    /// Saved JSON report.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Metric to summarize: dsc, hd_mm, hd95_mm, or dsc_bones_excluded.
    #[arg(long, value_name = "NAME")]
    metric: Option<String>,
    /// Two model ids; adds a paired t-test over patients both models scored.
    #[arg(long, num_args = 2, value_names = ["MODEL_A", "MODEL_B"])]
    paired: Option<Vec<String>>,
}

#[derive(Args)]
struct ReportArgs {
    /// Saved JSON report.
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Write here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

/// Config-file mirror of the CLI options. Paths resolve against the config
/// file's directory.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    eval: EvalConfig,
    #[serde(default)]
    folds: FoldsConfig,
    #[serde(default)]
    phantom: PhantomConfig,
    #[serde(default)]
    stats: StatsConfig,
    #[serde(default)]
    report: ReportConfig,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalConfig {
    manifest: Option<PathBuf>,
    bones: Option<bool>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    format: Option<FormatArg>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoldsConfig {
    manifest: Option<PathBuf>,
    k: Option<usize>,
    by_date: Option<bool>,
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhantomConfig {
    spec: Option<PathBuf>,
    seed: Option<u64>,
    count: Option<usize>,
    out_dir: Option<PathBuf>,
    noise_levels: Option<Vec<f64>>,
    drop: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StatsConfig {
    report: Option<PathBuf>,
    metric: Option<String>,
    paired: Option<Vec<String>>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportConfig {
    input: Option<PathBuf>,
    format: Option<FormatArg>,
    out: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| {
        HarnessError::Usage(format!("could not read config {}: {e}", path.display()))
    })?;
    let mut config: ConfigFile = toml::from_str(&text).map_err(|e| {
        HarnessError::Usage(format!("config {}: {e}", path.display()))
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let rebase = |p: &mut Option<PathBuf>| {
        if let Some(inner) = p {
            *inner = base.join(&*inner);
        }
    };
    rebase(&mut config.eval.manifest);
    rebase(&mut config.eval.out);
    rebase(&mut config.folds.manifest);
    rebase(&mut config.folds.out);
    rebase(&mut config.phantom.spec);
    rebase(&mut config.phantom.out_dir);
    rebase(&mut config.stats.report);
    rebase(&mut config.report.input);
    rebase(&mut config.report.out);
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Requested help/version goes to stdout and succeeds; anything
            // else is a usage error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Eval(args) => run_eval(args, config.eval),
        Command::Folds(args) => run_folds(args, config.folds),
        Command::Phantom(args) => run_phantom(args, config.phantom),
        Command::Stats(args) => run_stats(args, config.stats),
        Command::Report(args) => run_report(args, config.report),
    }
}

fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| {
        HarnessError::Usage(format!("{what} is required (flag or config file)"))
    })
}

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, text).map_err(|e| HarnessError::Write {
            path: path.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_eval(args: EvalArgs, config: EvalConfig) -> Result<()> {
    let manifest_path = require(args.manifest.or(config.manifest), "--manifest")?;
    let manifest = load_manifest(&manifest_path)?;
    let options = EvalOptions {
        with_bone_subtraction: args.bones || config.bones.unwrap_or(false),
        parallelism: args.jobs.or(config.jobs).unwrap_or(1),
    };
    let report = run_evaluation(&manifest, &options)?;
    let format = args.format.or(config.format).unwrap_or(FormatArg::Json);
    let out = args.out.or(config.out);
    emit(&render(&report, format.into())?, out.as_deref())
}

fn run_folds(args: FoldsArgs, config: FoldsConfig) -> Result<()> {
    let manifest_path = require(args.manifest.or(config.manifest), "--manifest")?;
    let manifest = load_manifest(&manifest_path)?;
    let k = args.k.or(config.k).unwrap_or(5);
    let by_date = args.by_date || config.by_date.unwrap_or(false);

    let ids: Vec<String> = manifest
        .patients
        .iter()
        .map(|p| p.patient_id.clone())
        .collect();
    let dates: Option<Vec<String>> = if by_date {
        Some(
            manifest
                .patients
                .iter()
                .map(|p| {
                    p.acquisition_date.clone().ok_or_else(|| {
                        HarnessError::Manifest(format!(
                            "patient {} has no acquisition_date, required by --by-date",
                            p.patient_id
                        ))
                    })
                })
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let folds = make_folds(&ids, k, dates.as_deref())?;

    let mut text = String::from("patient_id,fold\n");
    for (id, fold) in ids.iter().zip(&folds) {
        text.push_str(&format!("{id},{fold}\n"));
    }
    emit(&text, args.out.or(config.out).as_deref())
}

fn run_phantom(args: PhantomArgs, config: PhantomConfig) -> Result<()> {
    let out_dir = require(args.out_dir.or(config.out_dir), "--out-dir")?;
    let count = args.count.or(config.count).unwrap_or(1);
    let base_seed = args.seed.or(config.seed).unwrap_or(0);
    let noise_levels = args
        .noise_levels
        .or(config.noise_levels)
        .unwrap_or_else(|| vec![0.0, 1.0, 3.0]);
    let drop = args.drop.or(config.drop).unwrap_or(0.0);

    if count == 0 {
        return Err(HarnessError::Usage("--count must be at least 1".into()));
    }
    if noise_levels.is_empty() {
        return Err(HarnessError::Usage(
            "--noise-levels needs at least one level".into(),
        ));
    }
    if noise_levels.iter().any(|n| !n.is_finite() || *n < 0.0) {
        return Err(HarnessError::Usage(
            "noise levels must be finite and non-negative".into(),
        ));
    }
    if !(0.0..1.0).contains(&drop) {
        return Err(HarnessError::Usage("--drop must lie in [0, 1)".into()));
    }

    let base_spec = match args.spec.or(config.spec) {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Read {
                path: path.clone(),
                source: e,
            })?;
            toml::from_str::<PhantomSpec>(&text).map_err(|e| {
                HarnessError::Manifest(format!("phantom spec {}: {e}", path.display()))
            })?
        }
        None => PhantomSpec::desk_scale(base_seed),
    };

    std::fs::create_dir_all(&out_dir).map_err(|e| HarnessError::Write {
        path: out_dir.clone(),
        source: e,
    })?;

    let model_ids: Vec<String> = noise_levels
        .iter()
        .enumerate()
        .map(|(j, level)| format!("m{j}_noise{level}mm"))
        .collect();
    let mut patients = Vec::with_capacity(count);
    let mut predictions = vec![std::collections::BTreeMap::new(); noise_levels.len()];

    for i in 0..count {
        let mut spec = base_spec.clone();
        spec.seed = base_seed.wrapping_add(i as u64);
        let case = generate_phantom(&spec)?;
        let pid = format!("p{i:03}");

        let save = |name: String, volume: &voxmetric_core::Volume| -> Result<PathBuf> {
            let path = out_dir.join(&name);
            save_nifti(volume, &path)?;
            Ok(PathBuf::from(name))
        };
        let ct = save(format!("{pid}_ct.nii"), &case.ct)?;
        let gt = save(format!("{pid}_gt.nii"), &mask_to_volume(&case.ptv))?;
        let bones = save(format!("{pid}_bones.nii"), &mask_to_volume(&case.bones))?;

        for (j, &level) in noise_levels.iter().enumerate() {
            let pred_seed = spec.seed.wrapping_mul(1009).wrapping_add(j as u64);
            let pred = perturb_mask(&case.ptv, level, drop, pred_seed);
            let path = save(
                format!("{pid}_pred_{}.nii", model_ids[j]),
                &mask_to_volume(&pred),
            )?;
            predictions[j].insert(pid.clone(), path);
        }

        patients.push(PatientEntry {
            patient_id: pid,
            gt_mask_path: gt,
            ct_path: Some(ct),
            bone_mask_path: Some(bones),
            acquisition_date: Some(synthetic_date(i)),
            fold: 0,
        });
    }

    let manifest = CohortManifest {
        mask_threshold: 0.5,
        patients,
        models: model_ids
            .into_iter()
            .zip(predictions)
            .map(|(model_id, predictions)| ModelEntry {
                model_id,
                predictions,
            })
            .collect(),
    };
    let manifest_path = out_dir.join("manifest.toml");
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| HarnessError::Internal(format!("could not encode manifest: {e}")))?;
    std::fs::write(&manifest_path, text).map_err(|e| HarnessError::Write {
        path: manifest_path.clone(),
        source: e,
    })?;
    println!(
        "wrote {count} case(s) and {} to {}",
        manifest_path.file_name().unwrap().to_string_lossy(),
        out_dir.display()
    );
    Ok(())
}

/// Monotone synthetic acquisition dates, one day apart within a month.
fn synthetic_date(i: usize) -> String {
    let year = 2024 + i / 336;
    let rest = i % 336;
    format!("{year}-{:02}-{:02}", 1 + rest / 28, 1 + rest % 28)
}

fn run_stats(args: StatsArgs, config: StatsConfig) -> Result<()> {
    let report_path = require(args.report.or(config.report), "--report")?;
    let metric = args.metric.or(config.metric).unwrap_or_else(|| "dsc".into());
    let paired = args.paired.or(config.paired);

    let pick = metric_picker(&metric)?;
    let report = load_report(&report_path)?;

    let mut text = format!("metric: {metric}\n");
    for summary in &report.summaries {
        match pick.from_summary(summary) {
            Some(s) => text.push_str(&format!(
                "{}: n={} min={} q1={} median={} q3={} max={}\n",
                summary.model_id, s.n, s.min, s.q1, s.median, s.q3, s.max
            )),
            None => text.push_str(&format!("{}: no defined values\n", summary.model_id)),
        }
    }
    match report.tests.iter().find(|t| t.metric == metric) {
        Some(test) => {
            if let Some(kw) = &test.kruskal_wallis {
                text.push_str(&format!(
                    "kruskal-wallis: H={} df={} p={}\n",
                    kw.statistic, kw.df, kw.p_value
                ));
            }
            for pair in &test.pairwise {
                text.push_str(&format!(
                    "{} vs {}: z={} p={} p_adjusted={}\n",
                    pair.model_a, pair.model_b, pair.z, pair.p_raw, pair.p_adjusted
                ));
            }
            if let Some(note) = &test.note {
                text.push_str(&format!("note: {note}\n"));
            }
        }
        None => text.push_str("note: metric was not tested in this report\n"),
    }

    if let Some(pair) = paired {
        let [a, b] = [&pair[0], &pair[1]];
        let (va, vb) = paired_values(&report, &metric, pick, a, b)?;
        let t = stats::paired_t(&va, &vb)?;
        text.push_str(&format!(
            "paired t {a} vs {b}: n={} t={} df={} p={}\n",
            va.len(),
            t.statistic,
            t.df,
            t.p_value
        ));
    }
    print!("{text}");
    Ok(())
}

#[derive(Clone, Copy)]
struct MetricPicker {
    from_summary: fn(&voxmetric::ModelSummary) -> Option<&Summary>,
    from_record: fn(&voxmetric_core::MetricRecord) -> Option<f64>,
}

impl MetricPicker {
    fn from_summary<'a>(&self, s: &'a voxmetric::ModelSummary) -> Option<&'a Summary> {
        (self.from_summary)(s)
    }
}

fn metric_picker(metric: &str) -> Result<MetricPicker> {
    let picker = match metric {
        "dsc" => MetricPicker {
            from_summary: |s| s.dsc.as_ref(),
            from_record: |r| Some(r.dsc),
        },
        "hd_mm" => MetricPicker {
            from_summary: |s| s.hd_mm.as_ref(),
            from_record: |r| r.hd_mm,
        },
        "hd95_mm" => MetricPicker {
            from_summary: |s| s.hd95_mm.as_ref(),
            from_record: |r| r.hd95_mm,
        },
        "dsc_bones_excluded" => MetricPicker {
            from_summary: |s| s.dsc_bones_excluded.as_ref(),
            from_record: |r| r.dsc_bones_excluded,
        },
        other => {
            return Err(HarnessError::Usage(format!(
                "unknown metric {other:?}; expected dsc, hd_mm, hd95_mm, or \
                 dsc_bones_excluded"
            )))
        }
    };
    Ok(picker)
}

/// Values of `metric` for two models over the patients both models scored,
/// in record order.
fn paired_values(
    report: &EvaluationReport,
    metric: &str,
    pick: MetricPicker,
    model_a: &str,
    model_b: &str,
) -> Result<(Vec<f64>, Vec<f64>)> {
    for model in [model_a, model_b] {
        if !report.records.iter().any(|r| r.model_id == model) {
            return Err(HarnessError::Report(format!(
                "model {model:?} has no records in this report"
            )));
        }
    }
    let values_of = |model: &str| -> std::collections::BTreeMap<&str, f64> {
        report
            .records
            .iter()
            .filter(|r| r.model_id == model)
            .filter_map(|r| (pick.from_record)(r).map(|v| (r.patient_id.as_str(), v)))
            .collect()
    };
    let of_a = values_of(model_a);
    let of_b = values_of(model_b);
    let mut va = Vec::new();
    let mut vb = Vec::new();
    for record in &report.records {
        if record.model_id != model_a {
            continue;
        }
        let patient = record.patient_id.as_str();
        if let (Some(&a), Some(&b)) = (of_a.get(patient), of_b.get(patient)) {
            va.push(a);
            vb.push(b);
        }
    }
    if va.is_empty() {
        return Err(HarnessError::Report(format!(
            "no patient has {metric} defined for both {model_a:?} and {model_b:?}"
        )));
    }
    Ok((va, vb))
}

fn run_report(args: ReportArgs, config: ReportConfig) -> Result<()> {
    let input = require(args.input.or(config.input), "--input")?;
    let format = args.format.or(config.format).unwrap_or(FormatArg::Csv);
    let report = load_report(&input)?;
    emit(&render(&report, format.into())?, args.out.or(config.out).as_deref())
}
