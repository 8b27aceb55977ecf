use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pmat_core::data::{
    import_csv, load_dataset, read_snippet_file, synth_dataset, write_manifest, write_snippet_file, Dataset, Manifest,
    ManifestEntry, PressureSnippet, Session, SnippetMeta, SynthDatasetSpec,
};
use pmat_core::encoding::{encode, overlay, CHANNEL_NAMES};
use pmat_core::eval::{
    comparison_matrix, fit_model, render_csv, render_text, run_crossval, CvConfig, CvReport, TTestMode,
};
use pmat_core::features::{extract_features, FeatureVariant};
use pmat_core::models::ArchName;
use pmat_core::nn::CellActivation;
use pmat_core::par;
use pmat_core::selftest::{self, SelftestOptions};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "pmat", version, about = "Pressure-mat infant movement classification")]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import, synthesize or summarize datasets.
    Dataset {
        #[command(subcommand)]
        command: DatasetCommand,
    },
    /// Write the 500×6 motion signals of each snippet as CSV.
    Encode {
        #[command(flatten)]
        input: SnippetInput,
        /// Also write per-frame CoP grid coordinates for plotting.
        #[arg(long)]
        overlay: bool,
    },
    /// Write summary-statistic features, one row per snippet.
    Features {
        #[command(flatten)]
        input: SnippetInput,
        #[arg(long, default_value = "full24")]
        variant: FeatureVariant,
    },
    /// Train one architecture on a whole dataset and save the model.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Infant-grouped cross-validation of one or more architectures.
    Crossval {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render tables and the comparison matrix from saved reports.
    Report {
        /// Report JSON files; defaults to every report under OUT/reports.
        reports: Vec<PathBuf>,
        #[arg(long, value_enum)]
        ttest: Option<TTest>,
    },
    /// Run the embedded verification battery.
    Selftest {
        #[arg(long, hide = true)]
        perturb_gradients: bool,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Convert CSV recordings listed in an index to PMAT files plus a manifest.
    ///
    /// The index is a CSV with header `path,snippet_id,infant_id,session,label`;
    /// relative paths resolve against the index's directory.
    Import { index: PathBuf },
    /// Generate a synthetic two-regime cohort.
    Synth {
        /// JSON cohort spec; defaults to 20 infants with 5 snippets per class.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Print label, session and infant counts of a manifest.
    Stats { manifest: PathBuf },
}

#[derive(Args)]
struct SnippetInput {
    /// PMAT snippet files.
    files: Vec<PathBuf>,
    /// Process every snippet listed in a manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Architecture names; repeat or comma-separate. `all` selects the catalog.
    #[arg(long = "arch", value_delimiter = ',')]
    architectures: Vec<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long, value_enum)]
    lstm_activation: Option<Activation>,
    #[arg(long, value_enum)]
    ttest: Option<TTest>,
    #[arg(long = "format", value_enum, value_delimiter = ',')]
    formats: Vec<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Copy, ValueEnum)]
enum TTest {
    Paired,
    Welch,
}

impl From<TTest> for TTestMode {
    fn from(t: TTest) -> Self {
        match t {
            TTest::Paired => TTestMode::Paired,
            TTest::Welch => TTestMode::Welch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Text,
    Csv,
    Json,
}

/// Everything a training or cross-validation run depends on.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    manifest: Option<PathBuf>,
    architectures: Vec<String>,
    out: Option<PathBuf>,
    formats: Vec<Format>,
    ttest: TTestMode,
    jobs: Option<usize>,
    #[serde(flatten)]
    crossval: CvConfig,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn apply(&mut self, cli: &Cli, run: Option<&RunArgs>) {
        if let Some(seed) = cli.seed {
            self.crossval.seed = seed;
        }
        if cli.jobs.is_some() {
            self.jobs = cli.jobs;
        }
        if cli.out.is_some() {
            self.out = cli.out.clone();
        }
        let Some(run) = run else { return };
        if run.manifest.is_some() {
            self.manifest = run.manifest.clone();
        }
        if !run.architectures.is_empty() {
            self.architectures = run.architectures.clone();
        }
        if let Some(r) = run.repeats {
            self.crossval.repeats = r;
        }
        if let Some(f) = run.folds {
            self.crossval.folds = f;
        }
        if let Some(e) = run.max_epochs {
            self.crossval.train.max_epochs = e;
        }
        if let Some(a) = run.lstm_activation {
            self.crossval.lstm_activation = match a {
                Activation::Relu => CellActivation::Relu,
                Activation::Tanh => CellActivation::Tanh,
            };
        }
        if let Some(t) = run.ttest {
            self.ttest = t.into();
        }
        if !run.formats.is_empty() {
            self.formats = run.formats.clone();
        }
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn architectures(&self) -> Result<Vec<ArchName>> {
        if self.architectures.is_empty() {
            bail!("no architecture given (use --arch NAME or `all`)");
        }
        let mut names = Vec::new();
        for name in &self.architectures {
            if name.eq_ignore_ascii_case("all") {
                names.extend(ArchName::ALL);
            } else {
                names.push(name.parse::<ArchName>()?);
            }
        }
        names.sort();
        names.dedup();
        Ok(names)
    }

    fn dataset(&self) -> Result<Dataset> {
        let Some(path) = &self.manifest else {
            bail!("no dataset manifest given (use --manifest PATH)");
        };
        load_dataset(path).with_context(|| format!("loading {}", path.display()))
    }

    fn formats(&self) -> Vec<Format> {
        if self.formats.is_empty() {
            vec![Format::Text, Format::Csv, Format::Json]
        } else {
            self.formats.clone()
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_snippets(out: &Path, snippets: &[PressureSnippet]) -> Result<()> {
    let dir = out.join("snippets");
    create_dir(&dir)?;
    let mut entries = Vec::with_capacity(snippets.len());
    for s in snippets {
        let relative = PathBuf::from("snippets").join(format!("{}.pmat", s.id()));
        write_snippet_file(s, &out.join(&relative))?;
        entries.push(ManifestEntry::new(relative, &s.meta, s.label));
    }
    write_manifest(&out.join("manifest.json"), entries)?;
    Ok(())
}

fn dataset_import(out: &Path, index: &Path) -> Result<bool> {
    let base = index.parent().unwrap_or(Path::new(""));
    let mut reader = csv::Reader::from_path(index).with_context(|| format!("reading {}", index.display()))?;
    let mut snippets = Vec::new();
    let mut ok = true;
    for (row, entry) in reader.deserialize::<ManifestEntry>().enumerate() {
        let imported = entry
            .map_err(anyhow::Error::from)
            .and_then(|e| {
                let path = base.join(&e.path);
                import_csv(&path, e.meta()?, e.label()?).with_context(|| format!("importing {}", path.display()))
            })
            .with_context(|| format!("{} row {}", index.display(), row + 2));
        match imported {
            Ok(s) => snippets.push(s),
            Err(e) => {
                ok = false;
                eprintln!("error: {e:#}");
            }
        }
    }
    if !ok {
        return Ok(false);
    }
    let dataset = Dataset::new(snippets, None)?;
    write_snippets(out, &dataset.snippets)?;
    println!("{}", dataset.counts);
    Ok(true)
}

fn dataset_synth(out: &Path, spec_path: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthDatasetSpec::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let dataset = Dataset::new(synth_dataset(&spec)?, None)?;
    write_snippets(out, &dataset.snippets)?;
    println!("{}", dataset.counts);
    Ok(())
}

fn dataset_stats(manifest: &Path) -> Result<()> {
    let dataset = load_dataset(manifest).with_context(|| format!("loading {}", manifest.display()))?;
    let counts = &dataset.counts;
    println!("{counts}");
    for (session, n) in &counts.per_session {
        println!("session {session} {n}");
    }
    for (infant, n) in &counts.per_infant {
        println!("infant {infant} {n}");
    }
    Ok(())
}

fn load_snippets(input: &SnippetInput) -> Result<Vec<PressureSnippet>> {
    let mut snippets = Vec::new();
    if let Some(path) = &input.manifest {
        let manifest = Manifest::load(path).with_context(|| format!("loading {}", path.display()))?;
        for entry in &manifest.snippets {
            snippets.push(manifest.load_entry(entry)?);
        }
    }
    for path in &input.files {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let meta = SnippetMeta {
            snippet_id: id.clone(),
            infant_id: id,
            session: Session::T1,
        };
        snippets.push(read_snippet_file(path, meta).with_context(|| format!("reading {}", path.display()))?);
    }
    if snippets.is_empty() {
        bail!("no snippets given (pass PMAT files or --manifest)");
    }
    Ok(snippets)
}

fn csv_line(cells: impl IntoIterator<Item = String>) -> String {
    let mut line = cells.into_iter().collect::<Vec<_>>().join(",");
    line.push('\n');
    line
}

fn cmd_encode(out: &Path, input: &SnippetInput, with_overlay: bool) -> Result<()> {
    let snippets = load_snippets(input)?;
    let dir = out.join("signals");
    create_dir(&dir)?;
    if with_overlay {
        create_dir(&out.join("overlay"))?;
    }
    for s in &snippets {
        let signals = encode(s);
        let mut text = csv_line(CHANNEL_NAMES.iter().map(|n| n.to_string()));
        for row in signals.rows() {
            text.push_str(&csv_line(row.iter().map(f64::to_string)));
        }
        write(&dir.join(format!("{}.csv", s.id())), text)?;
        if with_overlay {
            let mut text = csv_line(["frame", "top_row", "top_col", "bottom_row", "bottom_col"].map(String::from));
            for p in overlay(s) {
                text.push_str(&csv_line([
                    p.frame.to_string(),
                    p.top_row.to_string(),
                    p.top_col.to_string(),
                    p.bottom_row.to_string(),
                    p.bottom_col.to_string(),
                ]));
            }
            write(&out.join("overlay").join(format!("{}.csv", s.id())), text)?;
        }
    }
    println!("encoded {} snippets into {}", snippets.len(), dir.display());
    Ok(())
}

fn cmd_features(out: &Path, input: &SnippetInput, variant: FeatureVariant) -> Result<()> {
    let snippets = load_snippets(input)?;
    create_dir(out)?;
    let mut text = csv_line(
        ["snippet_id".to_string(), "label".to_string()]
            .into_iter()
            .chain(variant.names()),
    );
    for s in &snippets {
        let f = extract_features(&encode(s), variant)?;
        text.push_str(&csv_line(
            [s.id().to_string(), s.label.to_string()]
                .into_iter()
                .chain(f.values.iter().map(f64::to_string)),
        ));
    }
    let path = out.join("features.csv");
    write(&path, text)?;
    println!("wrote {} feature rows to {}", snippets.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    architecture: ArchName,
    config: &'a CvConfig,
    fit_infants: &'a [String],
    validation_infants: &'a [String],
    fit: pmat_core::eval::ClassCounts,
    validation: pmat_core::eval::ClassCounts,
    selection: &'a pmat_core::models::SelectionLog,
}

fn cmd_train(config: &RunConfig) -> Result<()> {
    let dataset = config.dataset()?;
    let out = config.out_dir();
    create_dir(&out)?;
    for arch in config.architectures()? {
        let fitted = fit_model(&dataset, arch, &config.crossval).with_context(|| format!("training {arch}"))?;
        let model_path = out.join(format!("{arch}.model"));
        fitted.model.save(&model_path)?;
        let summary = TrainSummary {
            architecture: arch,
            config: &config.crossval,
            fit_infants: &fitted.fit_infants,
            validation_infants: &fitted.validation_infants,
            fit: fitted.fit,
            validation: fitted.validation,
            selection: &fitted.selection,
        };
        let mut json = serde_json::to_string_pretty(&summary)?;
        json.push('\n');
        write(&out.join(format!("{arch}.train.json")), json)?;
        let log = &fitted.selection;
        println!(
            "{arch}: chose {} -> {}",
            log.candidates[log.chosen].id,
            model_path.display()
        );
    }
    Ok(())
}

fn write_tables(
    out: &Path,
    reports: &[CvReport],
    formats: &[Format],
    mode: TTestMode,
    failed: &[String],
) -> Result<()> {
    if reports.is_empty() {
        return Ok(());
    }
    let partial = if failed.is_empty() {
        String::new()
    } else {
        format!("PARTIAL RESULTS: failed architectures: {}\n\n", failed.join(", "))
    };
    for format in formats {
        match format {
            Format::Text => write(
                &out.join("summary.txt"),
                format!("{partial}{}", render_text(reports, mode)?),
            )?,
            Format::Csv => write(&out.join("summary.csv"), render_csv(reports)?)?,
            Format::Json => {
                let mut json = serde_json::to_string_pretty(&comparison_matrix(reports, mode))?;
                json.push('\n');
                write(&out.join("comparison.json"), json)?;
            }
        }
    }
    Ok(())
}

fn cmd_crossval(config: &RunConfig) -> Result<bool> {
    let dataset = config.dataset()?;
    let architectures = config.architectures()?;
    let out = config.out_dir();
    let report_dir = out.join("reports");
    create_dir(&report_dir)?;
    let mut reports = Vec::new();
    let mut failed = Vec::new();
    for arch in architectures {
        match run_crossval(&dataset, arch, &config.crossval) {
            Ok(report) => {
                write(&report_dir.join(format!("{arch}.json")), report.to_json()?)?;
                println!(
                    "{arch}: BA {}",
                    pmat_core::eval::format_summary(&report.balanced_accuracy)
                );
                reports.push(report);
            }
            Err(e) => {
                eprintln!("error: {arch}: {e}");
                write(&report_dir.join(format!("{arch}.FAILED.txt")), format!("{e}\n"))?;
                failed.push(arch.to_string());
            }
        }
    }
    write_tables(&out, &reports, &config.formats(), config.ttest, &failed)?;
    Ok(failed.is_empty())
}

fn cmd_report(out: &Path, paths: &[PathBuf], mode: TTestMode, formats: &[Format]) -> Result<()> {
    let paths = if paths.is_empty() {
        let dir = out.join("reports");
        let mut found: Vec<PathBuf> = fs::read_dir(&dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        found.sort();
        found
    } else {
        paths.to_vec()
    };
    if paths.is_empty() {
        bail!("no reports found");
    }
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            CvReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(out)?;
    write_tables(out, &reports, formats, mode, &[])?;
    print!("{}", render_text(&reports, mode)?);
    Ok(())
}

fn cmd_selftest(perturb_gradients: bool) -> bool {
    let report = selftest::run(&SelftestOptions { perturb_gradients });
    for group in &report.groups {
        println!("{group}");
    }
    report.passed()
}

fn run(cli: &Cli) -> Result<bool> {
    let run_args = match &cli.command {
        Command::Train { run } | Command::Crossval { run } => Some(run),
        _ => None,
    };
    let mut config = RunConfig::load(cli.config.as_deref())?;
    config.apply(cli, run_args);
    let out = config.out_dir();
    let jobs = config.jobs.unwrap_or(0);
    par::with_jobs(jobs, || -> Result<bool> {
        match &cli.command {
            Command::Dataset { command } => match command {
                DatasetCommand::Import { index } => return dataset_import(&out, index),
                DatasetCommand::Synth { spec } => dataset_synth(&out, spec.as_deref(), cli.seed)?,
                DatasetCommand::Stats { manifest } => dataset_stats(manifest)?,
            },
            Command::Encode { input, overlay } => cmd_encode(&out, input, *overlay)?,
            Command::Features { input, variant } => cmd_features(&out, input, *variant)?,
            Command::Train { .. } => cmd_train(&config)?,
            Command::Crossval { .. } => return cmd_crossval(&config),
            Command::Report { reports, ttest } => {
                let mode = ttest.map_or(config.ttest, TTestMode::from);
                cmd_report(&out, reports, mode, &config.formats())?
            }
            Command::Selftest { perturb_gradients } => return Ok(cmd_selftest(*perturb_gradients)),
        }
        Ok(true)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
