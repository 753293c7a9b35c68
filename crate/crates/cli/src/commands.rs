use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use iin_core::eval::{compare_initial_series, score, score_series, sweep_missing_rates, write_rows, EvalReport, DEFAULT_RATES};
use iin_core::imputer::{run_cascade_from, TrainConfig};
use iin_core::ingest::{
    holdout_month_copy, load_coordinates, load_csv, load_truth, save_csv, save_truth, simulate_missing, write_matrix,
    CsvSchema, Mechanism, MissingSpec,
};
use iin_core::init::{initialize_with_coordinates, InitializerKind};
use iin_core::nn::Checkpoint;
use iin_core::numfmt::{format_f64, to_json_string};
use iin_core::synth::{generate, SynthSpec};
use iin_core::{classify_blocks, Error, Result, SensorDataset};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::{Cli, Command, CompareArgs, DataArgs, EvalArgs, GenArgs, RunArgs, SimulateArgs, SweepArgs, TrainArgs};
use crate::manifest::Manifest;

type Coordinates = Vec<Option<(f64, f64)>>;

struct Session<'a> {
    cli: &'a Cli,
    manifest: &'a mut Manifest,
}

impl Session<'_> {
    fn artifact(&mut self, name: &str) -> PathBuf {
        let path = self.cli.out.join(name);
        self.manifest.artifacts.push(path.clone());
        path
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.artifact(name);
        fs::write(path, to_json_string(value)? + "\n")?;
        Ok(())
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.artifact(name))?))
    }

    fn reject_config(&self) -> Result<()> {
        match &self.cli.config {
            Some(p) => Err(Error::Config(format!(
                "`{}` takes no config file (got {})",
                self.manifest.command,
                p.display()
            ))),
            None => Ok(()),
        }
    }

    fn load_config<T: DeserializeOwned + Default>(&mut self) -> Result<T> {
        let Some(path) = &self.cli.config else {
            return Ok(T::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.manifest.input(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    fn train_config(&mut self, args: &TrainArgs) -> Result<TrainConfig> {
        let mut c: TrainConfig = self.load_config()?;
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    c.$field = v;
                }
            };
        }
        set!(w, args.w);
        set!(hidden, args.hidden);
        set!(dropout, args.dropout);
        set!(iter_num, args.iters);
        set!(batch_size, args.batch_size);
        set!(max_epochs, args.max_epochs);
        set!(patience, args.patience);
        set!(validation_fraction, args.validation_fraction);
        set!(seed, self.cli.seed);
        if let Some(lr) = args.lr {
            c.optimizer.lr = lr;
        }
        if let Some(s) = &args.cell {
            c.cell_kind = s.parse()?;
        }
        if let Some(s) = &args.mode {
            c.mode = s.parse()?;
        }
        if let Some(s) = &args.normalization {
            c.normalization = s.parse()?;
        }
        c.include_center_input |= args.include_center;
        if args.cold_start {
            c.warm_start = false;
        }
        c.deterministic |= self.cli.deterministic;
        c.validate()?;
        self.manifest.config = serde_json::to_value(&c)?;
        self.manifest.seed = Some(c.seed);
        self.manifest.deterministic = c.deterministic;
        if c.deterministic {
            single_thread();
        }
        Ok(c)
    }

    fn load_data(&mut self, input: &Path, truth: Option<&Path>) -> Result<SensorDataset> {
        self.manifest.input(input)?;
        let mut ds = load_csv(input, &CsvSchema::default())?;
        if let Some(truth) = truth {
            self.manifest.input(truth)?;
            load_truth(&mut ds, truth)?;
        }
        log::info!(
            "{}: {} sensors x {} timestamps, {} held out",
            input.display(),
            ds.num_sensors(),
            ds.num_timestamps(),
            ds.ground_truth().len()
        );
        Ok(ds)
    }

    fn coordinates(&mut self, data: &DataArgs, ds: &SensorDataset) -> Result<Option<Coordinates>> {
        data.coords
            .as_deref()
            .map(|p| {
                self.manifest.input(p)?;
                load_coordinates(ds, p)
            })
            .transpose()
    }
}

fn single_thread() {
    // fails only when the global pool already exists, which is harmless here
    let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
}

pub fn name(command: &Command) -> &'static str {
    match command {
        Command::Gen(_) => "gen",
        Command::Simulate(_) => "simulate",
        Command::Run(_) => "run",
        Command::Sweep(_) => "sweep",
        Command::CompareInit(_) => "compare-init",
        Command::Eval(_) => "eval",
    }
}

pub fn dispatch(cli: &Cli, manifest: &mut Manifest) -> Result<()> {
    if cli.deterministic {
        single_thread();
    }
    let mut s = Session { cli, manifest };
    match &cli.command {
        Command::Gen(a) => gen(&mut s, a),
        Command::Simulate(a) => simulate(&mut s, a),
        Command::Run(a) => run(&mut s, a),
        Command::Sweep(a) => sweep(&mut s, a),
        Command::CompareInit(a) => compare(&mut s, a),
        Command::Eval(a) => eval(&mut s, a),
    }
}

fn gen(s: &mut Session, a: &GenArgs) -> Result<()> {
    let mut spec: SynthSpec = s.load_config()?;
    if let Some(v) = a.sensors {
        spec.sensors = v;
    }
    if let Some(v) = a.steps {
        spec.steps = v;
    }
    if let Some(v) = a.level {
        spec.level = v;
    }
    if let Some(v) = a.noise {
        spec.noise_std = v;
    }
    if let Some(v) = a.phase_jitter {
        spec.phase_jitter = v;
    }
    if let Some(v) = a.amplitude_jitter {
        spec.amplitude_jitter = v;
    }
    if let Some(v) = a.start_hour {
        spec.start_hour = v;
    }
    if let Some(v) = s.cli.seed {
        spec.seed = v;
    }
    s.manifest.config = serde_json::to_value(&spec)?;
    s.manifest.seed = Some(spec.seed);
    let ds = generate(&spec)?;
    save_csv(&ds, s.artifact(&a.file), Some(&spec.describe()))
}

/// `YYYY-MM`.
fn parse_month(flag: &str, value: Option<&str>) -> Result<(i32, u32)> {
    let value = value.ok_or_else(|| Error::Config(format!("position-copy needs --{flag} YYYY-MM")))?;
    let bad = || Error::Config(format!("--{flag} must look like YYYY-MM, got `{value}`"));
    let (y, m) = value.split_once('-').ok_or_else(bad)?;
    let month: u32 = m.parse().map_err(|_| bad())?;
    if !(1..=12).contains(&month) {
        return Err(bad());
    }
    Ok((y.parse().map_err(|_| bad())?, month))
}

fn simulate(s: &mut Session, a: &SimulateArgs) -> Result<()> {
    s.reject_config()?;
    let seed = s.cli.seed.unwrap_or(0);
    let mechanism = match a.mechanism.as_str() {
        "random" | "random-rate" => Mechanism::RandomRate,
        "fraction20" | "random-fraction20" => Mechanism::RandomFraction20,
        "block" | "block-injection" => Mechanism::BlockInjection,
        "position-copy" => Mechanism::PositionCopy {
            source: parse_month("source", a.source.as_deref())?,
            target: parse_month("target", a.target.as_deref())?,
        },
        other => return Err(Error::Config(format!("unknown mechanism `{other}`"))),
    };
    let spec = MissingSpec {
        mechanism,
        rate: a.rate,
        block_length: (a.block_min, a.block_max),
        seed,
    };
    spec.validate()?;
    s.manifest.config = serde_json::to_value(&spec)?;
    s.manifest.seed = Some(seed);
    let ds = s.load_data(&a.input, None)?;
    let held = match spec.mechanism {
        Mechanism::PositionCopy { source, target } => holdout_month_copy(&ds, source, target)?,
        _ => simulate_missing(&ds, &spec)?,
    };
    log::info!("held out {} cells", held.ground_truth().len());
    save_csv(&held, s.artifact("dataset.csv"), None)?;
    save_truth(&held, s.artifact("truth.csv"))
}

#[derive(Serialize)]
struct Unscored<'a> {
    initializer: &'a str,
    config: &'a TrainConfig,
    validation_mae: Vec<f64>,
}

fn run(s: &mut Session, a: &RunArgs) -> Result<()> {
    let config = s.train_config(&a.train)?;
    let kind: InitializerKind = a.init.parse()?;
    let ds = s.load_data(&a.data.input, a.data.truth.as_deref())?;
    let coords = s.coordinates(&a.data, &ds)?;
    let t0 = initialize_with_coordinates(&ds, &kind, coords.as_deref())?;
    let run = run_cascade_from(&ds, &config, t0, kind.label())?;

    for (i, series) in run.series.iter().enumerate() {
        let mut out = s.create(&format!("T_{i}.csv"))?;
        write_matrix(&ds, series, &mut out, None)?;
        out.flush()?;
    }
    let hyper = serde_json::to_value(&config)?;
    for (i, model) in run.models.iter().enumerate() {
        let name = if run.models.len() == 1 {
            "checkpoint.json".to_string()
        } else {
            format!("checkpoint_{i}.json")
        };
        let path = s.artifact(&name);
        Checkpoint::from_model(model, hyper.clone()).save(&path)?;
        s.manifest.checkpoints.push(path);
    }
    s.manifest.validation_mae = run.validation_mae();

    if ds.ground_truth().is_empty() {
        log::warn!("no held-out cells; the report carries validation error only");
        return s.write_json(
            "report.json",
            &Unscored {
                initializer: &run.initializer,
                config: &config,
                validation_mae: run.validation_mae(),
            },
        );
    }
    let report = score(&run, &ds, &classify_blocks(&ds, a.data.block_len))?;
    log_report(&report);
    s.write_json("report.json", &report)?;
    let mut out = s.create("report.csv")?;
    write_rows(&report.rows(), &mut out)?;
    out.flush()?;
    Ok(())
}

fn log_report(r: &EvalReport) {
    let show = |v: Option<f64>| v.map(format_f64).unwrap_or_else(|| "-".into());
    if let Some(t0) = r.trajectory.first() {
        log::info!("T_0 overall MAE {}", show(t0.scores.overall.mae));
    }
    log::info!(
        "final overall MAE {} MRE {}, general MAE {} ({} entries)",
        show(r.overall.mae),
        show(r.overall.mre),
        show(r.general.mae),
        r.general.entries
    );
}

fn parse_rates(text: Option<&str>) -> Result<Vec<f64>> {
    let Some(text) = text else {
        return Ok(DEFAULT_RATES.to_vec());
    };
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            tok.parse::<f64>()
                .ok()
                .filter(|r| r.is_finite())
                .ok_or_else(|| Error::Config(format!("bad rate `{tok}`")))
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn sweep(s: &mut Session, a: &SweepArgs) -> Result<()> {
    let config = s.train_config(&a.train)?;
    let rates = parse_rates(a.rates.as_deref())?;
    let kind: InitializerKind = a.init.parse()?;
    let ds = s.load_data(&a.input, None)?;
    let reports = sweep_missing_rates(&ds, &rates, &config, &kind, a.block_len)?;
    s.write_json("sweep.json", &reports)?;
    let mut out = s.create("sweep.csv")?;
    writeln!(out, "rate,entries,t0_overall_mae,overall_mae,overall_mre,general_mae,general_mre")?;
    for r in &reports {
        let t0 = r.trajectory.first().and_then(|t| t.scores.overall.mae);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            opt(r.rate),
            r.overall.entries,
            opt(t0),
            opt(r.overall.mae),
            opt(r.overall.mre),
            opt(r.general.mae),
            opt(r.general.mre)
        )?;
        log::info!("rate {}: overall MAE {}", opt(r.rate), opt(r.overall.mae));
    }
    out.flush()?;
    Ok(())
}

fn compare(s: &mut Session, a: &CompareArgs) -> Result<()> {
    let config = s.train_config(&a.train)?;
    let kinds = a
        .inits
        .split(',')
        .map(|k| k.trim().parse::<InitializerKind>())
        .collect::<Result<Vec<_>>>()?;
    let ds = s.load_data(&a.data.input, a.data.truth.as_deref())?;
    let coords = s.coordinates(&a.data, &ds)?;
    let starts = kinds
        .iter()
        .map(|k| Ok((k.label(), initialize_with_coordinates(&ds, k, coords.as_deref())?)))
        .collect::<Result<Vec<_>>>()?;
    let rows = compare_initial_series(&ds, starts, &config, a.data.block_len)?;
    for r in &rows {
        log::info!("{}: {} -> {}", r.initializer, opt(r.init_mae), opt(r.final_mae));
    }
    s.write_json("compare.json", &rows)?;
    let flat: Vec<_> = rows.iter().flat_map(|r| r.rows()).collect();
    let mut out = s.create("compare.csv")?;
    write_rows(&flat, &mut out)?;
    out.flush()?;
    Ok(())
}

fn eval(s: &mut Session, a: &EvalArgs) -> Result<()> {
    s.reject_config()?;
    let ds = s.load_data(&a.data.input, a.data.truth.as_deref())?;
    s.manifest.input(&a.imputed)?;
    let imputed = load_csv(&a.imputed, &CsvSchema::default())?;
    if imputed.sensor_ids() != ds.sensor_ids() || imputed.timestamps() != ds.timestamps() {
        return Err(Error::Data(format!(
            "{} does not share sensors and timestamps with {}",
            a.imputed.display(),
            a.data.input.display()
        )));
    }
    if imputed.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{} has unfilled cells", a.imputed.display())));
    }
    let scores = score_series(imputed.values(), &ds, &classify_blocks(&ds, a.data.block_len))?;
    s.write_json("eval.json", &scores)?;
    let mut out = s.create("eval.csv")?;
    writeln!(out, "scenario,entries,mae,mre")?;
    for (name, sc) in [("general", &scores.general), ("overall", &scores.overall)] {
        writeln!(out, "{name},{},{},{}", sc.entries, opt(sc.mae), opt(sc.mre))?;
    }
    out.flush()?;
    Ok(())
}
