//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Lines go straight to stdout so they show up without `--nocapture`. The
//! end-to-end criteria drive the `iin` binary on the default synthetic
//! fixture and take a few minutes.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use iin_core::dataset::truth_reads;
use iin_core::eval::{mae, mre, score, score_series};
use iin_core::imputer::{run_cascade, TrainConfig};
use iin_core::ingest::{load_csv, simulate_missing, CsvSchema, Mechanism, MissingSpec};
use iin_core::init::{initialize, InitializerKind};
use iin_core::nn::CellKind;
use iin_core::synth::{generate, SynthSpec};
use iin_core::{classify_blocks, scenario_membership, EntryState, Scenario, SensorDataset, TimeFormat};
use ndarray::Array2;
use serde_json::Value;
use tempfile::TempDir;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn iin(out: &Path, args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_iin"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)))
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn num(v: &Value) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("not a number: {v}"))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let std = support::gradient_check(CellKind::Standard, 21);
    let phased = support::gradient_check(CellKind::Phased, 22);
    let secs = start.elapsed().as_secs_f64();
    let worst = std.worst_relative.max(phased.worst_relative);
    check(
        worst < 1e-4 && secs < 30.0,
        format!(
            "worst relative error {worst:.2e} over {} entries at 10+10 points, {secs:.1} s",
            std.entries + phased.entries
        ),
    )
}

fn forward_oracles() -> Outcome {
    let (a, b, c) = (
        support::lstm_step_error(11),
        support::phased_step_error(12),
        support::encode_context_error(13),
    );
    check(
        a.max(b).max(c) < 1e-12,
        format!("max abs diff lstm {a:.1e}, phased {b:.1e}, encode {c:.1e} (100 cases each)"),
    )
}

fn phased_reductions() -> Outcome {
    let (open, closed) = support::gate_reductions(16);
    check(
        open < 1e-15 && closed,
        format!("k=1 max diff {open:.1e}, k=0 state held bitwise: {closed}"),
    )
}

/// Scores a random mask both through `score_series` and by hand.
fn partition_holds(seed: u64) -> Result<(), String> {
    let ds = generate(&SynthSpec {
        sensors: 3,
        steps: 240,
        seed,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let blocky = MissingSpec {
        mechanism: Mechanism::BlockInjection,
        rate: 0.1 + (seed % 4) as f64 * 0.05,
        block_length: (1, 20),
        seed,
    };
    let ds = simulate_missing(&ds, &blocky).map_err(|e| e.to_string())?;
    let ds = simulate_missing(&ds, &MissingSpec::random_rate(0.1, seed + 1000)).map_err(|e| e.to_string())?;
    let est = initialize(&ds, &InitializerKind::GlobalMean).map_err(|e| e.to_string())?;
    let blocks = classify_blocks(&ds, 11);
    let pair = score_series(&est, &ds, &blocks).map_err(|e| e.to_string())?;

    let (mut n_general, mut n_block, mut s_general, mut s_block) = (0usize, 0usize, 0.0, 0.0);
    for ((t, s), truth) in ds.ground_truth().iter_values() {
        let err = (est[(t, s)] - truth).abs();
        match scenario_membership(&ds, &blocks, t, s) {
            Scenario::GeneralMissing => {
                n_general += 1;
                s_general += err;
            }
            Scenario::OverallOnly => {
                n_block += 1;
                s_block += err;
            }
            Scenario::NotMissing => return Err(format!("held-out ({t},{s}) classified as observed")),
        }
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
    let overall_sum = pair.overall.mae.unwrap_or(0.0) * pair.overall.entries as f64;
    let general_sum = pair.general.mae.unwrap_or(0.0) * pair.general.entries as f64;
    if pair.general.entries != n_general
        || pair.overall.entries != n_general + n_block
        || pair.overall.entries != ds.count(EntryState::Holdout)
        || !close(general_sum, s_general)
        || !close(overall_sum, s_general + s_block)
    {
        return Err(format!(
            "seed {seed}: general {} vs {n_general}, overall {} vs {}",
            pair.general.entries,
            pair.overall.entries,
            n_general + n_block
        ));
    }
    Ok(())
}

fn metrics() -> Outcome {
    let m = mae(&[10.0, 20.0], &[12.0, 18.0]).map_err(|e| e.to_string())?;
    let r = mre(&[10.0, 20.0], &[12.0, 18.0]).map_err(|e| e.to_string())?;
    if m != 2.0 || r != 4.0 / 30.0 {
        return Err(format!("mae {m:?}, mre {r:?}"));
    }
    for seed in 0..50 {
        partition_holds(seed)?;
    }
    Ok(format!("mae {m:?}, mre {r:?}; partition exact on 50 random masks"))
}

fn blocks() -> Outcome {
    // one sensor with gap runs of 10, 11 and 12 between observed stretches
    let mut values = vec![1.0; 60];
    let runs = [(5, 10), (20, 11), (40, 12)];
    for &(start, len) in &runs {
        for v in &mut values[start..start + len] {
            *v = f64::NAN;
        }
    }
    let matrix = Array2::from_shape_vec((60, 1), values).unwrap();
    let ds = SensorDataset::from_matrix(vec!["a".into()], (0..60).map(f64::from).collect(), TimeFormat::EpochHours, matrix, "x")
        .map_err(|e| e.to_string())?;
    let b = classify_blocks(&ds, 11);
    let found: Vec<(usize, usize)> = b.temporal_blocks[0].iter().map(|r| (r.start, r.len)).collect();

    let mut three = Array2::from_elem((8, 3), 2.0);
    three[(4, 0)] = f64::NAN;
    three[(4, 1)] = f64::NAN;
    three[(4, 2)] = f64::NAN;
    three[(6, 1)] = f64::NAN;
    let ds3 = SensorDataset::from_matrix(
        vec!["a".into(), "b".into(), "c".into()],
        (0..8).map(f64::from).collect(),
        TimeFormat::EpochHours,
        three,
        "x",
    )
    .map_err(|e| e.to_string())?;
    let spatial: Vec<usize> = classify_blocks(&ds3, 11).spatial_blocks.into_iter().collect();
    check(
        found == [(20, 11), (40, 12)] && spatial == [4],
        format!("temporal blocks {found:?}, spatial blocks {spatial:?}"),
    )
}

/// The default synthetic fixture with a 20% exact-count holdout.
struct Fixture {
    _tmp: TempDir,
    root: PathBuf,
    clean: PathBuf,
    data: PathBuf,
    truth: PathBuf,
}

fn fixture() -> Result<Fixture, String> {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let root = tmp.path().to_path_buf();
    iin(&root.join("gen"), &["gen", "--sensors", "3", "--steps", "2000"])?;
    let clean = root.join("gen/synthetic.csv");
    iin(&root.join("sim"), &["simulate", "--input", clean.to_str().unwrap(), "--rate", "0.2", "--seed", "7"])?;
    Ok(Fixture {
        _tmp: tmp,
        clean,
        data: root.join("sim/dataset.csv"),
        truth: root.join("sim/truth.csv"),
        root,
    })
}

fn run_full(f: &Fixture, name: &str, extra: &[&str]) -> Result<(PathBuf, Duration), String> {
    let out = f.root.join(name);
    let mut args = vec![
        "run",
        "--input",
        f.data.to_str().unwrap(),
        "--truth",
        f.truth.to_str().unwrap(),
        "--init",
        "nearest",
        "--cell",
        "standard",
        "--w",
        "12",
        "--iters",
        "3",
        "--deterministic",
    ];
    args.extend_from_slice(extra);
    let start = Instant::now();
    iin(&out, &args)?;
    Ok((out, start.elapsed()))
}

fn end_to_end(report: &Value, elapsed: Duration) -> Outcome {
    let t0 = num(&report["trajectory"][0]["overall"]["mae"])?;
    let fin = num(&report["overall"]["mae"])?;
    let val: Vec<f64> = report["validation_mae"]
        .as_array()
        .ok_or("no validation_mae")?
        .iter()
        .map(num)
        .collect::<Result<_, _>>()?;
    let reduction = 1.0 - fin / t0;
    let settles = val.windows(2).all(|p| p[1] <= p[0] * 1.02);
    let secs = elapsed.as_secs_f64();
    check(
        reduction >= 0.2 && settles && val.len() == 3 && secs < 600.0,
        format!("T_0 MAE {t0:.4} -> {fin:.4} ({:.1}% lower), validation {val:.4?}, {secs:.0} s", reduction * 100.0),
    )
}

fn sweep(f: &Fixture) -> Outcome {
    let out = f.root.join("sweep");
    iin(
        &out,
        &["sweep", "--input", f.clean.to_str().unwrap(), "--rates", "0.1,0.3,0.5", "--deterministic"],
    )?;
    let reports = read_json(&out.join("sweep.json"))?;
    let reports = reports.as_array().ok_or("sweep.json is not a list")?;
    let maes: Vec<f64> = reports.iter().map(|r| num(&r["overall"]["mae"])).collect::<Result<_, _>>()?;
    check(
        maes.len() == 3 && maes[2] >= maes[0],
        format!("final MAE at 0.1/0.3/0.5: {maes:.4?}"),
    )
}

fn mixed_vs_separate(f: &Fixture, mixed: &Value) -> Outcome {
    let (out, _) = run_full(f, "separate", &["--mode", "separate"])?;
    let sep = num(&read_json(&out.join("report.json"))?["overall"]["mae"])?;
    let mix = num(&mixed["overall"]["mae"])?;
    check(mix <= sep * 1.05, format!("mixed {mix:.4} vs separate {sep:.4}"))
}

fn determinism(a: &Path, b: &Path) -> Outcome {
    let names = [
        "report.json",
        "report.csv",
        "T_0.csv",
        "T_1.csv",
        "T_2.csv",
        "T_3.csv",
        "checkpoint.json",
    ];
    let mut bytes = 0;
    for name in names {
        let (x, y) = (fs::read(a.join(name)), fs::read(b.join(name)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => bytes += x.len(),
            _ => return Err(format!("{name} differs")),
        }
    }
    Ok(format!("{} files, {bytes} bytes identical", names.len()))
}

fn ground_truth_safety(f: &Fixture, run: &Path) -> Outcome {
    let input = load_csv(&f.data, &CsvSchema::default()).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for i in 0..4 {
        let t = load_csv(run.join(format!("T_{i}.csv")), &CsvSchema::default()).map_err(|e| e.to_string())?;
        for ((pos, state), v) in input.mask().indexed_iter().zip(input.values()) {
            if *state == EntryState::Observed {
                if t.values()[pos].to_bits() != v.to_bits() {
                    return Err(format!("T_{i} drifted at {pos:?}"));
                }
                compared += 1;
            }
        }
    }

    // in-process audit: nothing before scoring touches held-out values
    let ds = simulate_missing(
        &generate(&SynthSpec {
            sensors: 3,
            steps: 150,
            ..Default::default()
        })
        .unwrap(),
        &MissingSpec::random_rate(0.2, 3),
    )
    .map_err(|e| e.to_string())?;
    let config = TrainConfig {
        w: 3,
        hidden: 4,
        iter_num: 2,
        max_epochs: 2,
        ..Default::default()
    };
    let before = truth_reads();
    let run = run_cascade(&ds, &config, &InitializerKind::TemporalNearest).map_err(|e| e.to_string())?;
    let during = truth_reads() - before;
    score(&run, &ds, &classify_blocks(&ds, 11)).map_err(|e| e.to_string())?;
    let scoring = truth_reads() - before;
    check(
        during == 0 && scoring > 0,
        format!("{compared} observed cells bitwise equal across T_0..T_3; truth reads: {during} while imputing, {scoring} after scoring"),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("gradient correctness", gradients()),
        ("forward oracle equivalence", forward_oracles()),
        ("phased reductions", phased_reductions()),
        ("metric exactness", metrics()),
        ("block classification", blocks()),
    ];

    match fixture() {
        Err(e) => results.push(("synthetic fixture", Err(e))),
        Ok(f) => {
            let first = run_full(&f, "mixed_a", &[]);
            let second = run_full(&f, "mixed_b", &[]);
            match (&first, &second) {
                (Ok((a, elapsed)), Ok((b, _))) => match read_json(&a.join("report.json")) {
                    Ok(report) => {
                        results.push(("synthetic end-to-end recovery", end_to_end(&report, *elapsed)));
                        results.push(("missing-rate monotonic stress", sweep(&f)));
                        results.push(("mixed vs separate", mixed_vs_separate(&f, &report)));
                        results.push(("determinism", determinism(a, b)));
                        results.push(("ground-truth safety", ground_truth_safety(&f, a)));
                    }
                    Err(e) => results.push(("synthetic end-to-end recovery", Err(e))),
                },
                _ => {
                    let e = first.err().or(second.err()).unwrap_or_default();
                    results.push(("synthetic end-to-end recovery", Err(e)));
                }
            }
        }
    }

    let mut out = std::io::stdout().lock();
    for (name, r) in &results {
        let line = match r {
            Ok(d) => format!("PASS  {name}: {d}"),
            Err(d) => format!("FAIL  {name}: {d}"),
        };
        writeln!(out, "{line}").unwrap();
    }
    out.flush().unwrap();
    let failed: Vec<&str> = results.iter().filter(|(_, r)| r.is_err()).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
