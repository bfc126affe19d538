use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{CommandFactory, Parser, Subcommand};
use serde::Serialize;

use tunnel_deduce::evaluation::{cross_test, grid_search};
use tunnel_deduce::geometry::{assemble_observation, CellIndex};
use tunnel_deduce::pipeline::{
    deduce_current, deduce_history, ingest_readings, load_config, load_field, render_heatmap,
    sections, synthesize, write_readings, DeductionResult, Readings, SectionConfig, SynthOptions,
};
use tunnel_deduce::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "tunnel-deduce",
    version,
    about = "Full-face stress deduction for tunnel lining sections"
)]
struct Cli {
    /// Section config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Daily readings (CSV with header date,sensor_id,value).
    #[arg(long, global = true)]
    readings: Option<PathBuf>,
    /// Overrides the training seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the per-part load resultants and adjacency weights as CSV.
    Mechanics,
    /// Deduce the full section for one day; writes JSON, CSV and SVG.
    Deduce {
        #[arg(long)]
        date: NaiveDate,
    },
    /// Deduce every day and write the series of selected cells.
    History {
        /// Sensor ids or `layer:part` pairs, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        cells: Vec<String>,
    },
    /// Hold out one sensor on every day it reports and score the predictions.
    CrossTest {
        /// Sensor id or `layer:part`.
        #[arg(long)]
        cell: String,
        /// Train without the adjacency and symmetry penalties.
        #[arg(long)]
        baseline: bool,
    },
    /// K-fold grid search over (lambda1, lambda2) on one day.
    GridSearch {
        /// Day to search on; defaults to the last day in the readings.
        #[arg(long)]
        date: Option<NaiveDate>,
        /// Cell held back from the search, e.g. a later test point.
        #[arg(long)]
        exclude: Option<String>,
    },
    /// Re-render a saved deduction result.
    Render {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input path with an `.svg` extension.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a synthetic config, readings and ground truth for a built-in section.
    Synth {
        #[arg(long, default_value = "S9")]
        section: String,
        #[arg(long, default_value_t = 60)]
        days: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                if matches!(e, Error::Config(ref m) if m.starts_with("--")) {
                    eprintln!("\n{}", Cli::command().render_usage());
                }
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn config(cli: &Cli) -> Result<SectionConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn readings(cli: &Cli) -> Result<Readings> {
    let path = cli
        .readings
        .as_ref()
        .ok_or_else(|| Error::Config("--readings is required for this command".into()))?;
    let r = ingest_readings(path)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(r)
}

fn resolve_cell(cfg: &SectionConfig, spec: &str) -> Result<CellIndex> {
    let cell = match cfg.layout.cell_of(spec) {
        Some(c) => c,
        None => spec.parse::<CellIndex>().map_err(|_| {
            Error::Config(format!(
                "`{spec}` is neither a sensor id nor a layer:part pair"
            ))
        })?,
    };
    cfg.grid.check_cell(cell)?;
    Ok(cell)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable output")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Mechanics => {
            let cfg = config(&cli)?;
            let load = load_field(&cfg)?;
            let mut out = String::from("row,index,angle,radial,tangential,q\n");
            for n in 1..=cfg.grid.parts() {
                out.push_str(&format!(
                    "part,{n},{},{},{},\n",
                    cfg.grid.cell_angle(n)?,
                    load.radial[n - 1],
                    load.tangential[n - 1]
                ));
            }
            for (i, q) in load.q_weights.iter().enumerate() {
                out.push_str(&format!("pair,{},,,,{q}\n", i + 1));
            }
            print!("{out}");
        }
        Command::Deduce { date } => {
            let cfg = config(&cli)?;
            let readings = readings(&cli)?;
            let result = deduce_current(&cfg, *date, readings.day(*date)?)?;
            ensure_dir(&cli.out_dir)?;
            let stem = cli.out_dir.join(format!("{}_{}", cfg.section_id, date));
            result.save(stem.with_extension("json"))?;
            write(&stem.with_extension("csv"), &result.matrix_csv())?;
            render_heatmap(&result, stem.with_extension("svg"))?;
            println!(
                "{}",
                to_json(&serde_json::json!({
                    "section_id": result.section_id,
                    "date": result.date,
                    "max_cell": result.max_cell,
                    "max_value": result.max_value,
                    "loss": result.loss,
                    "result": stem.with_extension("json"),
                    "heatmap": stem.with_extension("svg"),
                }))
            );
        }
        Command::History { cells } => {
            let cfg = config(&cli)?;
            let readings = readings(&cli)?;
            let cells = cells
                .iter()
                .map(|c| resolve_cell(&cfg, c))
                .collect::<Result<Vec<_>>>()?;
            let report = deduce_history(&cfg, &readings, &cells)?;
            for f in &report.failures {
                eprintln!("warning: {} skipped: {}", f.date, f.error);
            }
            ensure_dir(&cli.out_dir)?;
            let csv_path = cli.out_dir.join(format!("{}_history.csv", cfg.section_id));
            write(&csv_path, &report.to_csv())?;
            let extrema = to_json(&report.extrema);
            write(
                &cli.out_dir.join(format!("{}_extrema.json", cfg.section_id)),
                &extrema,
            )?;
            println!("{extrema}");
        }
        Command::CrossTest { cell, baseline } => {
            let cfg = config(&cli)?;
            let readings = readings(&cli)?;
            let test_cell = resolve_cell(&cfg, cell)?;
            let load = load_field(&cfg)?;
            let mut dates = Vec::new();
            let mut snapshots = Vec::new();
            for (date, day) in &readings.days {
                let x = assemble_observation(&cfg.grid, &cfg.layout, day)?;
                if x.is_observed(test_cell) {
                    dates.push(*date);
                    snapshots.push(x);
                }
            }
            if snapshots.is_empty() {
                return Err(Error::Config(format!(
                    "cell {test_cell} has no readings on any day"
                )));
            }
            let result = cross_test(
                &snapshots,
                &load.q_weights,
                test_cell,
                &cfg.train,
                !baseline,
            )?;
            let series: Vec<_> = result
                .predictions
                .iter()
                .map(|p| {
                    serde_json::json!({
                        "date": dates[p.index],
                        "truth": p.truth,
                        "prediction": p.prediction,
                    })
                })
                .collect();
            let out = to_json(&serde_json::json!({
                "section_id": cfg.section_id,
                "cell": test_cell,
                "with_constraints": result.with_constraints,
                "metrics": result.report,
                "predictions": series,
            }));
            ensure_dir(&cli.out_dir)?;
            let name = format!(
                "{}_cross_test_{}_{}{}.json",
                cfg.section_id,
                test_cell.layer,
                test_cell.part,
                if *baseline { "_baseline" } else { "" }
            );
            write(&cli.out_dir.join(name), &out)?;
            println!("{}", to_json(&result.report));
        }
        Command::GridSearch { date, exclude } => {
            let cfg = config(&cli)?;
            let readings = readings(&cli)?;
            let date = match date {
                Some(d) => *d,
                None => *readings
                    .days
                    .keys()
                    .next_back()
                    .expect("non-empty readings"),
            };
            let mut x = assemble_observation(&cfg.grid, &cfg.layout, readings.day(date)?)?;
            if let Some(spec) = exclude {
                let cell = resolve_cell(&cfg, spec)?;
                x = x.without([&cell]);
            }
            let load = load_field(&cfg)?;
            let result = grid_search(
                &x,
                &load.q_weights,
                &cfg.search.lambda1,
                &cfg.search.lambda2,
                cfg.search.folds,
                &cfg.train,
                cfg.train.seed,
            )?;
            ensure_dir(&cli.out_dir)?;
            let mut table = String::from("lambda1,lambda2,mean_val_rmse,error\n");
            for row in &result.cv_table {
                table.push_str(&format!(
                    "{},{},{},{}\n",
                    row.lambda1,
                    row.lambda2,
                    row.mean_val_rmse.map(|v| v.to_string()).unwrap_or_default(),
                    row.error.as_deref().unwrap_or("").replace(',', ";")
                ));
            }
            write(
                &cli.out_dir.join(format!("{}_cv_table.csv", cfg.section_id)),
                &table,
            )?;
            let best = to_json(&serde_json::json!({
                "date": date,
                "best_lambda1": result.best_lambda1,
                "best_lambda2": result.best_lambda2,
                "best_val_rmse": result.best_val_rmse,
                "folds": result.folds,
                "candidates": result.cv_table.len(),
            }));
            write(
                &cli.out_dir
                    .join(format!("{}_grid_search.json", cfg.section_id)),
                &best,
            )?;
            println!("{best}");
        }
        Command::Render { input, output } => {
            let result = DeductionResult::load(input)?;
            let output = output
                .clone()
                .unwrap_or_else(|| input.with_extension("svg"));
            render_heatmap(&result, &output)?;
            println!("{}", output.display());
        }
        Command::Synth {
            section,
            days,
            noise,
            dropout,
        } => {
            let mut cfg = sections::builtin_config(section)?;
            // a small step and a long run so daily fits settle near the optimum
            cfg.train.patience = 0;
            cfg.train.learning_rate = 0.002;
            cfg.train.max_epochs = 100_000;
            let opts = SynthOptions {
                days: *days,
                noise: *noise,
                dropout: *dropout,
                seed: cli.seed.unwrap_or(0),
                ..SynthOptions::default()
            };
            let (series, readings) = synthesize(&cfg.grid, &cfg.layout, &opts)?;
            ensure_dir(&cli.out_dir)?;
            let config_path = cli.out_dir.join(format!("{section}_config.toml"));
            write(&config_path, &cfg.to_toml_string()?)?;
            let readings_path = cli.out_dir.join(format!("{section}_readings.csv"));
            let mut buf = Vec::new();
            write_readings(&mut buf, &readings.days).map_err(|e| Error::Io {
                path: readings_path.clone(),
                source: e,
            })?;
            write(&readings_path, &String::from_utf8(buf).expect("utf-8 csv"))?;
            let truth: Vec<_> = series
                .dates
                .iter()
                .zip(&series.fields)
                .map(|(d, f)| {
                    serde_json::json!({
                        "date": d,
                        "field": f.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            write(
                &cli.out_dir.join(format!("{section}_truth.json")),
                &to_json(&truth),
            )?;
            println!(
                "{}",
                to_json(&serde_json::json!({
                    "config": config_path,
                    "readings": readings_path,
                    "days": readings.len(),
                }))
            );
        }
    }
    Ok(())
}
