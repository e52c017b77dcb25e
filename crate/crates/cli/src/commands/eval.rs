use std::path::Path;

use anyhow::{Context, Result};
use omnidensity::dataset::{Manifest, Split};
use omnidensity::density::CountBins;
use omnidensity::evalkit::{
    ablation_table, counts_from_density_dir, density_map_path, evaluate, parse_count_table,
    AblationEntry, CountPair, EvalResult, TableFormat, TableOptions,
};
use omnidensity::Error;
use serde::Serialize;

use super::{load_manifest, print_json};
use crate::config::{DiscretizeArgs, EvalArgs, OutputFormat, RunConfig};
use crate::run::Run;

fn parse_split(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(Error::InvalidParams(format!("unknown split {other:?} (train or test)")).into()),
    }
}

fn predictions(run: &mut Run, pred: &Path, gt: &Manifest) -> Result<Vec<CountPair>> {
    if pred.is_dir() {
        let pairs = counts_from_density_dir(pred, gt)?;
        for r in &gt.records {
            run.read(&density_map_path(pred, &r.id))?;
        }
        return Ok(pairs);
    }
    let table = parse_count_table(&run.read_string(pred)?)?;
    let missing: Vec<String> = gt
        .records
        .iter()
        .filter(|r| !table.contains_key(&r.id))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingMap(missing).into());
    }
    Ok(gt
        .records
        .iter()
        .map(|r| CountPair {
            id: r.id.clone(),
            predicted: table[&r.id],
            ground_truth: r.count() as f64,
        })
        .collect())
}

fn score(pairs: &[CountPair]) -> Result<EvalResult> {
    let pred: Vec<f64> = pairs.iter().map(|p| p.predicted).collect();
    let gt: Vec<f64> = pairs.iter().map(|p| p.ground_truth).collect();
    Ok(evaluate(&pred, &gt)?)
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    mae: f64,
    mse: f64,
    n: usize,
    pairs: &'a [CountPair],
}

fn format_single(r: &EvalResult, format: OutputFormat, pairs: &[CountPair]) -> Result<String> {
    Ok(match format {
        OutputFormat::Markdown => format!("| MAE | MSE | n |\n|---|---|---|\n| {:.2} | {:.2} | {} |\n", r.mae, r.mse, r.n),
        OutputFormat::Csv => format!("MAE,MSE,n\n{},{},{}\n", r.mae, r.mse, r.n),
        OutputFormat::Json => {
            let out = EvalOutput {
                mae: r.mae,
                mse: r.mse,
                n: r.n,
                pairs,
            };
            serde_json::to_string_pretty(&out)? + "\n"
        }
    })
}

fn extension(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Markdown => "md",
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

pub fn run(cfg: &RunConfig, a: &EvalArgs) -> Result<()> {
    let mut run = Run::new(a.out.as_deref())?;
    let mut gt = load_manifest(&mut run, &a.gt)?;
    if let Some(split) = &a.split {
        let split = parse_split(split)?;
        gt = Manifest::new(gt.records.into_iter().filter(|r| r.split == split).collect());
    }

    let text = if let Some(pred) = &a.pred {
        let pairs = predictions(&mut run, pred, &gt)?;
        let result = score(&pairs)?;
        format_single(&result, a.format, &pairs)?
    } else {
        let mut entries = Vec::with_capacity(a.row.len());
        for row in &a.row {
            let (label, path) = row
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("--row expects LABEL=PATH, got {row:?}")))?;
            let pairs = predictions(&mut run, Path::new(path), &gt)
                .with_context(|| format!("scoring row {label:?}"))?;
            let labels = label.split('|').map(str::to_string).collect();
            entries.push(AblationEntry::new(labels, &score(&pairs)?));
        }
        match a.format {
            OutputFormat::Json => serde_json::to_string_pretty(&entries)? + "\n",
            fmt => {
                let opts = TableOptions {
                    label_headers: a.headers.split(',').map(|h| h.trim().to_string()).collect(),
                    format: if fmt == OutputFormat::Csv { TableFormat::Csv } else { TableFormat::Markdown },
                    ..TableOptions::default()
                };
                ablation_table(&entries, &opts)
            }
        }
    };
    print!("{text}");
    if run.has_output_dir() {
        run.write(&format!("eval.{}", extension(a.format)), text.as_bytes())?;
    }
    run.finish(cfg)
}

#[derive(Serialize)]
struct Class {
    index: usize,
    lo: f64,
    /// `None` for the open-ended overflow class.
    hi: Option<f64>,
}

#[derive(Serialize)]
struct Assignment {
    #[serde(skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    value: f64,
    class: usize,
}

#[derive(Serialize)]
struct Discretized {
    bins: CountBins,
    classes: Vec<Class>,
    assignments: Vec<Assignment>,
}

pub fn run_discretize(cfg: &RunConfig, a: &DiscretizeArgs) -> Result<()> {
    let mut run = Run::new(a.out.as_deref())?;
    let bins = match (&a.c_max, &a.train) {
        (Some(c), _) => CountBins::new(*c)?,
        (None, Some(path)) => {
            let m = load_manifest(&mut run, path)?;
            let counts: Vec<f64> = m
                .records
                .iter()
                .filter(|r| r.split == Split::Train)
                .map(|r| r.count() as f64)
                .collect();
            CountBins::from_training_counts(&counts)?
        }
        (None, None) => return Err(Error::InvalidParams("pass --c-max or --train".into()).into()),
    };
    let classes = (0..bins.num_classes())
        .map(|index| {
            let b = bins.bin_bounds(index)?;
            Ok(Class {
                index,
                lo: b.lo,
                hi: b.hi.is_finite().then_some(b.hi),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values: Vec<(Option<String>, f64)> = a.values.iter().map(|&v| (None, v)).collect();
    if let Some(path) = &a.counts {
        let table = parse_count_table(&run.read_string(path)?)?;
        values.extend(table.into_iter().map(|(id, v)| (Some(id), v)));
    }
    let assignments = values
        .into_iter()
        .map(|(id, value)| {
            Ok(Assignment {
                class: bins.discretize_count(value)?,
                id,
                value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = Discretized {
        bins,
        classes,
        assignments,
    };
    print_json(&out)?;
    if run.has_output_dir() {
        run.write_json("discretize.json", &out)?;
    }
    run.finish(cfg)
}
