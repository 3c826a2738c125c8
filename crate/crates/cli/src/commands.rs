use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use disentangle_core::contingency::{build_contingency, count_rows, imbalance_of_counts, ContingencyTable};
use disentangle_core::directions::{conditional_project, edit_latent, SemanticDirection};
use disentangle_core::eval::{
    effect, eval_codes, overall_entanglement, rescore, sweep_regularization, sweep_sample_size,
    AttributeScorer, EvalSettings, RegularizationSweep, SampleSizeSweep, SweepReport,
};
use disentangle_core::fit::{draw_subsample, fit_attribute, FitMethod, Sampling};
use disentangle_core::io::{read_dataset, read_direction, read_json, with_suffix, write_dataset, write_direction, write_text};
use disentangle_core::oracle::{make_world, sample_world, LinearAttributeWorld, WorldConfig};
use disentangle_core::{filter_by_confidence, ExhaustionPolicy, LatentDataset, SvmParams};
use serde_json::{json, Value};

use crate::{
    Cli, Command, ContingencyArgs, EditArgs, EvalArgs, Failure, FilterArgs, FitArgs, Format, Method, Policy,
    ProjectArgs, ReportArgs, SampleArgs, SamplingKind, ScoreDomain, SeedArg, SweepArgs, SynthArgs,
};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Synth(a) => synth(a, cli.strict),
        Command::Filter(a) => filter(a),
        Command::Contingency(a) => contingency(a),
        Command::Sample(a) => sample(a, cli.strict),
        Command::Fit(a) => fit(a, cli.strict),
        Command::Project(a) => project(a),
        Command::Edit(a) => edit(a),
        Command::Eval(a) => eval(a, cli.strict),
        Command::Sweep(a) => sweep(a, cli.strict),
        Command::Report(a) => report(a),
    }
}

fn seed(arg: &SeedArg, strict: bool) -> Result<u64, Failure> {
    match (arg.seed, strict) {
        (Some(s), _) => Ok(s),
        (None, false) => Ok(0),
        (None, true) => Err(Failure::Usage("--seed is required in --strict mode".into())),
    }
}

fn policy(p: Policy) -> ExhaustionPolicy {
    match p {
        Policy::Skip => ExhaustionPolicy::Skip,
        Policy::Oversample => ExhaustionPolicy::Oversample,
    }
}

/// Writes to `out`, or to standard output when no path is given.
fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => write_text(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

fn load_world(path: &Path) -> Result<LinearAttributeWorld, Failure> {
    let world: LinearAttributeWorld = read_json(path)?;
    let m = world.config.names.len();
    let consistent = world.vectors.len() == m
        && world.biases.len() == m
        && world.vectors.iter().all(|v| v.len() == world.config.dim);
    if !consistent {
        return Err(Failure::Data(anyhow!("{}: world vectors do not match its configuration", path.display())));
    }
    Ok(world)
}

/// Row indices from a `position,row_index` CSV, checked against `n` rows.
fn read_sample(path: &Path, n: usize) -> Result<Vec<usize>, Failure> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers().with_context(|| format!("reading {}", path.display()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["position", "row_index"] {
        return Err(Failure::Data(anyhow!("{}: expected header position,row_index", path.display())));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        let row: usize = record[1]
            .trim()
            .parse()
            .with_context(|| format!("{}: bad row index on data line {}", path.display(), line + 1))?;
        if row >= n {
            return Err(Failure::Data(anyhow!(
                "{}: row index {row} out of range for a dataset of {n} rows",
                path.display()
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn synth(a: &SynthArgs, strict: bool) -> Outcome {
    let seed = seed(&a.seed, strict)?;
    let mut config = if a.orthogonal {
        WorldConfig::reference_orthogonal(seed)
    } else {
        WorldConfig::reference(seed)
    };
    config.dim = a.dim;
    config.sharpness = a.sharpness;
    let world = make_world(config)?;
    let data = sample_world(&world, a.n, seed);
    write_dataset(&data, &a.out)?;
    write_text(&with_suffix(&a.out, ".world.json"), &(world.to_json() + "\n"))?;
    Ok(())
}

fn filter(a: &FilterArgs) -> Outcome {
    let data = read_dataset(&a.data)?;
    let kept = filter_by_confidence(&data, a.threshold)?;
    write_dataset(&kept, &a.out)?;
    eprintln!("kept {} of {} rows", kept.len(), data.len());
    Ok(())
}

fn table_json(data: &LatentDataset, table: &ContingencyTable) -> Value {
    let cells: Vec<Value> = (0..table.cells())
        .map(|c| json!({"cell_index": c, "bits": table.combination(c).to_string(), "count": table.counts()[c]}))
        .collect();
    json!({
        "attributes": data.schema().names(),
        "total": table.total(),
        "cells": cells,
        "imbalance": imbalance_of_counts(table.counts()),
    })
}

fn contingency(a: &ContingencyArgs) -> Outcome {
    let data = read_dataset(&a.data)?;
    let table = match &a.sample {
        Some(path) => {
            let rows = read_sample(path, data.len())?;
            ContingencyTable::from_counts(data.m(), count_rows(&data, &rows))
        }
        None => build_contingency(&data),
    };
    let text = match a.format {
        Format::Csv => table.to_csv(),
        Format::Json => pretty(&table_json(&data, &table)),
    };
    emit(a.out.as_deref(), &text)
}

fn sample(a: &SampleArgs, strict: bool) -> Outcome {
    let seed = seed(&a.seed, strict)?;
    let data = read_dataset(&a.data)?;
    let table = build_contingency(&data);
    let sampling = match a.sampling {
        SamplingKind::Uniform => Sampling::Uniform,
        SamplingKind::Balanced => Sampling::Balanced(policy(a.policy)),
    };
    let result = draw_subsample(&data, &table, sampling, a.n0, seed)?;
    let summary = json!({
        "sampling": sampling.to_string(),
        "n0": a.n0,
        "seed": seed,
        "source_rows": data.len(),
        "selected": result.indices.len(),
        "per_cell_counts": result.per_cell_counts,
        "skipped_iterations": result.skipped_iterations,
        "imbalance": imbalance_of_counts(&result.per_cell_counts),
        "rng": result.rng,
    });
    write_text(&a.out, &result.to_csv())?;
    write_text(&a.out.with_extension("json"), &pretty(&summary))?;
    Ok(())
}

fn direction_file(out_dir: &Path, data: &LatentDataset, j: usize) -> PathBuf {
    let name = data.schema().name(j).unwrap_or("attribute");
    out_dir.join(format!("{name}.json"))
}

fn fit(a: &FitArgs, strict: bool) -> Outcome {
    let seed = seed(&a.seed, strict)?;
    let data = read_dataset(&a.data)?;
    let rows = match &a.sample {
        Some(path) => read_sample(path, data.len())?,
        None => (0..data.len()).collect(),
    };
    let method = match a.method {
        Method::Centroid => FitMethod::Centroid,
        Method::Svm => FitMethod::Svm(SvmParams {
            c: a.c,
            tol: a.tol,
            max_iter: a.max_iter,
            seed,
        }),
    };
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for j in 0..data.m() {
        let dir = fit_attribute(&data, &rows, j, &method)
            .with_context(|| format!("fitting attribute {}", data.schema().name(j).unwrap_or("?")))?;
        write_direction(&dir, &direction_file(&a.out_dir, &data, j))?;
    }
    Ok(())
}

fn project(a: &ProjectArgs) -> Outcome {
    let target = read_direction(&a.target)?;
    let others = a
        .others
        .iter()
        .map(|p| read_direction(p))
        .collect::<Result<Vec<SemanticDirection>, _>>()?;
    let projected = conditional_project(&target, &others)?;
    write_direction(&projected, &a.out)?;
    Ok(())
}

fn edit(a: &EditArgs) -> Outcome {
    let data = read_dataset(&a.data)?;
    let direction = read_direction(&a.direction)?;
    let mut codes = Vec::with_capacity(data.codes().len());
    for row in 0..data.len() {
        codes.extend(edit_latent(data.code(row), &direction, a.alpha)?);
    }
    let edited = LatentDataset::new(data.schema().clone(), data.dim(), codes, data.labels().to_vec(), None)?;
    write_dataset(&edited, &a.out)?;
    Ok(())
}

fn eval(a: &EvalArgs, strict: bool) -> Outcome {
    let seed = seed(&a.seed, strict)?;
    let world = load_world(&a.world)?;
    let directions = a
        .directions
        .iter()
        .map(|p| read_direction(p))
        .collect::<Result<Vec<SemanticDirection>, _>>()?;
    if let Some((path, d)) = a.directions.iter().zip(&directions).find(|(_, d)| d.attribute >= world.m()) {
        return Err(Failure::Data(anyhow!(
            "{}: attribute {} but the world has {} attributes",
            path.display(),
            d.attribute,
            world.m()
        )));
    }
    let settings = EvalSettings { alpha: a.alpha, n: a.n };
    let latents = eval_codes(world.dim(), &settings, seed, 0);
    let logits = world.logit_scorer();
    let scorer: &dyn AttributeScorer = match a.scores {
        ScoreDomain::Probability => &world,
        ScoreDomain::Logit => &logits,
    };
    let matrix = rescore(scorer, &directions, &latents, a.alpha)?.with_names(world.schema().names());
    let text = match a.format {
        Format::Csv => matrix.to_csv(),
        Format::Json => matrix.to_json() + "\n",
    };
    emit(a.out.as_deref(), &text)?;

    if let Some(path) = &a.summary {
        let mut out = String::from("row,attribute,method,effect,entanglement\n");
        for (j, d) in directions.iter().enumerate() {
            out.push_str(&format!(
                "{j},{},{},{},{}\n",
                matrix.attribute_names[d.attribute],
                d.method,
                effect(&matrix, j)?,
                overall_entanglement(&matrix, j)?
            ));
        }
        write_text(path, &out)?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs, strict: bool) -> Outcome {
    let seed = seed(&a.seed, strict)?;
    let data = read_dataset(&a.data)?;
    let world = load_world(&a.world)?;
    let eval = EvalSettings { alpha: a.alpha, n: a.n };
    let svm = SvmParams {
        c: a.c,
        seed,
        ..SvmParams::default()
    };
    let report: SweepReport = if a.c_grid.is_empty() {
        let mut samplings = Vec::new();
        for kind in &a.samplings {
            match kind {
                SamplingKind::Uniform => samplings.push(Sampling::Uniform),
                SamplingKind::Balanced => samplings.extend(a.policy.iter().map(|&p| Sampling::Balanced(policy(p)))),
            }
        }
        let methods = a
            .methods
            .iter()
            .map(|m| match m {
                Method::Centroid => FitMethod::Centroid,
                Method::Svm => FitMethod::Svm(svm),
            })
            .collect();
        let config = SampleSizeSweep {
            sizes: a.sizes.clone(),
            methods,
            samplings,
            runs: a.runs,
            seed,
            eval,
        };
        sweep_sample_size(&data, &world, &config)?
    } else {
        let [p] = a.policy[..] else {
            return Err(Failure::Usage("a regularization sweep takes exactly one --policy".into()));
        };
        let config = RegularizationSweep {
            c_values: a.c_grid.clone(),
            n0: a.n0,
            policy: policy(p),
            runs: a.runs,
            seed,
            svm,
            eval,
        };
        sweep_regularization(&data, &world, &config)?
    };
    let text = match a.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json() + "\n",
    };
    emit(a.out.as_deref(), &text)
}

fn cell_value(text: &str) -> Value {
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => json!(x),
        _ if text.is_empty() => Value::Null,
        _ => json!(text),
    }
}

fn report(a: &ReportArgs) -> Outcome {
    let mut header: Option<csv::StringRecord> = None;
    let mut records = Vec::new();
    for path in &a.inputs {
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let h = reader.headers().with_context(|| format!("reading {}", path.display()))?.clone();
        match &header {
            None => header = Some(h),
            Some(first) if *first != h => {
                return Err(Failure::Data(anyhow!(
                    "{}: header differs from {}",
                    path.display(),
                    a.inputs[0].display()
                )))
            }
            Some(_) => {}
        }
        for record in reader.records() {
            records.push(record.with_context(|| format!("reading {}", path.display()))?);
        }
    }
    let header = header.expect("at least one input");
    let text = match a.format {
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(&header).context("writing csv")?;
            for r in &records {
                writer.write_record(r).context("writing csv")?;
            }
            String::from_utf8(writer.into_inner().map_err(|e| anyhow!("{e}"))?).context("csv is utf-8")?
        }
        Format::Json => {
            let rows: Vec<Value> = records
                .iter()
                .map(|r| {
                    let object: serde_json::Map<String, Value> =
                        header.iter().zip(r.iter()).map(|(k, v)| (k.to_string(), cell_value(v))).collect();
                    Value::Object(object)
                })
                .collect();
            pretty(&Value::Array(rows))
        }
    };
    emit(a.out.as_deref(), &text)
}
