use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use kernet_core::estimate::{
    cluster_survival, greenwood_ci, interpolate_survival, median_survival_time, predict_with, SummarySource,
};
use kernet_core::eval::{bootstrap_ci_with, ctd_counts, ctd_subsampled_with, CurveEval};
use kernet_core::ingest::{
    load_dataset, load_model, load_queries, save_model, DatasetSchema, EmbeddingSource, FeatureSpec, FeatureSpecKind,
    LoadedModel, Provenance,
};
use kernet_core::interpret::{attribution, heatmap_data, largest_clusters, supercluster_curve, superclusters};
use kernet_core::sft::{sft_fit, SftHyper};
use kernet_core::{
    fit_with_epsilon, project_to_sphere, snap_dataset, Dataset, FeatureKind, GraphParams, GridMode, IndexBackend,
    KernelConfig, KernelKind, KernetError, KernetModel, Points, SurvivalRecord,
};
use serde_json::{json, Value};

use crate::args::{
    ClustersArgs, EvaluateArgs, FinetuneArgs, FitArgs, Format, IndexArg, KernelArg, PredictArgs, SchemaArgs,
    SourceArg,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or arguments: exit code 3.
    Usage(String),
    /// Unreadable or inconsistent data: exit code 2.
    Data(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl From<KernetError> for CliError {
    fn from(e: KernetError) -> Self {
        if e.is_usage() {
            CliError::Usage(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{flag}: no such file `{}`", path.display())))
    }
}

fn check_range(flag: &str, value: f64, ok: bool, domain: &str) -> Result<()> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("{flag} must be {domain}, got {value}")))
    }
}

fn schema(args: &SchemaArgs, provenance_features: Option<&[kernet_core::FeatureColumn]>) -> Result<DatasetSchema> {
    if let Some(p) = &args.embeddings {
        require_file("--embeddings", p)?;
    }
    let embedding = match (&args.embedding_cols, &args.embedding_prefix, &args.embeddings) {
        (Some(cols), _, _) => EmbeddingSource::Columns(cols.clone()),
        (_, Some(prefix), _) => EmbeddingSource::Prefix(prefix.clone()),
        (_, _, Some(path)) => EmbeddingSource::File(path.clone()),
        _ => EmbeddingSource::Remaining,
    };
    let mut features: Vec<FeatureSpec> = args
        .features
        .iter()
        .map(|n| FeatureSpec {
            name: n.clone(),
            kind: FeatureSpecKind::Continuous,
        })
        .chain(args.categorical.iter().map(|n| FeatureSpec {
            name: n.clone(),
            kind: FeatureSpecKind::Categorical,
        }))
        .collect();
    if features.is_empty() {
        if let Some(cols) = provenance_features {
            features = cols
                .iter()
                .map(|c| FeatureSpec {
                    name: c.name.clone(),
                    kind: match c.kind {
                        FeatureKind::Continuous => FeatureSpecKind::Continuous,
                        FeatureKind::Categorical { .. } => FeatureSpecKind::Categorical,
                    },
                })
                .collect();
        }
    }
    Ok(DatasetSchema {
        time_column: args.time_col.clone(),
        event_column: args.event_col.clone(),
        embedding,
        features,
    })
}

fn project_dataset(ds: Dataset, radius: Option<f64>) -> Result<Dataset> {
    let Some(r) = radius else { return Ok(ds) };
    let records = ds
        .records()
        .iter()
        .map(|rec| SurvivalRecord::new(project_to_sphere(&rec.embedding, r)?, rec.observed_time, rec.event))
        .collect::<kernet_core::Result<Vec<_>>>()?;
    let out = Dataset::new(records)?;
    Ok(match ds.raw_features() {
        Some(raw) => out.with_raw_features(raw.clone())?,
        None => out,
    })
}

fn project_points(points: Points, radius: Option<f64>) -> Result<Points> {
    let Some(r) = radius else { return Ok(points) };
    let mut data = Vec::with_capacity(points.as_flat().len());
    for row in points.rows() {
        data.extend(project_to_sphere(row, r)?);
    }
    Ok(Points::from_flat(points.dim(), data)?)
}

fn check_dim(model: &KernetModel, dim: Option<usize>) -> Result<()> {
    match dim {
        Some(d) if d != model.dim() => Err(CliError::Data(format!(
            "embedding dimension {d} does not match the model ({})",
            model.dim()
        ))),
        _ => Ok(()),
    }
}

fn open_model(path: &Path) -> Result<LoadedModel> {
    require_file("--model", path)?;
    Ok(load_model(path)?)
}

fn resolve_source(model: &KernetModel, source: SourceArg) -> Result<SummarySource> {
    match source {
        SourceArg::Auto => Ok(if model.fine_tuned().is_some() {
            SummarySource::FineTuned
        } else {
            SummarySource::Raw
        }),
        SourceArg::Raw => Ok(SummarySource::Raw),
        SourceArg::FineTuned if model.fine_tuned().is_none() => {
            Err(usage("--source fine-tuned: the model has no fine-tuned summaries"))
        }
        SourceArg::FineTuned => Ok(SummarySource::FineTuned),
    }
}

fn source_name(s: SummarySource) -> &'static str {
    match s {
        SummarySource::Raw => "raw",
        SummarySource::FineTuned => "fine-tuned",
    }
}

fn sink(out: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json(out: &mut dyn Write, value: &Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Data(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn warn(msg: &str) {
    eprintln!("{}", json!({ "warning": msg }));
}

pub fn fit(a: FitArgs) -> Result<()> {
    require_file("--data", &a.data)?;
    check_range("--beta", a.beta, a.beta > 0.0 && a.beta < 1.0, "in (0, 1)")?;
    check_range("--scale", a.scale, a.scale > 0.0, "positive")?;
    if let Some(t) = a.tau {
        check_range("--tau", t, t > 0.0, "positive")?;
    }
    if let Some(r) = a.sphere_radius {
        check_range("--sphere-radius", r, r > 0.0, "positive")?;
    }
    if a.max_neighbors == 0 {
        return Err(usage("--max-neighbors must be at least 1"));
    }
    if a.index == IndexArg::Graph && (a.graph_degree == 0 || a.graph_beam == 0) {
        return Err(usage("--graph-degree and --graph-beam must be at least 1"));
    }
    let start = Instant::now();
    let schema = schema(&a.schema, None)?;
    let ds = project_dataset(load_dataset(&a.data, &schema)?, a.sphere_radius)?;
    if ds.is_empty() {
        return Err(CliError::Data("--data: dataset has no records".into()));
    }
    let kernel = KernelConfig {
        kernel: match a.kernel {
            KernelArg::Gaussian => KernelKind::Gaussian,
            KernelArg::Box => KernelKind::Box,
        },
        scale: a.scale,
        tau: a.tau.unwrap_or_else(kernet_core::kernel::default_tau),
        max_neighbors: a.max_neighbors,
    };
    let index = match a.index {
        IndexArg::Exact => IndexBackend::Exact,
        IndexArg::Graph => IndexBackend::Graph(GraphParams {
            max_degree: a.graph_degree,
            beam_width: a.graph_beam,
            seed: a.seed,
        }),
    };
    let model = fit_with_epsilon(
        &ds,
        &kernel,
        a.beta * kernel.tau,
        GridMode::from_bins(a.time_bins),
        index,
    )?;
    let provenance = Provenance {
        seed: Some(a.seed),
        beta: Some(a.beta),
        sphere_radius: a.sphere_radius,
        feature_schema: ds.raw_features().map(|r| r.columns.clone()),
        generator: concat!("kernet ", env!("CARGO_PKG_VERSION")).into(),
    };
    save_model(&model, &provenance, &a.out)?;
    let report = json!({
        "model": a.out.display().to_string(),
        "n_train": model.n_train(),
        "clusters": model.n_clusters(),
        "compression_ratio": model.n_train() as f64 / model.n_clusters() as f64,
        "epsilon": model.epsilon(),
        "time_steps": model.grid().len(),
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    emit_json(&mut io::stdout().lock(), &report)
}

pub fn predict(a: PredictArgs) -> Result<()> {
    require_file("--queries", &a.queries)?;
    let LoadedModel { model, provenance } = open_model(&a.model)?;
    let source = resolve_source(&model, a.source)?;
    let queries = load_queries(&a.queries, &schema(&a.schema, None)?)?;
    if !queries.is_empty() {
        check_dim(&model, Some(queries.dim()))?;
    }
    let queries = project_points(queries, provenance.sphere_radius)?;
    let preds = {
        use rayon::prelude::*;
        (0..queries.len())
            .into_par_iter()
            .map(|i| predict_with(&model, source, queries.row(i)))
            .collect::<kernet_core::Result<Vec<_>>>()?
    };
    let mut out = sink(a.out.as_ref())?;
    let times = model.grid().times();
    match a.format {
        Format::Json => {
            let items: Vec<Value> = preds
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let mut v = json!({
                        "query": i,
                        "fallback": p.fallback,
                        "median": median_survival_time(&p.survival).label(),
                        "survival": p.survival.values(),
                    });
                    if a.hazards {
                        v["hazard"] = json!(p.hazard.values);
                    }
                    if let Some(at) = &a.at {
                        v["at"] = at
                            .iter()
                            .map(|&t| json!({ "time": t, "survival": interpolate_survival(&p.survival, t) }))
                            .collect();
                    }
                    v
                })
                .collect();
            emit_json(
                &mut out,
                &json!({ "source": source_name(source), "times": times, "predictions": items }),
            )
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            match &a.at {
                Some(at) => {
                    w.write_record(["query", "time", "survival", "fallback"])?;
                    for (i, p) in preds.iter().enumerate() {
                        for &t in at {
                            let s = interpolate_survival(&p.survival, t);
                            w.write_record([i.to_string(), t.to_string(), s.to_string(), p.fallback.to_string()])?;
                        }
                    }
                }
                None => {
                    let mut header = vec!["query", "time", "survival", "fallback"];
                    if a.hazards {
                        header.push("hazard");
                    }
                    w.write_record(&header)?;
                    for (i, p) in preds.iter().enumerate() {
                        for (l, (&t, s)) in times.iter().zip(p.survival.values()).enumerate() {
                            let mut row = vec![i.to_string(), t.to_string(), s.to_string(), p.fallback.to_string()];
                            if a.hazards {
                                row.push(p.hazard.values[l].to_string());
                            }
                            w.write_record(&row)?;
                        }
                    }
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}

pub fn evaluate(a: EvaluateArgs) -> Result<()> {
    require_file("--data", &a.data)?;
    check_range("--level", a.level, a.level > 0.0 && a.level < 1.0, "in (0, 1)")?;
    if a.bootstrap == Some(0) {
        return Err(usage("--bootstrap must be at least 1"));
    }
    if matches!(a.subsample_group, Some(g) if g < 2) {
        return Err(usage("--subsample-group must be at least 2"));
    }
    let LoadedModel { model, provenance } = open_model(&a.model)?;
    let source = resolve_source(&model, a.source)?;
    let ds = load_dataset(&a.data, &schema(&a.schema, None)?)?;
    check_dim(&model, ds.dim())?;
    let ds = project_dataset(ds, provenance.sphere_radius)?;
    let test = snap_dataset(&ds, model.grid());
    let curves = {
        use rayon::prelude::*;
        test.records()
            .par_iter()
            .map(|r| predict_with(&model, source, &r.embedding).map(|p| p.survival))
            .collect::<kernet_core::Result<Vec<_>>>()?
    };
    let mode = if a.interpolate { CurveEval::Interpolated } else { CurveEval::Step };
    let counts = ctd_counts(&curves, &test, mode)?;
    let mut warnings = Vec::new();
    if counts.comparable == 0 {
        warnings.push("no comparable pairs; concordance reported as 0.5".to_string());
    }
    let mut report = json!({
        "metric": "ctd",
        "source": source_name(source),
        "curve_eval": if a.interpolate { "interpolated" } else { "step" },
        "n_records": test.len(),
        "point_estimate": counts.value(),
        "n_comparable_pairs": counts.comparable,
    });
    if let Some(b) = a.bootstrap {
        let r = bootstrap_ci_with(&curves, &test, b, a.level, a.seed, mode)?;
        report["ci_lower"] = json!(r.ci_lower);
        report["ci_upper"] = json!(r.ci_upper);
        report["level"] = json!(a.level);
        report["resamples"] = json!(b);
        report["resamples_skipped"] = json!(r.resamples_skipped);
        if r.resamples_skipped > 0 {
            warnings.push(format!("{} bootstrap resamples had no comparable pairs", r.resamples_skipped));
        }
    }
    if let Some(g) = a.subsample_group {
        let v = ctd_subsampled_with(&curves, &test, g, a.seed, mode)?;
        report["subsampled"] = json!({ "group_size": g, "value": v });
    }
    for w in &warnings {
        warn(w);
    }
    report["warnings"] = json!(warnings);
    emit_json(&mut io::stdout().lock(), &report)
}

pub fn finetune(a: FinetuneArgs) -> Result<()> {
    require_file("--train", &a.train)?;
    require_file("--val", &a.val)?;
    check_range("--eta", a.eta, (0.0..=1.0).contains(&a.eta), "in [0, 1]")?;
    check_range("--sigma-rank", a.sigma_rank, a.sigma_rank > 0.0, "positive")?;
    check_range("--lr", a.lr, a.lr > 0.0, "positive")?;
    if a.batch_size == 0 {
        return Err(usage("--batch-size must be at least 1"));
    }
    if a.patience == 0 {
        return Err(usage("--patience must be at least 1"));
    }
    let LoadedModel { mut model, provenance } = open_model(&a.model)?;
    let schema = schema(&a.schema, None)?;
    let train = load_dataset(&a.train, &schema)?;
    let val = load_dataset(&a.val, &schema)?;
    check_dim(&model, train.dim())?;
    check_dim(&model, val.dim())?;
    let train = project_dataset(train, provenance.sphere_radius)?;
    let val = project_dataset(val, provenance.sphere_radius)?;
    let hyper = SftHyper {
        eta: a.eta,
        sigma_rank: a.sigma_rank,
        learning_rate: a.lr,
        max_epochs: a.epochs,
        batch_size: a.batch_size,
        patience: a.patience,
        seed: a.seed,
    };
    let result = sft_fit(&model, &train, &val, &hyper)?;
    model.set_fine_tuned(result.params)?;
    save_model(&model, &provenance, &a.out)?;
    let raw_val = kernet_core::loss_report(&model, SummarySource::Raw, &val, &hyper)?;
    let tuned_val = kernet_core::loss_report(&model, SummarySource::FineTuned, &val, &hyper)?;
    let history: Vec<Value> = result
        .history
        .iter()
        .map(|h| json!({ "epoch": h.epoch, "train_loss": h.train_loss, "val_loss": h.val_loss }))
        .collect();
    let report = json!({
        "model": a.out.display().to_string(),
        "initial_val_loss": result.history[0].val_loss,
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "val_loss_raw": { "nll": raw_val.nll, "rank": raw_val.rank, "total": raw_val.total },
        "val_loss_fine_tuned": { "nll": tuned_val.nll, "rank": tuned_val.rank, "total": tuned_val.total },
        "history": history,
    });
    emit_json(&mut io::stdout().lock(), &report)
}

pub fn clusters(a: ClustersArgs) -> Result<()> {
    check_range("--level", a.level, a.level > 0.0 && a.level < 1.0, "in (0, 1)")?;
    let LoadedModel { model, provenance } = open_model(&a.model)?;
    let source = resolve_source(&model, a.source)?;
    let selected: Vec<usize> = match a.top {
        Some(0) => return Err(usage("--top must be at least 1")),
        Some(k) => largest_clusters(&model, k),
        None => (0..model.n_clusters()).collect(),
    };
    if let Some(k) = a.superclusters {
        if k == 0 || k > model.n_clusters() {
            return Err(usage(format!(
                "--superclusters must lie in 1..={} (the model's cluster count), got {k}",
                model.n_clusters()
            )));
        }
    }
    if let Some(p) = &a.attribute {
        require_file("--attribute", p)?;
    }
    let sections = [a.heatmap, a.curves, a.superclusters.is_some(), a.attribute.is_some()]
        .iter()
        .filter(|&&b| b)
        .count();
    if a.format == Format::Csv && sections != 1 {
        return Err(usage(
            "--format csv needs exactly one of --heatmap, --curves, --superclusters, --attribute",
        ));
    }

    let mut out = json!({ "source": source_name(source), "times": model.grid().times() });
    let sizes = model.net().cluster_sizes();
    if sections == 0 {
        let rows: Vec<Value> = selected
            .iter()
            .map(|&q| {
                let c = cluster_survival(&model, q, source)?;
                Ok(json!({
                    "cluster": q,
                    "exemplar": model.net().exemplar_ids()[q],
                    "size": sizes[q],
                    "median": median_survival_time(&c).label(),
                }))
            })
            .collect::<kernet_core::Result<_>>()?;
        out["clusters"] = json!(rows);
    }

    if a.heatmap {
        let Some(data) = &a.data else {
            return Err(usage("--heatmap needs --data with the training records"));
        };
        require_file("--data", data)?;
        let schema = schema(&a.schema, provenance.feature_schema.as_deref())?;
        if schema.features.is_empty() {
            return Err(usage(
                "--heatmap needs raw features (--feature/--categorical, or a model fitted with them)",
            ));
        }
        let ds = project_dataset(load_dataset(data, &schema)?, provenance.sphere_radius)?;
        let h = heatmap_data(&model, &ds, &selected, source)?;
        if a.format == Format::Csv {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            let mut header = vec!["feature".to_string(), "variable".to_string()];
            header.extend(h.column_labels.iter().cloned());
            w.write_record(&header)?;
            for (r, row) in h.intensity.iter().enumerate() {
                let mut rec = vec![h.row_labels[r].clone(), h.row_variables[r].clone()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            return Ok(());
        }
        out["heatmap"] = json!({
            "row_labels": h.row_labels,
            "row_variables": h.row_variables,
            "column_labels": h.column_labels,
            "column_clusters": h.column_clusters,
            "column_medians": h.column_medians,
            "intensity": h.intensity,
            "group_boundaries": h.group_boundaries,
        });
    }

    if a.curves {
        let mut rows = Vec::with_capacity(selected.len());
        for &q in &selected {
            let c = cluster_survival(&model, q, source)?;
            let band = match source {
                SummarySource::Raw => {
                    let s = model.raw_summaries();
                    Some(greenwood_ci(c.shared_times(), s.deaths(q), s.at_risk(q), a.level)?)
                }
                SummarySource::FineTuned => None,
            };
            rows.push((q, c, band));
        }
        if a.format == Format::Csv {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["cluster", "time", "survival", "lower", "upper"])?;
            for (q, c, band) in &rows {
                for (l, (&t, s)) in c.times().iter().zip(c.values()).enumerate() {
                    let (lo, hi) = match band {
                        Some((lo, hi)) => (lo.values()[l].to_string(), hi.values()[l].to_string()),
                        None => (String::new(), String::new()),
                    };
                    w.write_record([q.to_string(), t.to_string(), s.to_string(), lo, hi])?;
                }
            }
            w.flush()?;
            return Ok(());
        }
        out["curves"] = rows
            .iter()
            .map(|(q, c, band)| {
                let mut v = json!({
                    "cluster": q,
                    "size": sizes[*q],
                    "median": median_survival_time(c).label(),
                    "survival": c.values(),
                });
                if let Some((lo, hi)) = band {
                    v["lower"] = json!(lo.values());
                    v["upper"] = json!(hi.values());
                    v["level"] = json!(a.level);
                }
                v
            })
            .collect();
    }

    if let Some(k) = a.superclusters {
        let part = superclusters(&model, k)?;
        if a.format == Format::Csv {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["cluster", "supercluster"])?;
            for (q, s) in part.assignment.iter().enumerate() {
                w.write_record([q.to_string(), s.to_string()])?;
            }
            w.flush()?;
            return Ok(());
        }
        let mut groups = Vec::with_capacity(k);
        for s in 0..k {
            let c = supercluster_curve(&model, &part, s, source)?;
            let members = part.members(s);
            groups.push(json!({
                "supercluster": s,
                "members": members,
                "size": members.iter().map(|&q| sizes[q]).sum::<usize>(),
                "median": median_survival_time(&c).label(),
                "survival": c.values(),
            }));
        }
        out["superclusters"] = json!({ "k": k, "assignment": part.assignment, "groups": groups });
    }

    if let Some(path) = &a.attribute {
        let queries = load_queries(path, &schema(&a.schema, None)?)?;
        if !queries.is_empty() {
            check_dim(&model, Some(queries.dim()))?;
        }
        let queries = project_points(queries, provenance.sphere_radius)?;
        let mut lists = Vec::with_capacity(queries.len());
        for i in 0..queries.len() {
            lists.push(attribution(&model, queries.row(i))?);
        }
        if a.format == Format::Csv {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["query", "cluster", "exemplar", "weight"])?;
            for (i, list) in lists.iter().enumerate() {
                for at in list {
                    w.write_record([i.to_string(), at.cluster.to_string(), at.exemplar.to_string(), at.weight.to_string()])?;
                }
            }
            w.flush()?;
            return Ok(());
        }
        out["attribution"] = lists
            .iter()
            .enumerate()
            .map(|(i, list)| {
                json!({
                    "query": i,
                    "clusters": list
                        .iter()
                        .map(|at| json!({ "cluster": at.cluster, "exemplar": at.exemplar, "weight": at.weight }))
                        .collect::<Vec<_>>(),
                })
            })
            .collect();
    }
    emit_json(&mut io::stdout().lock(), &out)
}
