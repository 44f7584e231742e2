use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use supercon_core::data::{self, Dataset};
use supercon_core::dataprep::{self, CleanConfig, CleanRow};
use supercon_core::elements::{Property, PropertyTable};
use supercon_core::eval::{self, GridSpec, Grouping, HoldoutPlan};
use supercon_core::features::{feature_names, featurize_batch};
use supercon_core::formula::{parse_formula, Element};
use supercon_core::gbt::BoosterParams;
use supercon_core::model::{self, ModelSpec, SavedModel};
use supercon_core::predict::{self, ReferenceSet, EXISTENCE_WARNING, NO_MATCH_MESSAGE};

use crate::args::*;
use crate::output::{Cell, Table};
use crate::Failure;

type Result<T> = std::result::Result<T, Failure>;

struct Ctx<'a> {
    cli: &'a Cli,
    table: PropertyTable,
}

impl Ctx<'_> {
    fn info(&self, msg: impl AsRef<str>) {
        if !self.cli.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn print(&self, t: &Table) -> Result<()> {
        t.write(self.cli.format, io::stdout().lock())
            .map_err(Failure::env)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(Failure::env)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(Failure::env)
}

fn in_file<T, E>(path: &Path, r: std::result::Result<T, E>) -> Result<T>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.with_context(|| format!("in {}", path.display()))
        .map_err(Failure::input)
}

pub fn run(cli: &Cli) -> Result<()> {
    let table = match &cli.elements {
        None => PropertyTable::builtin().clone(),
        Some(p) => {
            // surface a missing file as an environment error
            open(p)?;
            in_file(p, PropertyTable::load(p))?
        }
    };
    let ctx = Ctx { cli, table };
    match &cli.command {
        Command::Parse { formulas } => parse(&ctx, formulas),
        Command::Elements {
            action:
                ElementsAction::Show {
                    symbols,
                    provenance,
                },
        } => elements(&ctx, symbols, *provenance),
        Command::Featurize(a) => featurize_cmd(&ctx, a),
        Command::Clean(a) => clean(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::Grid(a) => grid(&ctx, a),
        Command::Summarize(a) => summarize(&ctx, a),
        Command::Predict(a) => predict_cmd(&ctx, a),
        Command::Importance(a) => importance(&ctx, a),
    }
}

fn parse(ctx: &Ctx, formulas: &[String]) -> Result<()> {
    let mut t = Table::new(&["input", "canonical", "elements", "total"]);
    let mut rejected = 0;
    for f in formulas {
        match parse_formula(f) {
            Ok(c) => t.push(vec![
                f.as_str().into(),
                c.to_string().into(),
                c.len().into(),
                c.entries().iter().map(|(_, v)| v).sum::<f64>().into(),
            ]),
            Err(issue) => {
                eprintln!("{f:?}: {issue}");
                rejected += 1;
            }
        }
    }
    if !t.rows.is_empty() {
        ctx.print(&t)?;
    }
    match rejected {
        0 => Ok(()),
        n => Err(Failure::input(anyhow!(
            "{n} of {} formulas rejected",
            formulas.len()
        ))),
    }
}

fn elements(ctx: &Ctx, symbols: &[String], provenance: bool) -> Result<()> {
    let mut header = vec!["symbol", "z"];
    header.extend(Property::ALL.iter().map(|p| p.column()));
    let mut t = Table::new(&header);
    let wanted: Vec<Element> = symbols
        .iter()
        .map(|s| {
            Element::from_symbol(s)
                .filter(|e| e.is_supported())
                .ok_or_else(|| {
                    Failure::input(anyhow!("{s:?} is not an element in the table (H..Rn)"))
                })
        })
        .collect::<Result<_>>()?;
    for (e, props) in ctx.table.iter() {
        if !wanted.is_empty() && !wanted.contains(&e) {
            continue;
        }
        let mut row: Vec<Cell> = vec![e.symbol().into(), (e.atomic_number() as usize).into()];
        row.extend(Property::ALL.iter().map(|&p| Cell::Num(props.get(p))));
        t.push(row);
    }
    ctx.print(&t)?;
    if provenance {
        let mut out = io::stdout().lock();
        writeln!(out, "version: {}", ctx.table.version()).map_err(Failure::env)?;
        for p in Property::ALL {
            writeln!(
                out,
                "{} ({}): {}",
                p.column(),
                p.unit(),
                ctx.table.provenance(p).unwrap_or("unspecified")
            )
            .map_err(Failure::env)?;
        }
    }
    Ok(())
}

fn featurize_cmd(ctx: &Ctx, a: &FeaturizeArgs) -> Result<()> {
    let (comps, targets) = match &a.input {
        Some(path) => {
            let rows = in_file(path, dataprep::read_clean_csv(open(path)?))?;
            let y: Vec<f64> = rows.iter().map(|r| r.critical_temp).collect();
            (
                rows.into_iter().map(|r| r.composition).collect::<Vec<_>>(),
                Some(y),
            )
        }
        None if a.formulas.is_empty() => {
            return Err(Failure::input(anyhow!(
                "give formulas or --input <clean.csv>"
            )))
        }
        None => {
            let comps = a
                .formulas
                .iter()
                .map(|f| {
                    parse_formula(f)
                        .with_context(|| format!("{f:?}"))
                        .map_err(Failure::input)
                })
                .collect::<Result<Vec<_>>>()?;
            (comps, None)
        }
    };
    let features = featurize_batch(&comps, &ctx.table)
        .into_iter()
        .zip(&comps)
        .map(|(f, c)| f.with_context(|| c.to_string()).map_err(Failure::input))
        .collect::<Result<Vec<_>>>()?;

    match &a.out {
        Some(path) => {
            data::write_features_csv(&features, targets.as_deref(), create(path)?)
                .map_err(Failure::env)?;
            ctx.info(format!(
                "wrote {} rows to {}",
                features.len(),
                path.display()
            ));
        }
        None if a.input.is_none() && ctx.cli.format == Format::Table => {
            // one column per formula
            let mut header = vec!["feature".to_string()];
            header.extend(comps.iter().map(|c| c.to_string()));
            let mut t = Table {
                header,
                rows: Vec::new(),
            };
            for (i, name) in feature_names().iter().enumerate() {
                let mut row: Vec<Cell> = vec![name.as_str().into()];
                row.extend(features.iter().map(|f| Cell::Num(f.values()[i])));
                t.rows.push(row);
            }
            ctx.print(&t)?;
        }
        None => {
            data::write_features_csv(&features, targets.as_deref(), io::stdout().lock())
                .map_err(Failure::env)?;
        }
    }
    Ok(())
}

fn clean(ctx: &Ctx, a: &CleanArgs) -> Result<()> {
    let raw = in_file(&a.input, dataprep::read_raw_csv(open(&a.input)?))?;
    if !raw.ignored_columns.is_empty() {
        ctx.info(format!(
            "ignoring columns: {}",
            raw.ignored_columns.join(", ")
        ));
    }
    let out = dataprep::clean(
        &raw.records,
        &CleanConfig {
            tc_ceiling: a.tc_ceiling,
        },
    );
    dataprep::write_clean_csv(&out, create(&a.out)?).map_err(Failure::env)?;
    dataprep::write_audit_csv(&out.audit, create(&a.audit)?).map_err(Failure::env)?;

    let mut counts = std::collections::BTreeMap::<(&str, &str), usize>::new();
    for e in &out.audit {
        *counts
            .entry((e.action.as_str(), e.rule.map_or("", |r| r.id())))
            .or_default() += 1;
    }
    let mut t = Table::new(&["action", "rule", "rows"]);
    for ((action, rule), n) in counts {
        t.push(vec![action.into(), rule.into(), n.into()]);
    }
    ctx.print(&t)?;
    ctx.info(format!(
        "{} input rows, {} kept, {} dropped",
        raw.records.len(),
        out.rows.len(),
        out.dropped()
    ));
    Ok(())
}

fn booster_params(a: &GbtArgs) -> Result<BoosterParams> {
    let mut p = BoosterParams::preset(&a.preset).ok_or_else(|| {
        Failure::input(anyhow!(
            "unknown preset {:?} (default, paper-best)",
            a.preset
        ))
    })?;
    if let Some(v) = a.eta {
        p.eta = v;
    }
    if let Some(v) = a.max_depth {
        p.max_depth = v;
    }
    if let Some(v) = a.min_child_weight {
        p.min_child_weight = v;
    }
    if let Some(v) = a.subsample {
        p.subsample = v;
    }
    if let Some(v) = a.colsample {
        p.colsample = v;
    }
    if let Some(v) = a.lambda {
        p.lambda = v;
    }
    if let Some(v) = a.gamma {
        p.gamma = v;
    }
    if let Some(v) = a.trees {
        p.n_trees = v;
    }
    p.validate().map_err(Failure::input)?;
    Ok(p)
}

fn model_spec(kind: ModelKind, a: &GbtArgs) -> Result<ModelSpec> {
    Ok(match kind {
        ModelKind::Gbt => ModelSpec::Gbt(booster_params(a)?),
        ModelKind::Ols => ModelSpec::Ols,
    })
}

fn load_features(path: &Path) -> Result<Dataset> {
    in_file(path, data::read_features_csv(open(path)?))
}

fn load_model(path: &Path) -> Result<SavedModel> {
    in_file(path, model::read_model(open(path)?))
}

fn train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let spec = model_spec(a.model, &a.gbt)?;
    let ds = load_features(&a.data)?;
    ctx.info(format!("training {} on {} rows", spec.id(), ds.len()));
    let m = spec.fit(&ds, ctx.cli.seed).map_err(Failure::input)?;
    let pred = m.predict_batch(&ds.x).map_err(Failure::input)?;
    model::write_model(&m, create(&a.out)?).map_err(Failure::env)?;

    let mut t = Table::new(&["model", "rows", "train_rmse", "train_r2"]);
    t.push(vec![
        spec.id().into(),
        ds.len().into(),
        eval::rmse(&pred, &ds.y).into(),
        eval::r_squared(&pred, &ds.y).into(),
    ]);
    ctx.print(&t)?;
    if let SavedModel::Ols(lm) = &m {
        if !lm.dropped.is_empty() {
            ctx.info(format!(
                "dropped as linearly dependent: {}",
                lm.dropped.join(", ")
            ));
        }
    }
    ctx.info(format!("wrote {}", a.out.display()));
    Ok(())
}

fn eval_cmd(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let spec = model_spec(a.model, &a.gbt)?;
    let ds = load_features(&a.data)?;
    let plan = HoldoutPlan {
        repeats: a.repeats,
        seed: ctx.cli.seed,
    };
    ctx.info(format!(
        "{} repeats of {} on {} rows",
        plan.repeats,
        spec.id(),
        ds.len()
    ));
    let rep = eval::evaluate(&ds, &spec, &plan).map_err(Failure::input)?;

    let mut t = Table::new(&["model", "repeats", "rmse", "r2", "mean_of_rmse"]);
    t.push(vec![
        rep.model.clone().into(),
        rep.mse.len().into(),
        rep.rmse.into(),
        rep.r2.into(),
        rep.mean_of_rmse.into(),
    ]);
    ctx.print(&t)?;
    if let Some(path) = &a.report {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, &rep).map_err(Failure::env)?;
        writeln!(w).map_err(Failure::env)?;
    }
    if let Some(path) = &a.residuals {
        let split = eval::holdout_split(ds.len(), plan.seed, 0);
        let m = spec
            .fit(&ds.select(&split.train), plan.seed)
            .map_err(Failure::input)?;
        let test = ds.select(&split.test);
        let pred = m.predict_batch(&test.x).map_err(Failure::input)?;
        let mut r = Table::new(&["observed", "predicted", "residual"]);
        for (o, p) in test.y.iter().zip(&pred) {
            r.push(vec![(*o).into(), (*p).into(), (o - p).into()]);
        }
        r.write(Format::Csv, create(path)?).map_err(Failure::env)?;
    }
    Ok(())
}

fn grid(ctx: &Ctx, a: &GridArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)
        .with_context(|| format!("cannot read {}", a.config.display()))
        .map_err(Failure::env)?;
    let mut spec = in_file(&a.config, GridSpec::from_toml(&text))?;
    if ctx.cli.seed != 0 {
        spec.seed = ctx.cli.seed;
    }
    let cells = in_file(&a.config, spec.cells())?;
    let ds = load_features(&a.data)?;
    ctx.info(format!(
        "{} cells, {} trees each, {} rows",
        cells.len(),
        spec.n_trees,
        ds.len()
    ));
    let rows = eval::grid_search_with(&ds, &spec, |i, r| {
        ctx.info(format!(
            "[{}/{}] eta={} colsample={} subsample={} mcw={} depth={}: rmse {:.4} at {} trees",
            i + 1,
            cells.len(),
            r.params.eta,
            r.params.colsample,
            r.params.subsample,
            r.params.min_child_weight,
            r.params.max_depth,
            r.rmse,
            r.best_trees
        ))
    })
    .map_err(Failure::input)?;

    let mut t = Table::new(&[
        "eta",
        "colsample",
        "subsample",
        "min_child_weight",
        "max_depth",
        "lambda",
        "gamma",
        "best_trees",
        "rmse",
    ]);
    for r in rows.iter().take(a.top.unwrap_or(usize::MAX)) {
        let p = &r.params;
        t.push(vec![
            p.eta.into(),
            p.colsample.into(),
            p.subsample.into(),
            p.min_child_weight.into(),
            p.max_depth.into(),
            p.lambda.into(),
            p.gamma.into(),
            r.best_trees.into(),
            r.rmse.into(),
        ]);
    }
    ctx.print(&t)?;
    if let Some(path) = &a.curves {
        let mut c = Table::new(&["rank", "trees", "rmse"]);
        for (rank, r) in rows.iter().enumerate() {
            for (k, v) in r.curve.iter().enumerate() {
                c.push(vec![(rank + 1).into(), (k + 1).into(), (*v).into()]);
            }
        }
        c.write(Format::Csv, create(path)?).map_err(Failure::env)?;
    }
    Ok(())
}

fn parse_grouping(s: &str) -> Result<Grouping> {
    match s {
        "overall" => Ok(Grouping::Overall),
        "element" => Ok(Grouping::PerElement),
        "cuprate" => Ok(Grouping::Cuprate),
        _ => {
            let sym = s.strip_prefix("contains=").ok_or_else(|| {
                Failure::input(anyhow!(
                    "unknown group {s:?} (overall, element, cuprate, contains=<Symbol>)"
                ))
            })?;
            Element::from_symbol(sym)
                .map(Grouping::Contains)
                .ok_or_else(|| Failure::input(anyhow!("{sym:?} is not an element symbol")))
        }
    }
}

fn summarize(ctx: &Ctx, a: &SummarizeArgs) -> Result<()> {
    let grouping = parse_grouping(&a.group)?;
    let rows: Vec<CleanRow> = in_file(&a.data, dataprep::read_clean_csv(open(&a.data)?))?;
    let mut t = Table::new(&[
        "group", "size", "min", "q1", "median", "q3", "max", "mean", "sd",
    ]);
    for s in eval::summarize(&rows, grouping) {
        t.push(vec![
            s.group.clone().into(),
            s.size.into(),
            s.min.into(),
            s.q1.into(),
            s.median.into(),
            s.q3.into(),
            s.max.into(),
            s.mean.into(),
            if s.sd_defined {
                s.sd.into()
            } else {
                f64::NAN.into()
            },
        ]);
        if s.size == 1 {
            ctx.info(format!("{}: one row, sd undefined", s.group));
        }
    }
    ctx.print(&t)
}

fn predict_cmd(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let m = load_model(&a.model)?;
    m.check_features(feature_names()).map_err(Failure::input)?;
    eprintln!("{EXISTENCE_WARNING}");

    if let Some(batch) = &a.batch {
        let out_path = a.out.as_ref().expect("clap enforces --out");
        let materials = in_file(batch, predict::read_materials_csv(open(batch)?))?;
        let rows = predict::batch_predict(&materials, &m, &ctx.table);
        predict::write_batch_csv(&rows, create(out_path)?).map_err(Failure::env)?;
        let bad = rows.iter().filter(|r| r.error.is_some()).count();
        ctx.info(format!(
            "{} rows, {} with errors, wrote {}",
            rows.len(),
            bad,
            out_path.display()
        ));
        return Ok(());
    }

    let refs = match (&a.verbose, &a.train) {
        (true, Some(path)) => Some(ReferenceSet::from_rows(&in_file(
            path,
            dataprep::read_clean_csv(open(path)?),
        )?)),
        _ => None,
    };
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(Failure::input(anyhow!("--threshold must be in [0, 1]")));
    }

    let mut out = io::stdout().lock();
    let w = |out: &mut io::StdoutLock, s: String| writeln!(out, "{s}").map_err(Failure::env);
    for f in &a.formulas {
        let r = predict::predict(f, &m, &ctx.table, refs.as_ref().map(|r| (r, a.threshold)))
            .with_context(|| format!("{f:?}"))
            .map_err(Failure::input)?;
        w(&mut out, format!("formula: {}", r.formula))?;
        w(&mut out, format!("predicted_tc: {:.2} K", r.predicted_tc))?;
        if let Some(nb) = r.neighbors {
            if nb.is_empty() {
                w(&mut out, NO_MATCH_MESSAGE.to_string())?;
            } else {
                w(
                    &mut out,
                    format!("matches (cosine similarity >= {}):", a.threshold),
                )?;
                let mut t = Table::new(&["material", "critical_temp", "similarity"]);
                for n in nb {
                    t.push(vec![
                        n.material.into(),
                        n.critical_temp.into(),
                        n.similarity.into(),
                    ]);
                }
                t.write(ctx.cli.format, &mut out).map_err(Failure::env)?;
            }
        }
    }
    Ok(())
}

fn importance(ctx: &Ctx, a: &ImportanceArgs) -> Result<()> {
    let m = load_model(&a.model)?;
    let SavedModel::Gbt(b) = &m else {
        return Err(Failure::input(anyhow!(
            "importance needs a gbt model, got {}",
            m.kind()
        )));
    };
    let ranked = b.ranked_importance().map_err(Failure::input)?;
    let mut t = Table::new(&["rank", "feature", "gain_share"]);
    for (i, (name, share)) in ranked.into_iter().take(a.top).enumerate() {
        t.push(vec![(i + 1).into(), name.into(), share.into()]);
    }
    ctx.print(&t)
}
