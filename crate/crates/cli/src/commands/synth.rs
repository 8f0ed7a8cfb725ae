use emcl::emcl::EmclConfig;
use emcl::linalg::{numerical_rank, RANK_REL_TOL};
use emcl::synthetic::{
    generate, pca_project, run_iteration_study, variance_diagnostics, ClassVariance, Modality,
};

use super::{csv_bytes, load_config, num, strings};
use crate::cli::SynthArgs;
use crate::config::{self, EmclSection, SynthConfig};
use crate::error::Result;
use crate::manifest::{Recorder, RowRanges};

const NAME: &str = "synth-experiment";

fn variance_cells(v: &ClassVariance) -> [String; 3] {
    [num(v.intra), num(v.inter), num(v.ratio())]
}

pub fn run(args: SynthArgs) -> Result<()> {
    let (mut cfg, _): (SynthConfig, _) = load_config(&args.common, NAME)?;
    if let Some(seed) = args.emcl.seed {
        cfg.synthetic.seed = seed;
    }
    cfg.emcl = cfg.emcl.overlay(&args.emcl.section());
    cfg.pca_k = args.pca_k.or(cfg.pca_k);
    cfg.synthetic.validate()?;
    let base = EmclConfig {
        k: cfg.synthetic.num_classes,
        seed: cfg.synthetic.seed,
        ..EmclConfig::default()
    };
    let emcl = cfg.emcl.resolve(base);
    let pca_k = cfg.pca_k.unwrap_or(emcl.k);
    cfg.emcl = EmclSection::from_config(&emcl);
    cfg.pca_k = Some(pca_k);

    let out_dir = args.common.output_dir;
    let mut rec = Recorder::new(NAME, config::echo(NAME, &cfg));
    let batch = generate(&cfg.synthetic)?;
    let half = batch.features.rows() / 2;
    rec.rows(RowRanges::split(half, half));
    rec.lap("generate");

    let trace = run_iteration_study(&batch, &emcl)?;
    let pca = pca_project(&batch, pca_k)?;
    let pca_var = variance_diagnostics(&batch.with_features(pca.clone())?)?;
    rec.lap("compute");

    let mut header = strings(&[
        "iteration",
        "intra",
        "inter",
        "ratio",
        "numerical_rank",
        "lambda_change",
    ]);
    let rows: Vec<Vec<String>> = trace
        .records
        .iter()
        .map(|r| {
            let mut row = vec![r.iteration.to_string()];
            row.extend(variance_cells(&r.variance));
            row.push(r.numerical_rank.to_string());
            row.push(r.lambda_change.map(num).unwrap_or_default());
            row
        })
        .collect();
    rec.output(&out_dir, "trace.csv", "trace", &csv_bytes(&header, &rows)?)?;

    let dim = batch.features.cols();
    header = strings(&["stage", "row", "label", "modality"]);
    header.extend((0..dim).map(|j| format!("x{j}")));
    let mut coords = Vec::new();
    for (stage, m) in [
        ("input", &batch.features),
        ("emcl", &trace.final_features),
        ("pca", &pca),
    ] {
        for i in 0..m.rows() {
            let modality = match batch.modality[i] {
                Modality::Video => "video",
                Modality::Text => "text",
            };
            let mut row = vec![
                stage.to_string(),
                i.to_string(),
                batch.labels[i].to_string(),
                modality.into(),
            ];
            row.extend(m.as_matrix().row(i).iter().map(|v| num(*v)));
            coords.push(row);
        }
    }
    rec.output(
        &out_dir,
        "coordinates.csv",
        "coordinates",
        &csv_bytes(&header, &coords)?,
    )?;

    let first = &trace.records[0];
    let last = trace.records.last().expect("trace has the raw record");
    let summary_row = |method: &str, rank_param: usize, v: &ClassVariance, rank: usize| {
        let mut row = vec![method.to_string(), rank_param.to_string()];
        row.extend(variance_cells(v));
        row.push(rank.to_string());
        row
    };
    let summary = vec![
        summary_row("input", dim, &first.variance, first.numerical_rank),
        summary_row("emcl", emcl.k, &last.variance, last.numerical_rank),
        summary_row(
            "pca",
            pca_k,
            &pca_var,
            numerical_rank(pca.as_matrix(), RANK_REL_TOL)?,
        ),
    ];
    rec.output(
        &out_dir,
        "summary.csv",
        "summary",
        &csv_bytes(
            &strings(&["method", "k", "intra", "inter", "ratio", "numerical_rank"]),
            &summary,
        )?,
    )?;
    rec.lap("write");
    rec.finish(&out_dir)?;

    println!(
        "{:<6} {:>4} {:>12} {:>12} {:>10}",
        "method", "k", "intra", "inter", "ratio"
    );
    for r in &summary {
        println!(
            "{:<6} {:>4} {:>12} {:>12} {:>10}",
            r[0],
            r[1],
            short(&r[2]),
            short(&r[3]),
            short(&r[4])
        );
    }
    Ok(())
}

fn short(cell: &str) -> String {
    cell.parse::<f64>()
        .map(|v| format!("{v:.4}"))
        .unwrap_or_else(|_| cell.into())
}
