use emcl::contrastive::{
    cosine_similarity, info_nce, inverted_softmax, SimilarityMatrix, DEFAULT_INV_TEMPERATURE,
    DEFAULT_TEMPERATURE,
};
use emcl::emcl::{apply_residual, emcl_iterate, EmclConfig, FeatureMatrix};
use emcl::retrieval::{
    compute_report, invert_mapping, rank_matrix, Direction, RetrievalReport, RECALL_KS,
};
use nalgebra::DMatrix;

use super::{
    canonical, csv_bytes, initial_state, load_config, load_features, num, read_state_alpha,
    required, strings,
};
use crate::cli::EvalArgs;
use crate::config::{self, EmclSection, EvalConfig};
use crate::embedding;
use crate::error::{CliError, Result};
use crate::manifest::{Recorder, RowRanges};

const NAME: &str = "eval-retrieval";

struct Row {
    condition: &'static str,
    report: RetrievalReport,
    loss: Option<f64>,
}

/// Reports for one (texts, videos) pair. Inverted softmax, when enabled,
/// normalizes over the queries of each direction.
fn evaluate(
    texts: &FeatureMatrix,
    videos: &FeatureMatrix,
    gt: &[usize],
    cfg: &EvalConfig,
    condition: &'static str,
) -> Result<Vec<Row>> {
    let tau = cfg.temperature.unwrap_or(DEFAULT_TEMPERATURE);
    let inv_t = cfg.inv_temperature.unwrap_or(DEFAULT_INV_TEMPERATURE);
    let sim = cosine_similarity(texts, videos)?.with_temperature(tau)?;
    let rerank = |s: SimilarityMatrix| -> Result<SimilarityMatrix> {
        if cfg.inverted_softmax {
            Ok(inverted_softmax(&s, inv_t)?)
        } else {
            Ok(s)
        }
    };
    let inverse = invert_mapping(gt, sim.candidates());
    // matched pairs moved onto the diagonal when the mapping is one-to-one
    let loss = match &inverse {
        Ok(_) => {
            let s = sim.as_matrix();
            let aligned = DMatrix::from_fn(s.nrows(), s.nrows(), |i, j| s[(i, gt[j])]);
            Some(info_nce(&SimilarityMatrix::new(aligned, tau)?)?)
        }
        Err(_) => None,
    };
    let t2v = compute_report(
        &rank_matrix(&rerank(sim.clone())?, gt)?,
        Direction::TextToVideo,
    )?;
    let mut rows = vec![Row {
        condition,
        report: t2v,
        loss,
    }];
    match inverse {
        Ok(inv) => {
            let v2t = compute_report(
                &rank_matrix(&rerank(sim.transpose())?, &inv)?,
                Direction::VideoToText,
            )?;
            rows.push(Row {
                condition,
                report: v2t,
                loss,
            });
        }
        Err(e) => log::warn!("skipping video-to-text: {e}"),
    }
    Ok(rows)
}

pub fn run(args: EvalArgs) -> Result<()> {
    let (mut cfg, base): (EvalConfig, _) = load_config(&args.common, NAME)?;
    for p in [
        &mut cfg.videos,
        &mut cfg.texts,
        &mut cfg.mapping,
        &mut cfg.state,
    ] {
        config::rebase(p, &base);
    }
    cfg.videos = args.videos.clone().or(cfg.videos);
    cfg.texts = args.texts.clone().or(cfg.texts);
    cfg.mapping = args.mapping.clone().or(cfg.mapping);
    cfg.state = args.state.clone().or(cfg.state);
    cfg.inverted_softmax |= args.inverted_softmax;
    cfg.with_emcl |= args.emcl;
    cfg.inv_temperature = args.inv_temperature.or(cfg.inv_temperature);
    cfg.temperature = args.temperature.or(cfg.temperature);
    cfg.recall_ks = args.recall_ks.clone().or(cfg.recall_ks);
    cfg.emcl = cfg.emcl.overlay(&args.emcl_flags.section());

    let videos_path = required(&cfg.videos, "videos")?;
    let texts_path = required(&cfg.texts, "texts")?;
    cfg.videos = Some(videos_path.clone());
    cfg.texts = Some(texts_path.clone());
    canonical(&mut cfg.mapping, "mapping")?;
    canonical(&mut cfg.state, "state")?;
    let ks = cfg.recall_ks.clone().unwrap_or_else(|| vec![1, 5, 10]);
    if let Some(k) = ks.iter().find(|k| !RECALL_KS.contains(k)) {
        return Err(CliError::Config(format!(
            "recall cut-off {k} is not one of {RECALL_KS:?}"
        )));
    }
    cfg.recall_ks = Some(ks.clone());
    cfg.inv_temperature = Some(cfg.inv_temperature.unwrap_or(DEFAULT_INV_TEMPERATURE));
    cfg.temperature = Some(cfg.temperature.unwrap_or(DEFAULT_TEMPERATURE));
    let emcl = if cfg.with_emcl {
        let mut defaults = EmclConfig::default();
        if let (Some(p), None) = (&cfg.state, cfg.emcl.alpha) {
            defaults.alpha = read_state_alpha(p)?;
        }
        let e = cfg.emcl.resolve(defaults);
        e.validate()?;
        cfg.emcl = EmclSection::from_config(&e);
        Some(e)
    } else {
        None
    };

    let out_dir = args.common.output_dir;
    let mut rec = Recorder::new(NAME, config::echo(NAME, &cfg));
    let videos = load_features(&mut rec, "videos", &videos_path)?;
    let texts = load_features(&mut rec, "texts", &texts_path)?;
    if videos.cols() != texts.cols() {
        return Err(CliError::Shape(format!(
            "videos have {} features but texts have {}",
            videos.cols(),
            texts.cols()
        )));
    }
    let gt = match &cfg.mapping {
        Some(p) => {
            let bytes = crate::fsio::read(p)?;
            rec.input("mapping", p, &bytes);
            let gt = embedding::read_mapping(p, videos.rows())?;
            if gt.len() != texts.rows() {
                return Err(CliError::Shape(format!(
                    "mapping has {} entries for {} text queries",
                    gt.len(),
                    texts.rows()
                )));
            }
            gt
        }
        None if texts.rows() == videos.rows() => (0..texts.rows()).collect(),
        None => {
            return Err(CliError::Config(format!(
                "{} texts and {} videos need an explicit --mapping",
                texts.rows(),
                videos.rows()
            )))
        }
    };
    rec.rows(RowRanges::split(videos.rows(), texts.rows()));
    rec.lap("load");

    let mut rows = evaluate(&texts, &videos, &gt, &cfg, "raw")?;
    if let Some(e) = &emcl {
        let x = FeatureMatrix::vstack(&videos, &texts)?;
        let state = initial_state(&mut rec, cfg.state.as_deref(), e, x.rows(), true)?;
        let out = emcl_iterate(&x, &state, e)?;
        let blended = apply_residual(&x, &out.reconstructed, e.beta)?;
        let v = blended.slice_rows(0, videos.rows())?;
        let t = blended.slice_rows(videos.rows(), x.rows())?;
        rows.extend(evaluate(&t, &v, &gt, &cfg, "emcl")?);
    }
    rec.lap("compute");

    let mut header = strings(&["condition", "direction", "inverted_softmax", "queries"]);
    header.extend(RECALL_KS.iter().map(|k| format!("r{k}")));
    header.extend(strings(&["median_rank", "info_nce"]));
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut c = vec![
                r.condition.to_string(),
                r.report.direction.to_string(),
                cfg.inverted_softmax.to_string(),
                r.report.queries.to_string(),
            ];
            c.extend(
                RECALL_KS
                    .iter()
                    .map(|&k| num(r.report.recall_at(k).expect("all cut-offs"))),
            );
            c.push(num(r.report.median_rank));
            c.push(r.loss.map(num).unwrap_or_default());
            c
        })
        .collect();
    rec.output(
        &out_dir,
        "retrieval.csv",
        "report",
        &csv_bytes(&header, &cells)?,
    )?;
    rec.lap("write");
    rec.finish(&out_dir)?;

    let mut line = format!("{:<9} {:<14}", "condition", "direction");
    for k in &ks {
        line += &format!(" {:>7}", format!("R@{k}"));
    }
    println!("{line} {:>7}", "MdR");
    for r in &rows {
        let mut line = format!("{:<9} {:<14}", r.condition, r.report.direction);
        for &k in &ks {
            line += &format!(
                " {:>7.1}",
                r.report.recall_at(k).expect("validated cut-off")
            );
        }
        println!("{line} {:>7.1}", r.report.median_rank);
    }
    Ok(())
}
