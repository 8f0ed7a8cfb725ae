use emcl::emcl::{apply_residual, emcl_iterate, EmclConfig, FeatureMatrix};

use super::{
    canonical, csv_bytes, initial_state, load_config, load_features, num, read_state_alpha, strings,
};
use crate::cli::RunEmclArgs;
use crate::config::{self, EmclSection, RunEmclConfig};
use crate::embedding::{self, Encoding};
use crate::error::{CliError, Result};
use crate::manifest::{Recorder, RowRanges};

const NAME: &str = "run-emcl";

pub fn run(args: RunEmclArgs) -> Result<()> {
    let (mut cfg, base): (RunEmclConfig, _) = load_config(&args.common, NAME)?;
    for p in [
        &mut cfg.input,
        &mut cfg.videos,
        &mut cfg.texts,
        &mut cfg.state,
    ] {
        config::rebase(p, &base);
    }
    if args.input.is_some() {
        cfg.input = args.input.clone();
        cfg.videos = None;
        cfg.texts = None;
    }
    if args.videos.is_some() {
        cfg.videos = args.videos.clone();
        cfg.texts = args.texts.clone();
        cfg.input = None;
        cfg.video_rows = None;
    }
    cfg.video_rows = args.video_rows.or(cfg.video_rows);
    cfg.state = args.state.clone().or(cfg.state);
    cfg.frozen |= args.frozen;
    if args.binary {
        cfg.encoding = Encoding::Binary;
    }
    cfg.emcl = cfg.emcl.overlay(&args.emcl.section());

    canonical(&mut cfg.input, "input")?;
    canonical(&mut cfg.videos, "videos")?;
    canonical(&mut cfg.texts, "texts")?;
    canonical(&mut cfg.state, "state")?;
    if cfg.input.is_none() && cfg.videos.is_none() {
        return Err(CliError::Config(
            "give --input or --videos with --texts".into(),
        ));
    }
    if cfg.input.is_some() && cfg.videos.is_some() {
        return Err(CliError::Config("--input excludes --videos/--texts".into()));
    }
    if cfg.videos.is_some() != cfg.texts.is_some() {
        return Err(CliError::Config("--videos and --texts go together".into()));
    }

    let mut defaults = EmclConfig::default();
    if let (Some(p), None) = (&cfg.state, cfg.emcl.alpha) {
        defaults.alpha = read_state_alpha(p)?;
    }
    let emcl = cfg.emcl.resolve(defaults);
    emcl.validate()?;
    cfg.emcl = EmclSection::from_config(&emcl);

    let out_dir = args.common.output_dir;
    let mut rec = Recorder::new(NAME, config::echo(NAME, &cfg));
    let (x, rows) = match (&cfg.input, &cfg.videos, &cfg.texts) {
        (Some(p), _, _) => {
            let x = load_features(&mut rec, "input", p)?;
            let v = cfg.video_rows.unwrap_or(x.rows() / 2);
            if v == 0 || v >= x.rows() {
                return Err(CliError::Shape(format!(
                    "video_rows = {v} leaves no rows for one modality of a {}-row batch",
                    x.rows()
                )));
            }
            let rows = RowRanges::split(v, x.rows() - v);
            (x, rows)
        }
        (None, Some(vp), Some(tp)) => {
            let v = load_features(&mut rec, "videos", vp)?;
            let t = load_features(&mut rec, "texts", tp)?;
            if v.cols() != t.cols() {
                return Err(CliError::Shape(format!(
                    "videos have {} features but texts have {}",
                    v.cols(),
                    t.cols()
                )));
            }
            let rows = RowRanges::split(v.rows(), t.rows());
            (FeatureMatrix::vstack(&v, &t)?, rows)
        }
        _ => unreachable!("validated above"),
    };
    rec.rows(rows);
    let state = initial_state(&mut rec, cfg.state.as_deref(), &emcl, x.rows(), cfg.frozen)?;
    rec.lap("load");

    let out = emcl_iterate(&x, &state, &emcl)?;
    let blended = apply_residual(&x, &out.reconstructed, emcl.beta)?;
    log::info!(
        "{} iterations, final lambda change {:.3e}",
        emcl.iters,
        out.lambda_changes.last().copied().unwrap_or(0.0)
    );
    rec.lap("compute");

    let enc = cfg.encoding;
    rec.output(
        &out_dir,
        "emcl_output.emb",
        "blended",
        &embedding::encode(blended.as_matrix(), enc),
    )?;
    rec.output(
        &out_dir,
        "emcl_reconstruction.emb",
        "reconstruction",
        &embedding::encode(out.reconstructed.as_matrix(), enc),
    )?;
    let mut state_json = serde_json::to_string_pretty(&out.state).expect("state serializes");
    state_json.push('\n');
    rec.output(&out_dir, "state.json", "state", state_json.as_bytes())?;
    let trace: Vec<Vec<String>> = out
        .lambda_changes
        .iter()
        .enumerate()
        .map(|(t, d)| vec![(t + 1).to_string(), num(*d)])
        .collect();
    rec.output(
        &out_dir,
        "emcl_trace.csv",
        "trace",
        &csv_bytes(&strings(&["iteration", "lambda_change"]), &trace)?,
    )?;
    rec.lap("write");
    rec.finish(&out_dir)?;
    Ok(())
}
