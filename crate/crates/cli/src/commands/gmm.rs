use emcl::gmm::gmm_fit;

use super::{csv_bytes, load_config, load_features, num, required, strings};
use crate::cli::GmmArgs;
use crate::config::{self, GmmCheckConfig};
use crate::error::Result;
use crate::manifest::Recorder;

const NAME: &str = "gmm-check";

pub fn run(args: GmmArgs) -> Result<()> {
    let (mut cfg, base): (GmmCheckConfig, _) = load_config(&args.common, NAME)?;
    config::rebase(&mut cfg.data, &base);
    cfg.data = args.data.clone().or(cfg.data);
    let data_path = required(&cfg.data, "data")?;
    cfg.data = Some(data_path.clone());
    let k = args.k.or(cfg.k).unwrap_or(2);
    let iters = args.iters.or(cfg.iters).unwrap_or(50);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    (cfg.k, cfg.iters, cfg.seed) = (Some(k), Some(iters), Some(seed));

    let out_dir = args.common.output_dir;
    let mut rec = Recorder::new(NAME, config::echo(NAME, &cfg));
    let data = load_features(&mut rec, "data", &data_path)?;
    rec.lap("load");
    let fit = gmm_fit(&data, k, iters, seed)?;
    rec.lap("compute");

    let trace: Vec<Vec<String>> = fit
        .log_likelihood
        .iter()
        .enumerate()
        .map(|(t, ll)| vec![(t + 1).to_string(), num(*ll)])
        .collect();
    rec.output(
        &out_dir,
        "gmm_trace.csv",
        "trace",
        &csv_bytes(&strings(&["iteration", "log_likelihood"]), &trace)?,
    )?;
    let dim = data.cols();
    let mut header = strings(&["component", "weight"]);
    header.extend((0..dim).map(|j| format!("mean{j}")));
    header.extend((0..dim).map(|j| format!("var{j}")));
    let p = &fit.params;
    let params: Vec<Vec<String>> = (0..p.k())
        .map(|c| {
            let mut row = vec![c.to_string(), num(p.weights[c])];
            row.extend(p.means[c].iter().map(|v| num(*v)));
            row.extend(p.variances[c].iter().map(|v| num(*v)));
            row
        })
        .collect();
    rec.output(
        &out_dir,
        "gmm_params.csv",
        "params",
        &csv_bytes(&header, &params)?,
    )?;
    rec.lap("write");
    rec.finish(&out_dir)?;

    let monotone = fit.log_likelihood.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    println!(
        "final log-likelihood {:.6} after {iters} iterations (monotone: {monotone})",
        fit.log_likelihood.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}
