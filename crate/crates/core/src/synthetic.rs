//! Labeled synthetic cross-modal batches and the diagnostics used to study
//! what the EM projection does to them.
//!
//! Every sample is generated in a latent frame: the first `signal_dim`
//! coordinates carry a class center plus isotropic spread, the remaining
//! coordinates are redundant Gaussian noise. The second modality is shifted
//! along the first redundant axis by `modality_offset`. A seeded random
//! rotation then maps the latent frame into ambient coordinates, so class
//! information is spread over many coding bits.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::emcl::{emcl_iterate_observed, reconstruct, EmclConfig, FeatureMatrix, InitialState};
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, thin_svd, RANK_REL_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    /// Samples per class per modality.
    pub per_class: usize,
    pub ambient_dim: usize,
    pub signal_dim: usize,
    /// Distance between any two class centers.
    pub class_separation: f64,
    /// Standard deviation of the within-class spread in the signal subspace.
    pub signal_noise: f64,
    /// Standard deviation of the redundant-dimension noise.
    pub noise_sigma: f64,
    /// Shift applied to every text-modality row.
    pub modality_offset: f64,
    /// Rotate the latent frame into ambient coordinates.
    pub random_rotation: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    /// Three semantic centers in a 3-D signal subspace with 13 redundant
    /// noise dimensions.
    fn default() -> Self {
        Self {
            num_classes: 3,
            per_class: 40,
            ambient_dim: 16,
            signal_dim: 3,
            class_separation: 4.0,
            signal_noise: 0.2,
            noise_sigma: 0.3,
            modality_offset: 0.5,
            random_rotation: true,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.num_classes == 0 || self.per_class == 0 {
            return bad("num_classes and per_class must be >= 1".into());
        }
        if self.signal_dim == 0 || self.signal_dim > self.ambient_dim {
            return bad(format!(
                "signal_dim must lie in 1..={}, got {}",
                self.ambient_dim, self.signal_dim
            ));
        }
        if self.num_classes > self.signal_dim {
            return bad(format!(
                "{} class centers need signal_dim >= {}",
                self.num_classes, self.num_classes
            ));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return bad("class_separation must be positive".into());
        }
        for (name, v) in [
            ("signal_noise", self.signal_noise),
            ("noise_sigma", self.noise_sigma),
            ("modality_offset", self.modality_offset),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Video,
    Text,
}

/// Stacked features with per-row class and modality labels. Video rows
/// precede text rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    pub modality: Vec<Modality>,
}

impl LabeledBatch {
    pub fn new(
        features: FeatureMatrix,
        labels: Vec<usize>,
        modality: Vec<Modality>,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n || modality.len() != n {
            return Err(Error::shape("labeled batch labels", n, labels.len()));
        }
        if !modality.contains(&Modality::Video) || !modality.contains(&Modality::Text) {
            return Err(Error::InvalidArgument(
                "batch needs rows from both modalities".into(),
            ));
        }
        Ok(Self {
            features,
            labels,
            modality,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Same labels, different features.
    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.modality.clone())
    }
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    // fix the QR sign ambiguity so the rotation is a function of the draw
    let r = qr.r();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Draws a labeled batch; deterministic given `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledBatch> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (d, s, c) = (spec.ambient_dim, spec.signal_dim, spec.num_classes);
    let rotation = spec.random_rotation.then(|| random_rotation(d, &mut rng));

    let scale = spec.class_separation / std::f64::consts::SQRT_2;
    let centers: Vec<DVector<f64>> = (0..c)
        .map(|k| {
            DVector::from_fn(s, |i, _| {
                let vertex = if i == k { 1.0 } else { 0.0 };
                let centroid = if i < c { 1.0 / c as f64 } else { 0.0 };
                scale * (vertex - centroid)
            })
        })
        .collect();
    let offset_dir = if s < d {
        DVector::from_fn(d, |i, _| if i == s { 1.0 } else { 0.0 })
    } else {
        DVector::from_element(d, 1.0 / (d as f64).sqrt())
    };

    let signal = Normal::new(0.0, spec.signal_noise).expect("validated");
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated");
    let rows = 2 * c * spec.per_class;
    let mut latent = DMatrix::zeros(rows, d);
    let mut labels = Vec::with_capacity(rows);
    let mut modality = Vec::with_capacity(rows);
    let mut r = 0;
    for m in [Modality::Video, Modality::Text] {
        for (class, center) in centers.iter().enumerate() {
            for _ in 0..spec.per_class {
                for i in 0..d {
                    latent[(r, i)] = if i < s {
                        center[i] + signal.sample(&mut rng)
                    } else {
                        noise.sample(&mut rng)
                    };
                }
                if m == Modality::Text {
                    let mut row = latent.row_mut(r);
                    row += offset_dir.transpose() * spec.modality_offset;
                }
                labels.push(class);
                modality.push(m);
                r += 1;
            }
        }
    }
    let features = match rotation {
        Some(q) => latent * q.transpose(),
        None => latent,
    };
    LabeledBatch::new(FeatureMatrix::new(features)?, labels, modality)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassVariance {
    /// Mean over classes of the mean squared distance to the class centroid.
    pub intra: f64,
    /// Mean squared distance over all pairs of class centroids.
    pub inter: f64,
}

impl ClassVariance {
    pub fn ratio(&self) -> f64 {
        self.inter / self.intra
    }
}

/// Within/between class scatter with both modalities pooled per class.
pub fn class_variance(features: &FeatureMatrix, labels: &[usize]) -> Result<ClassVariance> {
    let x = features.as_matrix();
    if labels.len() != x.nrows() {
        return Err(Error::shape("class labels", x.nrows(), labels.len()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(Error::InvalidArgument(
            "variance diagnostics need >= 2 classes".into(),
        ));
    }
    let mut centroids = vec![DVector::<f64>::zeros(x.ncols()); classes];
    let mut counts = vec![0usize; classes];
    for (row, &l) in x.row_iter().zip(labels) {
        centroids[l] += row.transpose();
        counts[l] += 1;
    }
    if let Some(empty) = counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(empty));
    }
    for (c, &n) in centroids.iter_mut().zip(&counts) {
        *c /= n as f64;
    }
    let mut spread = vec![0.0; classes];
    for (row, &l) in x.row_iter().zip(labels) {
        spread[l] += (row.transpose() - &centroids[l]).norm_squared();
    }
    let intra = spread
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s / n as f64)
        .sum::<f64>()
        / classes as f64;
    let mut inter = 0.0;
    let mut pairs = 0usize;
    for a in 0..classes {
        for b in a + 1..classes {
            inter += (&centroids[a] - &centroids[b]).norm_squared();
            pairs += 1;
        }
    }
    Ok(ClassVariance {
        intra,
        inter: inter / pairs as f64,
    })
}

pub fn variance_diagnostics(batch: &LabeledBatch) -> Result<ClassVariance> {
    class_variance(&batch.features, &batch.labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 0 is the raw input.
    pub iteration: usize,
    pub variance: ClassVariance,
    pub numerical_rank: usize,
    /// `‖λ^t − λ^{t−1}‖_F`; absent for the raw input.
    pub lambda_change: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct VarianceTrace {
    pub records: Vec<TraceRecord>,
    /// The reconstruction after the last iteration (the raw input when `T = 0`).
    pub final_features: FeatureMatrix,
}

/// Runs the EM projection from a cold, frozen initial state seeded by
/// `config.seed` and records diagnostics of the reconstruction after every
/// iteration. `config.iters == 0` yields only the raw-input record.
pub fn run_iteration_study(batch: &LabeledBatch, config: &EmclConfig) -> Result<VarianceTrace> {
    config.validate_allow_zero_iters()?;
    let x = &batch.features;
    let mut records = vec![TraceRecord {
        iteration: 0,
        variance: variance_diagnostics(batch)?,
        numerical_rank: numerical_rank(x.as_matrix(), RANK_REL_TOL)?,
        lambda_change: None,
    }];
    if config.iters == 0 {
        return Ok(VarianceTrace {
            records,
            final_features: x.clone(),
        });
    }
    let state = InitialState::cold_start(config.k, x.rows(), config.alpha, config.seed)?.frozen();
    let mut failure = None;
    let out = emcl_iterate_observed(x, &state, config, |view| {
        if failure.is_some() {
            return;
        }
        let step = reconstruct(view.bases, view.responsibilities).and_then(|r| {
            let rank = numerical_rank(r.as_matrix(), RANK_REL_TOL)?;
            Ok((class_variance(&r, &batch.labels)?, rank))
        });
        match step {
            Ok((variance, rank)) => records.push(TraceRecord {
                iteration: view.iteration,
                variance,
                numerical_rank: rank,
                lambda_change: Some(view.lambda_change),
            }),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(VarianceTrace {
        records,
        final_features: out.reconstructed,
    })
}

/// Rank-`k` PCA reconstruction: center, keep the top `k` principal
/// directions, map back and add the mean.
pub fn pca_reconstruct(features: &FeatureMatrix, k: usize) -> Result<FeatureMatrix> {
    let x = features.as_matrix();
    let (n, d) = x.shape();
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "PCA rank {k} must lie in 1..={}",
            n.min(d)
        )));
    }
    let mean = x.row_mean();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let svd = thin_svd(&centered)?;
    let mut out = DMatrix::zeros(n, d);
    for i in 0..k {
        out += svd.u.column(i) * svd.s[i] * svd.v.column(i).transpose();
    }
    for mut row in out.row_iter_mut() {
        row += &mean;
    }
    FeatureMatrix::new(out)
}

pub fn pca_project(batch: &LabeledBatch, k: usize) -> Result<FeatureMatrix> {
    pca_reconstruct(&batch.features, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quiet() -> SyntheticSpec {
        SyntheticSpec {
            signal_noise: 0.0,
            noise_sigma: 0.0,
            per_class: 4,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn noiseless_rows_coincide_within_class_and_modality() {
        let b = generate(&quiet()).unwrap();
        let x = b.features.as_matrix();
        for i in 0..x.nrows() {
            for j in 0..x.nrows() {
                if b.labels[i] == b.labels[j] && b.modality[i] == b.modality[j] {
                    assert_relative_eq!(x.row(i), x.row(j), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn centers_are_equidistant() {
        let spec = SyntheticSpec {
            modality_offset: 0.0,
            ..quiet()
        };
        let v = variance_diagnostics(&generate(&spec).unwrap()).unwrap();
        assert!(v.intra < 1e-20);
        assert_relative_eq!(v.inter, spec.class_separation.powi(2), max_relative = 1e-9);
    }

    #[test]
    fn zero_offset_makes_modalities_identically_distributed() {
        let spec = SyntheticSpec {
            modality_offset: 0.0,
            ..quiet()
        };
        let b = generate(&spec).unwrap();
        let half = b.features.rows() / 2;
        assert_eq!(
            b.features.slice_rows(0, half).unwrap(),
            b.features.slice_rows(half, 2 * half).unwrap()
        );
    }

    #[test]
    fn offset_shifts_text_rows_by_its_magnitude() {
        let b = generate(&quiet()).unwrap();
        let x = b.features.as_matrix();
        let half = x.nrows() / 2;
        let shift = (x.row(half) - x.row(0)).norm();
        assert_relative_eq!(shift, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn generator_is_deterministic() {
        let spec = SyntheticSpec::default();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SyntheticSpec { seed: 1, ..spec };
        assert_ne!(
            generate(&other).unwrap().features,
            generate(&SyntheticSpec::default()).unwrap().features
        );
    }

    #[test]
    fn layout_is_video_then_text() {
        let b = generate(&SyntheticSpec::default()).unwrap();
        assert_eq!(b.features.rows(), 240);
        assert_eq!(b.features.cols(), 16);
        assert!(b.modality[..120].iter().all(|&m| m == Modality::Video));
        assert!(b.modality[120..].iter().all(|&m| m == Modality::Text));
    }

    #[test]
    fn invalid_specs() {
        for spec in [
            SyntheticSpec {
                signal_dim: 17,
                ..SyntheticSpec::default()
            },
            SyntheticSpec {
                num_classes: 4,
                ..SyntheticSpec::default()
            },
            SyntheticSpec {
                class_separation: 0.0,
                ..SyntheticSpec::default()
            },
            SyntheticSpec {
                noise_sigma: -1.0,
                ..SyntheticSpec::default()
            },
        ] {
            assert!(generate(&spec).is_err());
        }
    }

    #[test]
    fn identical_rows_have_no_variance() {
        let f = FeatureMatrix::from_row_slice(4, 2, &[1.0; 8]).unwrap();
        let v = class_variance(&f, &[0, 0, 1, 1]).unwrap();
        assert_eq!((v.intra, v.inter), (0.0, 0.0));
    }

    #[test]
    fn two_tight_classes_at_distance_d() {
        let f =
            FeatureMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 3.0, 4.0, 3.0, 4.0]).unwrap();
        let v = class_variance(&f, &[0, 0, 1, 1]).unwrap();
        assert_eq!(v.intra, 0.0);
        assert_relative_eq!(v.inter, 25.0);
    }

    #[test]
    fn hand_placed_points_match_pairwise_brute_force() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [5.0, 1.0], [5.0, 5.0]];
        let labels = [0, 0, 1, 1];
        let f =
            FeatureMatrix::from_rows(&pts.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        let v = class_variance(&f, &labels).unwrap();

        let sq = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        // mean squared distance to the centroid = (1 / 2n²) Σ_{i,j} ‖x_i − x_j‖²
        let mut intra = 0.0;
        for c in 0..2 {
            let members: Vec<_> = (0..4).filter(|&i| labels[i] == c).map(|i| pts[i]).collect();
            let n = members.len() as f64;
            let mut acc = 0.0;
            for a in &members {
                for b in &members {
                    acc += sq(a, b);
                }
            }
            intra += acc / (2.0 * n * n);
        }
        intra /= 2.0;
        let c0 = [1.0, 0.0];
        let c1 = [5.0, 3.0];
        assert_relative_eq!(v.intra, intra, epsilon = 1e-12);
        assert_relative_eq!(v.inter, sq(&c0, &c1), epsilon = 1e-12);
    }

    #[test]
    fn empty_class_is_an_error() {
        let f = FeatureMatrix::from_row_slice(2, 1, &[0.0, 1.0]).unwrap();
        assert_eq!(class_variance(&f, &[0, 2]), Err(Error::EmptyClass(1)));
        assert!(class_variance(&f, &[0, 0]).is_err());
    }

    #[test]
    fn zero_iterations_trace_only_raw_input() {
        let b = generate(&SyntheticSpec::default()).unwrap();
        let cfg = EmclConfig {
            k: 3,
            iters: 0,
            ..EmclConfig::default()
        };
        let t = run_iteration_study(&b, &cfg).unwrap();
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].lambda_change, None);
        assert_eq!(t.final_features, b.features);
    }

    #[test]
    fn trace_has_one_record_per_iteration_plus_raw() {
        let b = generate(&SyntheticSpec::default()).unwrap();
        let cfg = EmclConfig {
            k: 3,
            ..EmclConfig::default()
        };
        let t = run_iteration_study(&b, &cfg).unwrap();
        assert_eq!(t.records.len(), 10);
        assert!(t.records[1..].iter().all(|r| r.numerical_rank <= 3));
    }

    #[test]
    fn full_rank_pca_is_identity() {
        let f = FeatureMatrix::from_row_slice(3, 2, &[1.0, 2.0, -3.0, 0.5, 4.0, 4.0]).unwrap();
        let r = pca_reconstruct(&f, 2).unwrap();
        assert_relative_eq!(*r.as_matrix(), *f.as_matrix(), epsilon = 1e-12);
    }

    #[test]
    fn rank_one_data_is_recovered() {
        let mut v = Vec::new();
        for t in [-1.0, 0.5, 2.0, 3.5] {
            v.extend([1.0 + 2.0 * t, -1.0 + t, 3.0 * t]);
        }
        let f = FeatureMatrix::from_row_slice(4, 3, &v).unwrap();
        let r = pca_reconstruct(&f, 1).unwrap();
        assert_relative_eq!(*r.as_matrix(), *f.as_matrix(), epsilon = 1e-9);
    }

    #[test]
    fn full_rank_pca_survives_rank_deficient_centering() {
        // three centered rows span only two dimensions
        let v = [
            1.3092394928713849,
            -2.157124890535989,
            2.0298377823869345,
            1.4949550124432607,
            1.8531647325336198,
            -0.5338338206031416,
            0.0615231195554846,
            -1.6848634539910083,
            -2.9650066710504124,
        ];
        let f = FeatureMatrix::from_row_slice(3, 3, &v).unwrap();
        let r = pca_reconstruct(&f, 3).unwrap();
        assert_relative_eq!(*r.as_matrix(), *f.as_matrix(), epsilon = 1e-12);
    }

    #[test]
    fn pca_rank_bounds() {
        let f = FeatureMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!(pca_reconstruct(&f, 0).is_err());
        assert!(pca_reconstruct(&f, 3).is_err());
    }
}
