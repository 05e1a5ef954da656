//! Seeded generators for fixtures, tests and the benchmark.

mod fixtures;

pub use fixtures::{
    synthetic_panel, write_regression_fixture, write_subtype_fixture, write_survival_fixture, RegressionFixture,
    SubtypeFixture, SurvivalFixture,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::expression::ExpressionMatrix;
use crate::features::{aggregate, PatchFeatureSet, SlideFeature};
use crate::imageprep::{od_to_rgb, RgbImage, StainProfile};

/// How targets depend on the slide feature `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMap {
    /// `y_g = b_g + c_g · mean(z)`: a rank-one linear map that a
    /// weight-shared, globally pooled head can represent.
    PooledMean,
    /// `y = b + M z` with dense Gaussian `M` (entries `N(0, 1/F)`).
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionTask {
    pub n_patients: usize,
    pub patches_per_patient: usize,
    pub n_features: usize,
    pub n_genes: usize,
    pub noise_sd: f64,
    pub map: TargetMap,
    pub seed: u64,
}

impl Default for RegressionTask {
    fn default() -> Self {
        Self {
            n_patients: 300,
            patches_per_patient: 100,
            n_features: 64,
            n_genes: 8,
            noise_sd: 0.01,
            map: TargetMap::PooledMean,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub patches: Vec<PatchFeatureSet>,
    pub slides: Vec<SlideFeature>,
    /// Targets, marked as already transformed.
    pub expression: ExpressionMatrix,
    /// Rows of the generating linear map, `G × F`.
    pub map: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
}

pub fn patient_id(i: usize) -> String {
    format!("SYN{i:04}")
}

pub fn gene_symbol(g: usize) -> String {
    format!("GENE{g:03}")
}

/// Patients carry a latent level `μ ~ N(0,1)`, per-feature offsets
/// `u_f = μ + N(0, 0.5²)`, and patches `x_if = u_f + N(0,1)`. Targets are a
/// linear function of the aggregated patch means plus Gaussian noise.
pub fn regression_cohort(task: &RegressionTask) -> SyntheticCohort {
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let std = Normal::new(0.0, 1.0).expect("valid");
    let (f, g) = (task.n_features, task.n_genes);

    let intercepts: Vec<f64> = (0..g).map(|_| 2.0 * std.sample(&mut rng)).collect();
    let map: Vec<Vec<f64>> = match task.map {
        TargetMap::PooledMean => (0..g)
            .map(|_| {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let c = sign * rng.random_range(1.0..2.0);
                vec![c / f as f64; f]
            })
            .collect(),
        TargetMap::Dense => {
            let scale = 1.0 / (f as f64).sqrt();
            (0..g).map(|_| (0..f).map(|_| scale * std.sample(&mut rng)).collect()).collect()
        }
    };

    let noise = Normal::new(0.0, task.noise_sd).expect("valid sd");
    let mut patches = Vec::with_capacity(task.n_patients);
    let mut slides = Vec::with_capacity(task.n_patients);
    let mut values = Vec::with_capacity(task.n_patients);
    for p in 0..task.n_patients {
        let mu = std.sample(&mut rng);
        let offsets: Vec<f64> = (0..f).map(|_| mu + 0.5 * std.sample(&mut rng)).collect();
        let mut raw = Vec::with_capacity(task.patches_per_patient * f);
        for _ in 0..task.patches_per_patient {
            raw.extend(offsets.iter().map(|u| (u + std.sample(&mut rng)) as f32));
        }
        let set = PatchFeatureSet::new(patient_id(p), "synthetic", task.patches_per_patient, f, raw)
            .expect("finite by construction");
        let slide = aggregate(&set);
        let y: Vec<f64> = map
            .iter()
            .zip(&intercepts)
            .map(|(row, b)| b + row.iter().zip(&slide.z).map(|(m, z)| m * z).sum::<f64>() + noise.sample(&mut rng))
            .collect();
        patches.push(set);
        slides.push(slide);
        values.push(y);
    }
    let expression = ExpressionMatrix {
        patient_ids: (0..task.n_patients).map(patient_id).collect(),
        genes: (0..g).map(gene_symbol).collect(),
        values,
        transformed: true,
    };
    SyntheticCohort { patches, slides, expression, map, intercepts }
}

/// An H&E-like image mixing the two stains of `profile`: pixels are
/// hematoxylin-dominant, eosin-dominant, mixed, or background.
pub fn two_stain_image(profile: &StainProfile, width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [h, e] = profile.stain_vectors;
    let [mh, me] = profile.max_concentrations;
    let pixels = (0..width * height)
        .map(|_| {
            let kind: f64 = rng.random();
            let (ch, ce) = if kind < 0.3 {
                (rng.random_range(0.2..1.0) * mh, rng.random_range(0.0..0.02) * me)
            } else if kind < 0.75 {
                (rng.random_range(0.0..0.02) * mh, rng.random_range(0.2..1.0) * me)
            } else if kind < 0.9 {
                (rng.random_range(0.1..0.6) * mh, rng.random_range(0.1..0.6) * me)
            } else {
                (rng.random_range(0.0..0.02), rng.random_range(0.0..0.02))
            };
            od_to_rgb(&[ch * h[0] + ce * e[0], ch * h[1] + ce * e[1], ch * h[2] + ce * e[2]])
        })
        .collect();
    RgbImage::new(width, height, pixels).expect("dimensions match")
}

/// Right-censored exponential survival with one binary covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialCohort {
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    pub x: Vec<f64>,
}

/// Censoring rate giving the requested expected censored fraction when
/// `T ~ Exp(exp(β x))`, `x ~ Bernoulli(1/2)` and `C ~ Exp(μ)`.
pub fn censoring_rate(beta: f64, censor_fraction: f64) -> f64 {
    let frac = |mu: f64| 0.5 * (mu / (1.0 + mu) + mu / (beta.exp() + mu));
    let (mut lo, mut hi) = (0.0, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frac(mid) < censor_fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn exponential_cohort(n: usize, beta: f64, censor_fraction: f64, seed: u64) -> ExponentialCohort {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = censoring_rate(beta, censor_fraction);
    let censor = (mu > 0.0).then(|| Exp::new(mu).expect("positive rate"));
    let mut out = ExponentialCohort { time: vec![], event: vec![], x: vec![] };
    for _ in 0..n {
        let x = if rng.random::<bool>() { 1.0 } else { 0.0 };
        let t = Exp::new((beta * x).exp()).expect("positive rate").sample(&mut rng);
        let c = censor.as_ref().map_or(f64::INFINITY, |d| d.sample(&mut rng));
        out.time.push(t.min(c));
        out.event.push(t <= c);
        out.x.push(x);
    }
    out
}

/// Isotropic Gaussian clusters. Centers are `separation` apart along
/// distinct axes; labels are `0..k`, grouped by class.
#[derive(Debug, Clone, PartialEq)]
pub struct Blobs {
    pub x: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
}

pub fn gaussian_blobs(k: usize, per_class: usize, dims: usize, separation: f64, sd: f64, seed: u64) -> Blobs {
    block_blobs(k, per_class, 1, dims, separation, sd, seed)
}

/// Like [`gaussian_blobs`], but class `c` is raised on its own block of
/// `block` consecutive axes, so every class differs from the others on
/// `2·block` coordinates while centers stay `separation` apart.
pub fn block_blobs(k: usize, per_class: usize, block: usize, dims: usize, separation: f64, sd: f64, seed: u64) -> Blobs {
    assert!(block >= 1 && dims >= k * block, "need one block of axes per class");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sd).expect("valid sd");
    let level = separation / (2.0 * block as f64).sqrt();
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..dims).map(|d| if d / block == c { level } else { 0.0 }).collect())
        .collect();
    let mut x = Vec::with_capacity(k * per_class);
    let mut labels = Vec::with_capacity(k * per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            x.push(center.iter().map(|m| m + noise.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    Blobs { x, labels, centers }
}
