use nalgebra::{DMatrix, Matrix2, Matrix3x2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{od_to_rgb, rgb_to_od, ImagePrepError, Result, RgbImage};
use crate::util::percentile_sorted;

/// Minimum number of pixels above the OD floor.
const MIN_PIXELS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StainParams {
    /// Angular percentile in (0, 50).
    pub alpha: f64,
    /// OD norm floor for stain estimation.
    pub beta: f64,
}

impl Default for StainParams {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 0.15 }
    }
}

/// Two unit stain directions in OD space (hematoxylin first) and their
/// 99th-percentile concentrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StainProfile {
    pub stain_vectors: [[f64; 3]; 2],
    pub max_concentrations: [f64; 2],
}

/// Conventional H&E reference.
pub const REFERENCE_PROFILE: StainProfile = StainProfile {
    stain_vectors: [[0.5626, 0.7201, 0.4062], [0.2159, 0.8012, 0.5581]],
    max_concentrations: [1.9705, 1.0308],
};

impl Default for StainProfile {
    fn default() -> Self {
        REFERENCE_PROFILE
    }
}

impl StainProfile {
    /// Builds a profile from arbitrary (non-unit) directions.
    pub fn from_directions(h: [f64; 3], e: [f64; 3], max_concentrations: [f64; 2]) -> Result<Self> {
        let unit = |v: [f64; 3]| {
            let n = Vector3::from(v).norm();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let p = Self { stain_vectors: [unit(h), unit(e)], max_concentrations };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.stain_vectors.iter().enumerate() {
            let n = Vector3::from(*v).norm();
            if !n.is_finite() || (n - 1.0).abs() > 1e-3 {
                return Err(ImagePrepError::InvalidProfile(format!("stain {i} has norm {n}")));
            }
        }
        let m = self.matrix();
        if (m.transpose() * m).determinant().abs() < 1e-8 {
            return Err(ImagePrepError::InvalidProfile("stain vectors are collinear".into()));
        }
        if self.max_concentrations.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(ImagePrepError::InvalidProfile("max concentrations must be finite and ≥ 0".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3x2<f64> {
        Matrix3x2::from_columns(&[Vector3::from(self.stain_vectors[0]), Vector3::from(self.stain_vectors[1])])
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let p: Self =
            serde_json::from_str(&text).map_err(|e| ImagePrepError::InvalidProfile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile serializes");
        s.push('\n');
        s
    }

    /// Angle in degrees between stain `i` of `self` and of `other`.
    pub fn angle_to(&self, other: &StainProfile, i: usize) -> f64 {
        angle_deg(&self.stain_vectors[i], &other.stain_vectors[i])
    }
}

pub(crate) fn angle_deg(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (a, b) = (Vector3::from(*a), Vector3::from(*b));
    (a.dot(&b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

fn least_squares(m: &Matrix3x2<f64>) -> Matrix2<f64> {
    (m.transpose() * m).try_inverse().expect("profile validated")
}

/// Non-negative least-squares-then-clamped concentrations of every pixel.
fn concentrations(od: &[[f64; 3]], profile: &StainProfile) -> Vec<[f64; 2]> {
    let m = profile.matrix();
    let pinv = least_squares(&m) * m.transpose();
    od.iter()
        .map(|p| {
            let c = pinv * Vector3::from(*p);
            [c[0].max(0.0), c[1].max(0.0)]
        })
        .collect()
}

fn max_concentrations(conc: &[[f64; 2]]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (s, o) in out.iter_mut().enumerate() {
        let mut v: Vec<f64> = conc.iter().map(|c| c[s]).collect();
        v.sort_by(f64::total_cmp);
        *o = percentile_sorted(&v, 99.0);
    }
    out
}

/// Stain directions from the angular extremes of the OD cloud projected
/// onto its top two singular directions.
pub fn estimate_stains(od_pixels: &[[f64; 3]], params: StainParams) -> Result<StainProfile> {
    if !(params.alpha > 0.0 && params.alpha < 50.0) {
        return Err(ImagePrepError::InvalidProfile(format!("alpha {} outside (0, 50)", params.alpha)));
    }
    let tissue: Vec<&[f64; 3]> =
        od_pixels.iter().filter(|p| Vector3::from(**p).norm() > params.beta).collect();
    if tissue.len() < MIN_PIXELS {
        return Err(ImagePrepError::InsufficientTissue { found: tissue.len(), needed: MIN_PIXELS });
    }
    let cloud = DMatrix::from_fn(tissue.len(), 3, |r, c| tissue[r][c]);
    let svd = cloud.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let (s1, s2) = (svd.singular_values[order[0]], svd.singular_values[order[1]]);
    if !(s2 >= 1e-9 * s1) || s1 == 0.0 {
        return Err(ImagePrepError::DegenerateCloud);
    }
    let orient = |row: usize| {
        let v = Vector3::new(v_t[(row, 0)], v_t[(row, 1)], v_t[(row, 2)]);
        if v.sum() < 0.0 {
            -v
        } else {
            v
        }
    };
    let (e1, e2) = (orient(order[0]), orient(order[1]));

    let mut phi: Vec<f64> = tissue
        .iter()
        .map(|p| {
            let p = Vector3::from(**p);
            p.dot(&e2).atan2(p.dot(&e1))
        })
        .collect();
    phi.sort_by(f64::total_cmp);
    let lo = percentile_sorted(&phi, params.alpha);
    let hi = percentile_sorted(&phi, 100.0 - params.alpha);
    let dir = |a: f64| {
        let v = e1 * a.cos() + e2 * a.sin();
        let v = if v.sum() < 0.0 { -v } else { v };
        let v = v.normalize();
        [v[0], v[1], v[2]]
    };
    let (a, b) = (dir(lo), dir(hi));
    // Hematoxylin absorbs more strongly in the red channel.
    let (h, e) = if a[0] >= b[0] { (a, b) } else { (b, a) };
    let mut profile = StainProfile { stain_vectors: [h, e], max_concentrations: [0.0; 2] };
    profile.validate().map_err(|_| ImagePrepError::DegenerateCloud)?;
    profile.max_concentrations = max_concentrations(&concentrations(od_pixels, &profile));
    Ok(profile)
}

pub fn estimate_stains_image(image: &RgbImage, params: StainParams) -> Result<StainProfile> {
    estimate_stains(&rgb_to_od(image), params)
}

/// Re-expresses every pixel under the reference stains, scaling each
/// concentration by the ratio of reference to source maxima.
pub fn normalize_to_reference(image: &RgbImage, source: &StainProfile, reference: &StainProfile) -> Result<RgbImage> {
    source.validate()?;
    reference.validate()?;
    let od = rgb_to_od(image);
    let conc = concentrations(&od, source);
    let scale: [f64; 2] = std::array::from_fn(|s| {
        if source.max_concentrations[s] > 0.0 {
            reference.max_concentrations[s] / source.max_concentrations[s]
        } else {
            1.0
        }
    });
    let r = reference.matrix();
    let pixels = conc
        .iter()
        .map(|c| {
            let out = r * Vector2::new(c[0] * scale[0], c[1] * scale[1]);
            od_to_rgb(&[out[0], out[1], out[2]])
        })
        .collect();
    RgbImage::new(image.width(), image.height(), pixels)
}
