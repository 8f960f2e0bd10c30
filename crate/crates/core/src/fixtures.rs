//! Synthetic stand-ins for the image collections: cluttered PNG scenes with
//! a small target glyph, and clustered descriptor matrices with a known
//! relevant subset.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{write_json, FeatureMatrix};
use crate::error::{Error, Result};
use crate::planner::{fisher_yates, rng_from_seed};

pub const N_EXAMPLE_IMAGES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlyphSpec {
    pub min_radius: u32,
    pub max_radius: u32,
    /// Ring thickness as a fraction of the outer radius.
    pub thickness: f64,
    pub color: [u8; 3],
}

impl Default for GlyphSpec {
    fn default() -> Self {
        Self {
            min_radius: 5,
            max_radius: 11,
            thickness: 0.35,
            color: [230, 30, 40],
        }
    }
}

/// Inclusive pixel bounding box `[x0, y0, x1, y1]`.
pub type BBox = [u32; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlyphPlacement {
    pub cx: u32,
    pub cy: u32,
    pub radius: u32,
}

impl GlyphPlacement {
    pub fn bbox(&self) -> BBox {
        [
            self.cx - self.radius,
            self.cy - self.radius,
            self.cx + self.radius,
            self.cy + self.radius,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image_id: String,
    pub is_target: bool,
    pub glyph_bbox: Option<BBox>,
    /// Seed of the scene clutter.
    pub scene_seed: u64,
}

impl ImageEntry {
    pub fn glyph(&self) -> Option<GlyphPlacement> {
        self.glyph_bbox.map(|[x0, y0, x1, _]| GlyphPlacement {
            cx: (x0 + x1) / 2,
            cy: y0 + (x1 - x0) / 2,
            radius: (x1 - x0) / 2,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageManifest {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub glyph: GlyphSpec,
    pub example_ids: Vec<String>,
    pub images: Vec<ImageEntry>,
}

impl ImageManifest {
    pub fn target_ids(&self) -> Vec<String> {
        self.images.iter().filter(|i| i.is_target).map(|i| i.image_id.clone()).collect()
    }

    pub fn distractor_ids(&self) -> Vec<String> {
        self.images.iter().filter(|i| !i.is_target).map(|i| i.image_id.clone()).collect()
    }
}

/// Uniform ring placement that keeps the whole ring inside the frame.
pub fn place_glyph<R: Rng>(rng: &mut R, width: u32, height: u32, glyph: &GlyphSpec) -> Result<GlyphPlacement> {
    if glyph.min_radius == 0 || glyph.min_radius > glyph.max_radius {
        return Err(Error::Precondition("glyph radius range is empty".into()));
    }
    if 2 * glyph.max_radius + 1 > width.min(height) {
        return Err(Error::Precondition(format!(
            "glyph of radius {} does not fit a {width}x{height} image",
            glyph.max_radius
        )));
    }
    let radius = rng.random_range(glyph.min_radius..=glyph.max_radius);
    Ok(GlyphPlacement {
        cx: rng.random_range(radius..width - radius),
        cy: rng.random_range(radius..height - radius),
        radius,
    })
}

/// Manifest for `n` images of which `n_targets` carry the glyph. Pure: no
/// files are touched.
pub fn plan_image_set(
    n: usize,
    n_targets: usize,
    width: u32,
    height: u32,
    glyph: &GlyphSpec,
    seed: u64,
) -> Result<ImageManifest> {
    if n_targets > n {
        return Err(Error::Precondition(format!("{n_targets} targets requested from {n} images")));
    }
    let mut rng = rng_from_seed(seed);
    let mut flags: Vec<bool> = (0..n).map(|i| i < n_targets).collect();
    fisher_yates(&mut flags, &mut rng);
    let mut images = Vec::with_capacity(n);
    for (i, is_target) in flags.into_iter().enumerate() {
        let placement = if is_target {
            Some(place_glyph(&mut rng, width, height, glyph)?)
        } else {
            None
        };
        images.push(ImageEntry {
            image_id: format!("img{i:04}"),
            is_target,
            glyph_bbox: placement.map(|p| p.bbox()),
            scene_seed: rng.random(),
        });
    }
    Ok(ImageManifest {
        seed,
        width,
        height,
        glyph: glyph.clone(),
        example_ids: (0..N_EXAMPLE_IMAGES).map(|i| format!("example{i}")).collect(),
        images,
    })
}

fn fill_disc(img: &mut RgbImage, cx: f64, cy: f64, r_out: f64, r_in: f64, color: Rgb<u8>) {
    let (w, h) = img.dimensions();
    let x0 = (cx - r_out).floor().max(0.0) as u32;
    let y0 = (cy - r_out).floor().max(0.0) as u32;
    let x1 = ((cx + r_out).ceil() as u32).min(w - 1);
    let y1 = ((cy + r_out).ceil() as u32).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            if d2 <= r_out * r_out && d2 >= r_in * r_in {
                img.put_pixel(x, y, color);
            }
        }
    }
}

fn random_color<R: Rng>(rng: &mut R) -> Rgb<u8> {
    Rgb([rng.random(), rng.random(), rng.random()])
}

/// Draws the scene for one manifest entry.
pub fn render_image(entry: &ImageEntry, width: u32, height: u32, glyph: &GlyphSpec) -> RgbImage {
    let mut rng = rng_from_seed(entry.scene_seed);
    let (top, bottom) = (random_color(&mut rng), random_color(&mut rng));
    let mut img = RgbImage::from_fn(width, height, |_, y| {
        let f = y as f64 / height.max(1) as f64;
        Rgb(std::array::from_fn(|c| (top[c] as f64 * (1.0 - f) + bottom[c] as f64 * f) as u8))
    });
    let n_shapes = rng.random_range(18..36);
    for _ in 0..n_shapes {
        let color = random_color(&mut rng);
        let cx = rng.random_range(0.0..width as f64);
        let cy = rng.random_range(0.0..height as f64);
        match rng.random_range(0..3) {
            0 => {
                let (hw, hh) = (rng.random_range(2.0..width as f64 / 5.0), rng.random_range(2.0..height as f64 / 5.0));
                for y in (cy - hh).max(0.0) as u32..((cy + hh) as u32).min(height) {
                    for x in (cx - hw).max(0.0) as u32..((cx + hw) as u32).min(width) {
                        img.put_pixel(x, y, color);
                    }
                }
            }
            1 => fill_disc(&mut img, cx, cy, rng.random_range(2.0..height as f64 / 6.0), 0.0, color),
            _ => {
                let (dx, dy) = (rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
                for s in 0..=80 {
                    let f = s as f64 / 80.0;
                    let (x, y) = (cx + dx * f, cy + dy * f);
                    if x >= 0.0 && y >= 0.0 && (x as u32) < width && (y as u32) < height {
                        img.put_pixel(x as u32, y as u32, color);
                    }
                }
            }
        }
    }
    if let Some(p) = entry.glyph() {
        let r = p.radius as f64;
        fill_disc(&mut img, p.cx as f64, p.cy as f64, r, r * (1.0 - glyph.thickness), Rgb(glyph.color));
    }
    img
}

/// Writes `<id>.png` for every image plus the example images and
/// `manifest.json` into `out_dir`.
pub fn gen_images(
    n: usize,
    n_targets: usize,
    glyph: &GlyphSpec,
    seed: u64,
    out_dir: &Path,
) -> Result<ImageManifest> {
    let (width, height) = (160, 120);
    let manifest = plan_image_set(n, n_targets, width, height, glyph, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = rng_from_seed(seed ^ 0xE8A4_B1E5);
    let examples = manifest.example_ids.iter().map(|id| -> Result<ImageEntry> {
        let placement = place_glyph(&mut rng, width, height, glyph)?;
        Ok(ImageEntry {
            image_id: id.clone(),
            is_target: true,
            glyph_bbox: Some(placement.bbox()),
            scene_seed: rng.random(),
        })
    });
    let examples: Vec<ImageEntry> = examples.collect::<Result<_>>()?;
    for entry in manifest.images.iter().chain(&examples) {
        let path = out_dir.join(format!("{}.png", entry.image_id));
        render_image(entry, width, height, glyph)
            .save(&path)
            .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    }
    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Descriptor matrices

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureSetSpec {
    pub n: usize,
    pub d: usize,
    pub n_relevant: usize,
    pub n_clusters: usize,
    /// Distance from the relevant centre to every distractor centre, in
    /// units of `noise_sd`.
    pub separation: f64,
    /// Share of each distractor offset along one common axis; the rest
    /// points in a cluster-specific orthogonal direction. 1 puts every
    /// cluster on the same side, 0 scatters them around the relevant centre.
    pub axis_weight: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for FeatureSetSpec {
    fn default() -> Self {
        Self {
            n: 5000,
            d: 128,
            n_relevant: 250,
            n_clusters: 4,
            separation: 10.0,
            axis_weight: 0.9,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub relevant: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FeatureSet {
    /// `is_target` marks the relevant rows.
    pub matrix: FeatureMatrix,
    pub truth: GroundTruth,
}

fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// Relevant rows scatter around one centre; distractors around
/// `n_clusters` centres placed at exactly `separation * noise_sd` from it.
/// Distractor centres share a common direction (weighted by `axis_weight`),
/// so the relevant cluster is linearly separable for large separations,
/// and at separation 0 every row comes from the same distribution.
pub fn gen_feature_set(spec: &FeatureSetSpec) -> Result<FeatureSet> {
    if spec.d < 2 {
        return Err(Error::Precondition(format!("feature sets need d >= 2, got {}", spec.d)));
    }
    if spec.n_relevant > spec.n || spec.n_clusters == 0 {
        return Err(Error::Precondition("invalid relevant/cluster counts".into()));
    }
    if !(spec.noise_sd > 0.0 && spec.separation >= 0.0) {
        return Err(Error::Precondition("noise_sd must be positive and separation non-negative".into()));
    }
    if !(0.0..=1.0).contains(&spec.axis_weight) {
        return Err(Error::Precondition(format!("axis_weight must lie in [0, 1], got {}", spec.axis_weight)));
    }
    let mut rng = rng_from_seed(spec.seed);
    let d = spec.d;
    let relevant_centre: Vec<f64> = (0..d)
        .map(|_| 3.0 * spec.noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let axis = unit_vector(&mut rng, d);
    let radius = spec.separation * spec.noise_sd;
    let (w_axis, w_own) = (spec.axis_weight, (1.0 - spec.axis_weight.powi(2)).sqrt());
    let centres: Vec<Vec<f64>> = (0..spec.n_clusters)
        .map(|_| {
            let mut r = unit_vector(&mut rng, d);
            let along: f64 = r.iter().zip(&axis).map(|(a, b)| a * b).sum();
            r.iter_mut().zip(&axis).for_each(|(x, a)| *x -= along * a);
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            relevant_centre
                .iter()
                .zip(axis.iter().zip(&r))
                .map(|(c, (a, o))| c + radius * (w_axis * a + w_own * o / norm))
                .collect()
        })
        .collect();

    let mut assignment: Vec<Option<usize>> = (0..spec.n)
        .map(|i| (i >= spec.n_relevant).then(|| (i - spec.n_relevant) % spec.n_clusters))
        .collect();
    fisher_yates(&mut assignment, &mut rng);

    let mut data = Array2::zeros((spec.n, d));
    for (mut row, a) in data.rows_mut().into_iter().zip(&assignment) {
        let centre = a.map_or(&relevant_centre, |k| &centres[k]);
        for (x, c) in row.iter_mut().zip(centre) {
            let noise: f64 = StandardNormal.sample(&mut rng);
            *x = (c + spec.noise_sd * noise) as f32 as f64;
        }
    }
    let ids: Vec<String> = (0..spec.n).map(|i| format!("f{i:05}")).collect();
    let labels: Vec<bool> = assignment.iter().map(Option::is_none).collect();
    let relevant = ids.iter().zip(&labels).filter(|(_, &l)| l).map(|(id, _)| id.clone()).collect();
    Ok(FeatureSet {
        matrix: FeatureMatrix::new(ids, Some(labels), data)?,
        truth: GroundTruth { relevant },
    })
}
