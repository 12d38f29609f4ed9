//! Spatial priors over the quadrant `Q` and quasi-Monte Carlo support.
//!
//! A [`SpatialDensity`] is a normalized probability density over `Q`,
//! pointwise-evaluable and samplable by rejection against its supremum.
//! A [`SobolCloud`] is an area-uniform low-discrepancy point set over `Q`
//! used to evaluate every spatial integral as a weighted sum.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{visibility_interval, AngularInterval, PolarPoint, SceneConfig};
use crate::sobol::sobol_2d;

/// Default per-sample cap on rejection-sampling proposals.
pub const DEFAULT_MAX_REJECTIONS: u32 = 100_000;

/// log2 point count used internally to normalize densities. Matches the
/// default integration cloud so that normalization and downstream integrals
/// share one point set, as with any scheme that evaluates every spatial
/// integral on the same Sobol sequence.
pub const NORMALIZATION_M: u32 = 14;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("sobol log2 point count m={m} outside supported range [8, 22]")]
    SobolMOutOfRange { m: u32 },
    #[error("rejection sampling exceeded {limit} proposals for one draw")]
    RejectionLimit { limit: u32 },
    #[error("density normalizes to {z}, not a usable positive mass over Q")]
    DegenerateDensity { z: f64 },
    #[error("raster grid needs nr*ntheta={expect} values, got {got}")]
    RasterShape { expect: usize, got: usize },
    #[error("raster grid contains a negative or non-finite cell value: {value}")]
    RasterValue { value: f64 },
    #[error("gaussian mixture needs at least one component with positive weight and sigma")]
    BadMixture,
    #[error("polygon mask needs at least 3 vertices")]
    BadPolygon,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// A masked region used by the masked-uniform density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum MaskShape {
    /// Axis-aligned rectangle in Cartesian coordinates.
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Annular sector in polar coordinates.
    AnnularSector {
        r0: f64,
        r1: f64,
        theta0: f64,
        theta1: f64,
    },
    /// Simple polygon in Cartesian coordinates (ray-casting containment).
    Polygon { vertices: Vec<[f64; 2]> },
}

impl MaskShape {
    pub fn contains(&self, p: &PolarPoint) -> bool {
        match self {
            MaskShape::Rect { x0, y0, x1, y1 } => {
                let (x, y) = p.to_cartesian();
                x >= *x0 && x <= *x1 && y >= *y0 && y <= *y1
            }
            MaskShape::AnnularSector {
                r0,
                r1,
                theta0,
                theta1,
            } => p.r >= *r0 && p.r <= *r1 && p.theta >= *theta0 && p.theta <= *theta1,
            MaskShape::Polygon { vertices } => {
                let (x, y) = p.to_cartesian();
                point_in_polygon(x, y, vertices)
            }
        }
    }
}

fn point_in_polygon(x: f64, y: f64, vertices: &[[f64; 2]]) -> bool {
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (vertices[i][0], vertices[i][1]);
        let (xj, yj) = (vertices[j][0], vertices[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Whether masked-uniform shapes delimit the navigable region or cut holes
/// out of it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Uniform over the union of the shapes (intersected with `Q`).
    Include,
    /// Uniform over `Q` minus the union of the shapes.
    #[default]
    Exclude,
}

/// One isotropic Gaussian hotspot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussComponent {
    /// Cartesian center `[x, y]` (meters).
    pub center: [f64; 2],
    /// Isotropic standard deviation (meters).
    pub sigma: f64,
    /// Mixture weight (relative; renormalized with the truncation to `Q`).
    pub weight: f64,
}

/// Density family, mirroring the on-disk `{kind, params}` schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum DensityKind {
    Uniform,
    MaskedUniform {
        shapes: Vec<MaskShape>,
        #[serde(default)]
        mode: MaskMode,
    },
    GaussianMixture { components: Vec<GaussComponent> },
    RasterGrid {
        nr: usize,
        ntheta: usize,
        /// Row-major cell values: `values[i * ntheta + j]` is the cell at
        /// radial row `i`, angular column `j`.
        values: Vec<f64>,
    },
}

/// On-disk density specification: `{kind, params, scene}` plus an optional
/// name used for output files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    #[serde(flatten)]
    pub kind: DensityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

/// A normalized spatial prior over `Q`.
#[derive(Clone, Debug)]
pub struct SpatialDensity {
    kind: DensityKind,
    scene: SceneConfig,
    /// Normalization constant: integral of the unnormalized density over `Q`.
    norm: f64,
    /// Supremum of the normalized density over `Q`.
    sup: f64,
    /// Per-draw proposal cap for rejection sampling.
    max_rejections: u32,
}

impl SpatialDensity {
    /// Builds and normalizes a density over the scene's quadrant. The
    /// normalization constant is evaluated by QMC with `2^16` Sobol points.
    pub fn new(kind: DensityKind, scene: SceneConfig) -> Result<Self, SpatialError> {
        scene.validate()?;
        match &kind {
            DensityKind::GaussianMixture { components } => {
                if components.is_empty()
                    || components.iter().any(|c| c.sigma <= 0.0 || c.weight <= 0.0)
                {
                    return Err(SpatialError::BadMixture);
                }
            }
            DensityKind::RasterGrid { nr, ntheta, values } => {
                if values.len() != nr * ntheta {
                    return Err(SpatialError::RasterShape {
                        expect: nr * ntheta,
                        got: values.len(),
                    });
                }
                if let Some(&v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(SpatialError::RasterValue { value: v });
                }
            }
            DensityKind::MaskedUniform { shapes, .. } => {
                for s in shapes {
                    if let MaskShape::Polygon { vertices } = s {
                        if vertices.len() < 3 {
                            return Err(SpatialError::BadPolygon);
                        }
                    }
                }
            }
            DensityKind::Uniform => {}
        }

        let mut d = Self {
            kind,
            scene,
            norm: 1.0,
            sup: 0.0,
            max_rejections: DEFAULT_MAX_REJECTIONS,
        };
        d.norm = match &d.kind {
            DensityKind::Uniform => scene.quadrant_area(),
            _ => {
                let cloud = SobolCloud::new(&scene, NORMALIZATION_M)?;
                cloud.integrate(|p| d.unnormalized_at(p))
            }
        };
        if !(d.norm.is_finite() && d.norm > 0.0) {
            return Err(SpatialError::DegenerateDensity { z: d.norm });
        }
        d.sup = d.unnormalized_sup() / d.norm;
        Ok(d)
    }

    pub fn from_spec(spec: &DensitySpec, default_scene: &SceneConfig) -> Result<Self, SpatialError> {
        let scene = spec.scene.unwrap_or(*default_scene);
        Self::new(spec.kind.clone(), scene)
    }

    pub fn kind(&self) -> &DensityKind {
        &self.kind
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    /// Supremum of the normalized density over `Q`.
    pub fn sup_bound(&self) -> f64 {
        self.sup
    }

    pub fn set_max_rejections(&mut self, limit: u32) {
        self.max_rejections = limit.max(1);
    }

    fn unnormalized_at(&self, p: &PolarPoint) -> f64 {
        if !p.in_quadrant(&self.scene) {
            return 0.0;
        }
        match &self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::MaskedUniform { shapes, mode } => {
                let in_union = shapes.iter().any(|s| s.contains(p));
                let allowed = match mode {
                    MaskMode::Include => in_union,
                    MaskMode::Exclude => !in_union,
                };
                if allowed {
                    1.0
                } else {
                    0.0
                }
            }
            DensityKind::GaussianMixture { components } => {
                let (x, y) = p.to_cartesian();
                components
                    .iter()
                    .map(|c| {
                        let dx = x - c.center[0];
                        let dy = y - c.center[1];
                        let s2 = c.sigma * c.sigma;
                        c.weight * (-(dx * dx + dy * dy) / (2.0 * s2)).exp()
                            / (2.0 * std::f64::consts::PI * s2)
                    })
                    .sum()
            }
            DensityKind::RasterGrid { nr, ntheta, values } => {
                bilinear_raster(p, &self.scene, *nr, *ntheta, values)
            }
        }
    }

    fn unnormalized_sup(&self) -> f64 {
        match &self.kind {
            DensityKind::Uniform | DensityKind::MaskedUniform { .. } => 1.0,
            DensityKind::GaussianMixture { components } => components
                .iter()
                .map(|c| c.weight / (2.0 * std::f64::consts::PI * c.sigma * c.sigma))
                .sum(),
            DensityKind::RasterGrid { values, .. } => {
                values.iter().cloned().fold(0.0, f64::max)
            }
        }
    }

    /// Normalized density at `p`; zero outside `Q` and in masked-out regions.
    pub fn density_at(&self, p: &PolarPoint) -> f64 {
        self.unnormalized_at(p) / self.norm
    }

    /// Draws `n` i.i.d. points from the density by rejection sampling
    /// against the supremum bound, using the caller's random stream.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<PolarPoint>, SpatialError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.sample_one(rng)?);
        }
        Ok(out)
    }

    /// One rejection-sampled draw.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PolarPoint, SpatialError> {
        for _ in 0..self.max_rejections {
            let p = uniform_point_in_quadrant(&self.scene, rng);
            let u: f64 = rng.gen();
            if u * self.sup <= self.density_at(&p) {
                return Ok(p);
            }
        }
        Err(SpatialError::RejectionLimit {
            limit: self.max_rejections,
        })
    }
}

/// Area-uniform draw from `Q`: `r = sqrt(rho^2 + u (r_max^2 - rho^2))`,
/// `theta = v * pi/2`.
pub fn uniform_point_in_quadrant<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> PolarPoint {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    let r = (cfg.rho * cfg.rho + u * (cfg.r_max * cfg.r_max - cfg.rho * cfg.rho)).sqrt();
    PolarPoint::new(r, v * FRAC_PI_2)
}

/// Bilinear interpolation between cell centers of a polar raster grid,
/// clamped at the grid edges.
fn bilinear_raster(
    p: &PolarPoint,
    scene: &SceneConfig,
    nr: usize,
    ntheta: usize,
    values: &[f64],
) -> f64 {
    let dr = (scene.r_max - scene.rho) / nr as f64;
    let dt = FRAC_PI_2 / ntheta as f64;
    // continuous cell-center coordinates
    let fr = ((p.r - scene.rho) / dr - 0.5).clamp(0.0, nr as f64 - 1.0);
    let ft = (p.theta / dt - 0.5).clamp(0.0, ntheta as f64 - 1.0);
    let i0 = fr.floor() as usize;
    let j0 = ft.floor() as usize;
    let i1 = (i0 + 1).min(nr - 1);
    let j1 = (j0 + 1).min(ntheta - 1);
    let wr = fr - i0 as f64;
    let wt = ft - j0 as f64;
    let v = |i: usize, j: usize| values[i * ntheta + j];
    (1.0 - wr) * ((1.0 - wt) * v(i0, j0) + wt * v(i0, j1))
        + wr * ((1.0 - wt) * v(i1, j0) + wt * v(i1, j1))
}

/// A Sobol point cloud covering `Q` uniformly by area, with per-point
/// quadrature weight `|Q| / |S|` and a cached visibility-interval table.
#[derive(Clone, Debug)]
pub struct SobolCloud {
    points: Vec<PolarPoint>,
    intervals: Vec<AngularInterval>,
    weight: f64,
    scene: SceneConfig,
}

impl SobolCloud {
    fn new(scene: &SceneConfig, m: u32) -> Result<Self, SpatialError> {
        scene.validate()?;
        let raw = sobol_2d(m);
        let rho2 = scene.rho * scene.rho;
        let span = scene.r_max * scene.r_max - rho2;
        let points: Vec<PolarPoint> = raw
            .iter()
            .map(|&(u, v)| PolarPoint::new((rho2 + u * span).sqrt(), v * FRAC_PI_2))
            .collect();
        let intervals = points
            .iter()
            .map(|p| visibility_interval(p, scene).expect("cloud point inside Q"))
            .collect();
        let weight = scene.quadrant_area() / points.len() as f64;
        Ok(Self {
            points,
            intervals,
            weight,
            scene: *scene,
        })
    }

    pub fn points(&self) -> &[PolarPoint] {
        &self.points
    }

    /// Cached visibility interval of `points()[i]`.
    pub fn intervals(&self) -> &[AngularInterval] {
        &self.intervals
    }

    /// Quadrature weight `|Q| / |S|`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn scene(&self) -> &SceneConfig {
        &self.scene
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(|Q|/|S|) * sum_i f(x_i)`.
    pub fn integrate<F: Fn(&PolarPoint) -> f64>(&self, f: F) -> f64 {
        self.weight * self.points.iter().map(|p| f(p)).sum::<f64>()
    }
}

/// Builds a `2^m`-point Sobol cloud over the scene's quadrant, `m` in `[8, 22]`.
pub fn build_sobol_cloud(cfg: &SceneConfig, m: u32) -> Result<SobolCloud, SpatialError> {
    if !(8..=22).contains(&m) {
        return Err(SpatialError::SobolMOutOfRange { m });
    }
    SobolCloud::new(cfg, m)
}

/// QMC estimate of the integral of `f` over `Q`.
pub fn qmc_integrate<F: Fn(&PolarPoint) -> f64>(cloud: &SobolCloud, f: F) -> f64 {
    cloud.integrate(f)
}

/// The shipped five-density suite: three binary masked-uniform layouts (one
/// convex, two non-convex) and two truncated-Gaussian hotspot mixtures, all
/// over the `rho = 0.25 m`, `r_max = 14.5 m` scene.
pub fn canonical_suite() -> (SceneConfig, Vec<DensitySpec>) {
    let scene = SceneConfig::new(0.25, 14.5).expect("valid canonical scene");
    let named = |name: &str, kind: DensityKind| DensitySpec {
        kind,
        scene: None,
        name: Some(name.to_string()),
    };
    let densities = vec![
        named(
            "diagonal_band",
            DensityKind::MaskedUniform {
                shapes: vec![MaskShape::Polygon {
                    vertices: vec![[0.5, 10.0], [10.0, 0.5], [10.25, 10.25]],
                }],
                mode: MaskMode::Include,
            },
        ),
        named(
            "l_blocks",
            DensityKind::MaskedUniform {
                shapes: vec![
                    MaskShape::Rect {
                        x0: 5.0,
                        y0: 1.5,
                        x1: 14.5,
                        y1: 5.0,
                    },
                    MaskShape::Rect {
                        x0: 5.0,
                        y0: 1.5,
                        x1: 9.0,
                        y1: 14.5,
                    },
                ],
                mode: MaskMode::Include,
            },
        ),
        named(
            "ring_gap",
            DensityKind::MaskedUniform {
                shapes: vec![
                    MaskShape::AnnularSector {
                        r0: 5.5,
                        r1: 11.5,
                        theta0: 0.10,
                        theta1: 0.70,
                    },
                    MaskShape::AnnularSector {
                        r0: 5.5,
                        r1: 11.5,
                        theta0: 0.90,
                        theta1: 1.45,
                    },
                ],
                mode: MaskMode::Include,
            },
        ),
        named(
            "hotspots_two",
            DensityKind::GaussianMixture {
                components: vec![
                    GaussComponent {
                        center: [4.0, 7.0],
                        sigma: 1.6,
                        weight: 0.55,
                    },
                    GaussComponent {
                        center: [9.0, 3.0],
                        sigma: 1.8,
                        weight: 0.45,
                    },
                ],
            },
        ),
        named(
            "hotspots_three",
            DensityKind::GaussianMixture {
                components: vec![
                    GaussComponent {
                        center: [4.0, 10.0],
                        sigma: 1.2,
                        weight: 0.40,
                    },
                    GaussComponent {
                        center: [10.0, 6.0],
                        sigma: 1.4,
                        weight: 0.35,
                    },
                    GaussComponent {
                        center: [12.0, 2.0],
                        sigma: 1.2,
                        weight: 0.25,
                    },
                ],
            },
        ),
    ];
    (scene, densities)
}
