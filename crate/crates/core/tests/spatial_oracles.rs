//! Statistical oracles for the samplers and serialization checks for the
//! density specifications.

mod common;

use common::*;
use crowdest_core::spatial::NORMALIZATION_M;
use crowdest_core::*;
use serde_json::Value;

#[test]
fn uniform_sampler_passes_a_stratified_chi_square_fit() {
    let cfg = scene();
    let d = SpatialDensity::new(DensityKind::Uniform, cfg).unwrap();
    let mut r = rng(31);
    let n = 50_000usize;
    let (rb, tb) = (4usize, 4usize);
    let mut bins = vec![0usize; rb * tb];
    let span = cfg.r_max * cfg.r_max - cfg.rho * cfg.rho;
    for p in d.sample(n, &mut r).unwrap() {
        // Equal-area radial strata: the squared radius is uniform on its span.
        let i = (((p.r * p.r - cfg.rho * cfg.rho) / span * rb as f64) as usize).min(rb - 1);
        let j = ((p.theta / std::f64::consts::FRAC_PI_2 * tb as f64) as usize).min(tb - 1);
        bins[i * tb + j] += 1;
    }
    let expect = n as f64 / (rb * tb) as f64;
    let chi2: f64 = bins
        .iter()
        .map(|&c| (c as f64 - expect).powi(2) / expect)
        .sum();
    // 15 degrees of freedom; 37.7 is the p = 0.001 critical value.
    assert!(chi2 < 37.7, "chi2 = {chi2}");
}

#[test]
fn masked_samples_stay_inside_the_mask() {
    let (cfg, specs) = canonical_suite();
    for spec in specs.iter().take(3) {
        let d = SpatialDensity::from_spec(spec, &cfg).unwrap();
        let mut r = rng(32);
        for p in d.sample(10_000, &mut r).unwrap() {
            assert!(p.in_quadrant(&cfg));
            assert!(
                d.density_at(&p) > 0.0,
                "{}: sample at ({:.3},{:.3}) has zero density",
                spec.name.as_deref().unwrap(),
                p.r,
                p.theta
            );
        }
    }
}

#[test]
fn mixture_sample_moments_match_quadrature() {
    let (cfg, specs) = canonical_suite();
    let spec = &specs[3]; // hotspots_two
    let d = SpatialDensity::from_spec(spec, &cfg).unwrap();
    let cloud = build_sobol_cloud(&cfg, 16).unwrap();
    let qx = qmc_integrate(&cloud, |p| p.to_cartesian().0 * d.density_at(p));
    let qy = qmc_integrate(&cloud, |p| p.to_cartesian().1 * d.density_at(p));
    let mut r = rng(33);
    let n = 200_000usize;
    let draws = d.sample(n, &mut r).unwrap();
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in &draws {
        let (x, y) = p.to_cartesian();
        sx += x;
        sy += y;
    }
    let (mx, my) = (sx / n as f64, sy / n as f64);
    // Sample standard error is below 0.01 m; allow quadrature error on top.
    assert!((mx - qx).abs() < 0.05, "mean x {mx} vs quadrature {qx}");
    assert!((my - qy).abs() < 0.05, "mean y {my} vs quadrature {qy}");
}

#[test]
fn every_density_kind_round_trips_through_json() {
    let (cfg, specs) = canonical_suite();
    for spec in &specs {
        let text = serde_json::to_string(spec).unwrap();
        let back: DensitySpec = serde_json::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
        // The round-tripped spec must build an identical density.
        let a = SpatialDensity::from_spec(spec, &cfg).unwrap();
        let b = SpatialDensity::from_spec(&back, &cfg).unwrap();
        let probe = PolarPoint::new(7.0, 0.8);
        assert_eq!(a.density_at(&probe), b.density_at(&probe));
    }
}

#[test]
fn shipped_configs_match_the_built_in_suite() {
    let (cfg, specs) = canonical_suite();
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../configs/canonical.json"
    ))
    .unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let file_scene: SceneConfig = serde_json::from_value(v["scene"].clone()).unwrap();
    assert_eq!(file_scene.rho, cfg.rho);
    assert_eq!(file_scene.r_max, cfg.r_max);
    let file_specs: Vec<DensitySpec> = serde_json::from_value(v["densities"].clone()).unwrap();
    assert_eq!(file_specs.len(), specs.len());
    for (a, b) in file_specs.iter().zip(&specs) {
        assert_eq!(
            serde_json::to_value(a).unwrap(),
            serde_json::to_value(b).unwrap()
        );
    }
}

#[test]
fn canonical_densities_normalize_on_a_finer_cloud() {
    let (cfg, specs) = canonical_suite();
    let cloud = build_sobol_cloud(&cfg, NORMALIZATION_M + 2).unwrap();
    for spec in &specs {
        let d = SpatialDensity::from_spec(spec, &cfg).unwrap();
        let mass = qmc_integrate(&cloud, |p| d.density_at(p));
        assert!(
            (mass - 1.0).abs() < 5e-3,
            "{}: mass {mass}",
            spec.name.as_deref().unwrap()
        );
    }
}
