use evoch_core::forms::{assemble, assemble_mass};
use evoch_core::model2::{rho_h_minus1_norm, seeded_perturbation, stability_pair_run};
use evoch_core::scenario::{RunConfig, Simulation};
use evoch_core::{build_reference_surface, Error, FlowField, FlowPreset, QuadraturePolicy, SurfacePreset, WeightedOperators};

const PAIR: &str = r#"
model = "weighted"
theta = 0.3
T = 0.1
dt = 0.01
[surface]
preset = "unit_sphere"
refinement = 2
[flow]
preset = "breathing_sphere"
[u0]
preset = "harmonic_patch"
mean = 0.0
amplitude = 0.3
degree = 2
"#;

fn pair_config() -> RunConfig {
    RunConfig::from_toml_str(PAIR, std::path::Path::new("pair.toml")).unwrap()
}

fn initial_ops(cfg: &RunConfig) -> WeightedOperators {
    Simulation::new(cfg).unwrap().weighted_operators()
}

#[test]
fn identical_data_stay_identical() {
    let cfg = pair_config();
    let zero = vec![0.0; initial_ops(&cfg).m0.nrows()];
    let series = stability_pair_run(&cfg, &zero).unwrap();
    assert_eq!(series.distances.len(), 11);
    assert!(series.distances.iter().all(|&d| d <= 1e-12), "{:?}", series.distances);
}

#[test]
fn initial_distance_scales_with_the_perturbation() {
    let cfg = pair_config();
    let ops = initial_ops(&cfg);
    let p = seeded_perturbation(&ops, 9, 1e-3).unwrap();
    assert!((rho_h_minus1_norm(&ops, &p).unwrap() - 1e-3).abs() <= 1e-13);
    let mut cfg_short = cfg.clone();
    cfg_short.t_final = 0.0;
    let d1 = stability_pair_run(&cfg_short, &p).unwrap().distances[0];
    for s in [0.5, 3.0] {
        let scaled: Vec<f64> = p.iter().map(|v| s * v).collect();
        let ds = stability_pair_run(&cfg_short, &scaled).unwrap().distances[0];
        assert!((ds / d1 - s).abs() <= 1e-10 * s, "{s}: {ds} vs {d1}");
    }
}

#[test]
fn unequal_means_are_rejected() {
    let cfg = pair_config();
    let n = initial_ops(&cfg).m0.nrows();
    let err = stability_pair_run(&cfg, &vec![1e-3; n]).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
}

#[test]
fn distance_series_stays_inside_its_envelope() {
    let cfg = pair_config();
    let p = seeded_perturbation(&initial_ops(&cfg), 4, 1e-3).unwrap();
    let series = stability_pair_run(&cfg, &p).unwrap();
    assert!(series.rate.is_finite());
    for (t, d) in series.times.iter().zip(&series.distances) {
        let log_ratio = (d / series.distances[0]).ln();
        assert!(log_ratio <= series.rate * t + 2.0 * series.max_fit_residual + 1e-12);
    }
}

/// `‖x₃‖_{ρ,−1}` on the static unit sphere tends to `‖∇(x₃/2)‖ = sqrt(2π/3)`
/// at second order in the mesh size.
#[test]
fn norm_of_first_harmonic_converges() {
    let exact = (2.0 * std::f64::consts::PI / 3.0).sqrt();
    let errors: Vec<f64> = (2..=4)
        .map(|level| {
            let mesh = build_reference_surface(SurfacePreset::UnitSphere, level).unwrap();
            let forms = assemble(&mesh, &FlowField::new(FlowPreset::Static {}), QuadraturePolicy::Midpoint3).unwrap();
            let m0 = assemble_mass(&mesh, QuadraturePolicy::Midpoint3, true);
            let ops = WeightedOperators::new(&mesh, &forms, &m0);
            let f = mesh.interpolate_reference(|p| p.z);
            (rho_h_minus1_norm(&ops, &f).unwrap() - exact).abs()
        })
        .collect();
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{errors:?}");
    }
}
