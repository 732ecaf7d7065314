use evoch_core::scenario::{run, InitialCondition, RunConfig};
use evoch_core::FlowPreset;
use proptest::prelude::*;

fn base(model: &str) -> RunConfig {
    let text = format!(
        "model = \"{model}\"\ntheta = 0.3\nT = 0.05\ndt = 0.01\n[surface]\npreset = \"unit_sphere\"\nrefinement = 2\n[flow]\npreset = \"static\"\n"
    );
    RunConfig::from_toml_str(&text, std::path::Path::new("prop.toml")).unwrap()
}

fn moving_flow() -> impl Strategy<Value = FlowPreset> {
    prop_oneof![
        (-0.3..0.3f64, 0.5..3.0f64).prop_map(|(amplitude, frequency)| FlowPreset::BreathingSphere { amplitude, frequency }),
        (-0.3..0.3f64, 0.5..3.0f64).prop_map(|(amplitude, frequency)| FlowPreset::EllipsoidStretch { amplitude, frequency }),
        (-1.0..1.0f64, 0.0..2.0f64).prop_map(|(v, angular_speed)| FlowPreset::TranslateRotate {
            velocity: [v, 0.5 * v, -v],
            angular_speed
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mass_is_conserved_every_step(
        seed in 0u64..1000,
        mean in -0.5..0.5f64,
        weighted in any::<bool>(),
        flow in moving_flow(),
    ) {
        let mut cfg = base(if weighted { "weighted" } else { "advected" });
        cfg.flow = flow;
        cfg.u0 = InitialCondition::RandomUniform { seed, amplitude: 0.2, mean };
        let records = run(&cfg).unwrap().records;
        let m0 = records[0].mass;
        for r in &records {
            prop_assert!((r.mass - m0).abs() <= 1e-10 * r.area);
        }
    }

    #[test]
    fn static_convex_split_energy_never_increases(
        seed in 0u64..1000,
        theta in 0.1..0.9f64,
        mean in -0.4..0.4f64,
    ) {
        let mut cfg = base("advected");
        cfg.theta = theta;
        cfg.u0 = InitialCondition::RandomUniform { seed, amplitude: 0.3, mean };
        let records = run(&cfg).unwrap().records;
        for w in records.windows(2) {
            prop_assert!(w[1].energy <= w[0].energy + 1e-12);
        }
    }

    #[test]
    fn runs_are_reproducible(seed in 0u64..1000, flow in moving_flow()) {
        let mut cfg = base("advected");
        cfg.flow = flow;
        cfg.u0 = InitialCondition::RandomUniform { seed, amplitude: 0.2, mean: 0.0 };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        prop_assert_eq!(a.final_state.alpha, b.final_state.alpha);
        prop_assert_eq!(a.records.len(), b.records.len());
    }

    #[test]
    fn weighted_mass_matrix_is_invariant(t in 0.0..3.0f64, flow in moving_flow()) {
        use evoch_core::forms::assemble;
        use evoch_core::{build_reference_surface, FlowField, QuadraturePolicy, SurfacePreset};
        let mesh0 = build_reference_surface(SurfacePreset::UnitSphere, 2).unwrap();
        let field = FlowField::new(flow);
        let m_ref = assemble(&mesh0, &field, QuadraturePolicy::Midpoint3).unwrap().m_rho;
        let mesh = mesh0.advance(&field, t).unwrap();
        let m_t = assemble(&mesh, &field, QuadraturePolicy::Midpoint3).unwrap().m_rho;
        prop_assert!(m_t.max_abs_diff(&m_ref) <= 1e-13);
    }
}
