use std::sync::OnceLock;

use proptest::prelude::*;

use stark_threshold::cli::{num, table_csv};
use stark_threshold::model::{self, SymmetricState};
use stark_threshold::saddle;
use stark_threshold::threshold::{epsilon_grid, LaunchSurface};
use stark_threshold::SystemParams;

fn surface() -> &'static LaunchSurface {
    static S: OnceLock<LaunchSurface> = OnceLock::new();
    S.get_or_init(|| {
        let p = SystemParams::new(2.0, 1.0).unwrap();
        LaunchSurface::new(&p, -p.length_scale()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn saddle_is_stationary(z in 1.0f64..20.0, log_f in -5.0f64..1.5) {
        let f = 10f64.powf(log_f);
        let p = SystemParams::new(z, f).unwrap();
        let s = saddle::saddle_analytic(&p);
        let (dr, dz) = model::grad_potential_symmetric(s.r_s, s.z_s, &p).unwrap();
        prop_assert!(dr.hypot(dz) < 1e-10 * f.sqrt());
        let g = model::grad_potential_full(&s.config(), &p).unwrap();
        prop_assert!(g.norm() < 1e-10 * f.sqrt());
    }

    #[test]
    fn field_scaling(z in 1.0f64..10.0, f in 1e-4f64..5.0) {
        let p = SystemParams::new(z, f).unwrap();
        let one = SystemParams::new(z, 1.0).unwrap();
        prop_assert_eq!(saddle::threshold_exponent(&p), saddle::threshold_exponent(&one));
        let ratio = saddle::saddle_analytic(&p).v_s / saddle::saddle_analytic(&one).v_s;
        prop_assert!((ratio / f.sqrt() - 1.0).abs() < 1e-12);
        prop_assert!((saddle::mu_squared(&p) / saddle::mu_squared(&one) / f.powf(1.5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_lies_between_the_limits(z in 1.0f64..1e4) {
        let p = SystemParams::new(z, 1.0).unwrap();
        let a = saddle::threshold_exponent(&p);
        prop_assert!(a > 1.5f64.sqrt() && a < 1.3507);
        prop_assert!(a > saddle::wannier_exponent(z).unwrap());
    }

    #[test]
    fn symmetric_hamiltonian_matches_the_embedding(
        r in 0.2f64..3.0, z in -2.0f64..3.0, pr in -1.0f64..1.0, pz in -1.0f64..1.0, phi in 0.0f64..6.3,
    ) {
        let p = SystemParams::new(2.0, 0.7).unwrap();
        let s = SymmetricState::new(r, z, pr, pz).unwrap();
        let reduced = model::hamiltonian_symmetric(&s, &p).unwrap();
        let full = model::hamiltonian_full(&s.embed(phi), &p).unwrap();
        prop_assert!((reduced - full).abs() < 1e-12 * reduced.abs().max(1.0));
    }

    #[test]
    fn floats_round_trip(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        prop_assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn table_rows_follow_the_request(zs in prop::collection::vec(1u32..8, 1..12)) {
        let charges: Vec<f64> = zs.iter().map(|&z| z as f64).collect();
        let text = table_csv(&saddle::exponent_table(&charges).unwrap());
        let got: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
        prop_assert_eq!(got, charges);
    }

    #[test]
    fn grid_is_logarithmic(lo in -6.0f64..-2.0, span in 0.5f64..3.0, ppd in 1u32..12) {
        let (a, b) = (10f64.powf(lo), 10f64.powf(lo + span));
        let g = epsilon_grid(-3.0, a, b, ppd).unwrap();
        prop_assert!((g[0] / (3.0 * a) - 1.0).abs() < 1e-12);
        prop_assert!((g[g.len() - 1] / (3.0 * b) - 1.0).abs() < 1e-12);
        let r = g[1] / g[0];
        prop_assert!(g.windows(2).all(|w| (w[1] / w[0] / r - 1.0).abs() < 1e-9));
    }

    #[test]
    fn launches_sit_on_the_energy_shell(
        rel in 1e-4f64..1e-2, y in -0.02f64..0.02, py in -0.005f64..0.005,
        u in prop::array::uniform3(-0.01f64..0.01), pu in prop::array::uniform3(-0.01f64..0.01),
    ) {
        let s = surface();
        let v_s = saddle::saddle_analytic(&s.params).v_s;
        let eps = rel * v_s.abs();
        let k = eps.sqrt();
        let sample = s.sample(eps, y * k, py * k, u.map(|v| v * k), pu.map(|v| v * k)).unwrap();
        let h = model::hamiltonian_full(&sample.state, &s.params).unwrap();
        prop_assert!((h - (v_s + eps)).abs() < 1e-12 * v_s.abs());
        prop_assert!(sample.p_x0 > 0.0);
    }
}
