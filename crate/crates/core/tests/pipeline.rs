use perco_core::cluster::{chemical_distance, label_components, restrict_s_r};
use perco_core::estimators::{estimate_density, sampler};
use perco_core::events::EventParams;
use perco_core::renorm::{construct_short_path, short_path_window, LadderParams, ScaleLadder};
use perco_core::samplers::{sample_bernoulli, Family, ModelSpec};
use perco_core::{Config, Point, Window};
use proptest::prelude::*;

fn nested(small: &Config, big: &Config) -> bool {
    small.occupancy().is_subset_of(big.occupancy())
}

#[test]
fn coupled_draws_are_nested_for_every_family() {
    let w3 = Window::centered(3, 3).unwrap();
    let cases = [
        (ModelSpec::bernoulli(0.5, 3), vec![0.2, 0.5, 0.8]),
        (ModelSpec::new(Family::GffLevel { h: 0.0, pad: 4 }, 3), vec![-0.5, 0.0, 0.5]),
        (ModelSpec::new(Family::Interlacement { u: 1.0, escape_radius: 12, capacity_trials: 2000 }, 3), vec![0.5, 1.0, 2.0]),
        (
            ModelSpec::new(Family::VacantInterlacement { u: 1.0, escape_radius: 12, capacity_trials: 2000 }, 3),
            vec![0.5, 1.0, 2.0],
        ),
    ];
    for (spec, params) in cases {
        let s = sampler(&spec, &w3, 17).unwrap();
        for seed in 0..5 {
            let cs = s.sample_coupled(&params, seed).unwrap();
            for p in cs.windows(2) {
                let ok = if spec.increasing_in_parameter() { nested(&p[0], &p[1]) } else { nested(&p[1], &p[0]) };
                assert!(ok, "{} not monotone along {params:?}", spec.name());
            }
        }
    }
}

#[test]
fn density_estimates_are_reproducible() {
    let spec = ModelSpec::bernoulli(0.7, 2);
    let w = Window::centered(2, 12).unwrap();
    let a = estimate_density(&spec, &w, 30, 9).unwrap();
    let b = estimate_density(&spec, &w, 30, 9).unwrap();
    assert_eq!(a, b);
    assert!(a.eta_hat > 0.5 && a.eta_hat <= 0.7);
}

#[test]
fn short_paths_on_dense_bernoulli() {
    let lad = ScaleLadder::build(LadderParams { l0: 13, r0: 2, big_l0: 6, theta_sc: 1, kmax: 1 }).unwrap();
    let params = EventParams { big_l0: 6, eta_hat: 0.94, u: 0.95 };
    let r = 36;
    let w = short_path_window(r, &lad, 2).unwrap();
    let mut held = 0;
    for seed in 0..8 {
        let c = sample_bernoulli(0.95, &w, seed);
        let sr = restrict_s_r(&c, &label_components(&c), r);
        let pick = |t: [i64; 2]| {
            (0..w.len()).filter(|&i| sr.is_occupied(i)).map(|i| w.point_of(i)).filter(|p| p.linf_norm() <= r).min_by_key(
                |p| p.coords().iter().zip(t).map(|(a, b)| a.abs_diff(b)).sum::<u64>(),
            )
        };
        let (x, y) = (pick([-30, -20]).unwrap(), pick([25, 33]).unwrap());
        let sp = construct_short_path(&c, &x, &y, r, &lad, &params).unwrap();
        if !sp.certificate.h_status.holds() {
            assert!(sp.sites.is_empty());
            continue;
        }
        held += 1;
        let len = sp.sites.len() as u64 - 1;
        assert!(sp.sites.iter().all(|&i| c.is_occupied(i)));
        assert_eq!(w.point_of(sp.sites[0]), x);
        assert_eq!(w.point_of(*sp.sites.last().unwrap()), y);
        assert!(len as u128 <= sp.certificate.length_bound);
        assert!(chemical_distance(&c, &x, &y).unwrap().unwrap() <= len);
    }
    assert!(held > 0, "H never held at p = 0.95");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chemical_distance_is_a_metric_above_l1(seed in any::<u64>(), p in 0.55f64..1.0) {
        let w = Window::new_box(vec![0, 0], vec![14, 14]).unwrap();
        let c = sample_bernoulli(p, &w, seed);
        let occ: Vec<Point> = (0..w.len()).filter(|&i| c.is_occupied(i)).map(|i| w.point_of(i)).collect();
        prop_assume!(occ.len() >= 3);
        let (a, b, m) = (&occ[0], &occ[occ.len() - 1], &occ[occ.len() / 2]);
        let ab = chemical_distance(&c, a, b).unwrap();
        prop_assert_eq!(ab, chemical_distance(&c, b, a).unwrap());
        if let Some(d) = ab {
            prop_assert!(d >= w.l1_distance(a, b));
        }
        if let (Some(am), Some(mb)) = (chemical_distance(&c, a, m).unwrap(), chemical_distance(&c, m, b).unwrap()) {
            prop_assert!(ab.is_some_and(|d| d <= am + mb));
        }
    }

    #[test]
    fn s_r_shrinks_as_r_grows(seed in any::<u64>(), p in 0.3f64..0.8, r in 0u64..12) {
        let w = Window::new_box(vec![-8, -8], vec![17, 17]).unwrap();
        let c = sample_bernoulli(p, &w, seed);
        let lab = label_components(&c);
        let (lo, hi) = (restrict_s_r(&c, &lab, r), restrict_s_r(&c, &lab, r + 1));
        prop_assert!(nested(&hi, &lo));
        prop_assert!(nested(&lo, &c));
    }
}
