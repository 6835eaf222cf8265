use proptest::prelude::*;

use vpdirac::analysis;
use vpdirac::charge::PointChargeState;
use vpdirac::diagnostics;
use vpdirac::dynamics::{FlowRecord, IntegratorStats};
use vpdirac::ensemble::ParticleEnsemble;
use vpdirac::fields;
use vpdirac::flowmetrics::{self, MetricParams};
use vpdirac::geom::{self, Vec3};

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    [-r..r, -r..r, -r..r]
}

fn ensemble(max: usize) -> impl Strategy<Value = ParticleEnsemble> {
    prop::collection::vec((vec3(4.0), vec3(3.0), 0.0..0.1f64), 1..max).prop_map(|rows| {
        let (x, rest): (Vec<Vec3>, Vec<(Vec3, f64)>) = rows.into_iter().map(|(x, v, w)| (x, (v, w))).unzip();
        let (v, w) = rest.into_iter().unzip();
        ParticleEnsemble::from_parts(x, v, w).unwrap()
    })
}

/// Flow with `k` stored times built from per-seed trajectories.
fn flow_from(traj: &[Vec<(Vec3, Vec3)>], weights: &[f64]) -> FlowRecord {
    let seeds = weights.len();
    let stored = traj.len();
    FlowRecord {
        n: 1,
        softening: 0.0,
        seed_ids: (0..seeds as u64).collect(),
        weights: weights.to_vec(),
        reference_weights: weights.to_vec(),
        times: (0..stored).map(|k| k as f64 * 0.1).collect(),
        positions: traj.iter().map(|row| row.iter().map(|z| z.0).collect()).collect(),
        velocities: traj.iter().map(|row| row.iter().map(|z| z.1).collect()).collect(),
        charge: None,
        flagged: vec![false; seeds],
        stats: IntegratorStats::default(),
    }
}

/// Two random flows over the same seeds, the second a perturbation of the first.
fn flow_pair() -> impl Strategy<Value = (FlowRecord, FlowRecord)> {
    (1usize..12, 2usize..5).prop_flat_map(|(seeds, stored)| {
        (
            prop::collection::vec(prop::collection::vec((vec3(6.0), vec3(6.0)), seeds), stored),
            prop::collection::vec(prop::collection::vec((vec3(1.0), vec3(1.0)), seeds), stored),
            prop::collection::vec(0.0..1.0f64, seeds),
            0.0..1.0f64,
        )
            .prop_map(|(a, noise, w, amp): (Vec<Vec<(Vec3, Vec3)>>, Vec<Vec<(Vec3, Vec3)>>, Vec<f64>, f64)| {
                // the flows agree at the start time
                let mut b = a.clone();
                for k in 1..b.len() {
                    for i in 0..b[k].len() {
                        b[k][i].0 = geom::add(&b[k][i].0, &geom::scale(&noise[k][i].0, amp));
                        b[k][i].1 = geom::add(&b[k][i].1, &geom::scale(&noise[k][i].1, amp));
                    }
                }
                (flow_from(&a, &w), flow_from(&b, &w))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cutoff_weights_grow_with_n(ens in ensemble(40), n in 1u32..20, extra in 0u32..20) {
        let a = ens.apply_cutoff_about(n, &[0.0; 3], &[0.5, 0.0, 0.0]).unwrap();
        let b = ens.apply_cutoff_about(n + extra, &[0.0; 3], &[0.5, 0.0, 0.0]).unwrap();
        for i in 0..ens.len() {
            prop_assert!(a.weights[i] <= b.weights[i]);
            prop_assert!(b.weights[i] == 0.0 || b.weights[i] == ens.reference_weights[i]);
        }
        prop_assert!(a.total_weight() <= b.total_weight());
        prop_assert_eq!(&a.seed_ids, &ens.seed_ids);
        prop_assert_eq!(&a.positions, &ens.positions);
    }

    #[test]
    fn kernel_is_symmetric_and_trace_free(y in vec3(10.0)) {
        prop_assume!(geom::norm(&y) > 1e-3);
        let k = fields::gradient_kernel(&y).unwrap();
        let scale = geom::frobenius(&k);
        prop_assert!(geom::trace(&k).abs() <= 1e-14 * scale);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(k[i][j], k[j][i]);
            }
        }
    }

    #[test]
    fn weak_norm_is_homogeneous(
        mags in prop::collection::vec(0.0..100.0f64, 1..200),
        c in -10.0..10.0f64,
        p in 1.0..4.0f64,
    ) {
        prop_assume!(c != 0.0);
        let base = analysis::weak_pseudo_norm_of_samples(&mags, 0.5, p).unwrap();
        let scaled: Vec<f64> = mags.iter().map(|m| c * m).collect();
        let v = analysis::weak_pseudo_norm_of_samples(&scaled, 0.5, p).unwrap();
        prop_assert!((v - c.abs() * base).abs() <= 1e-12 * (1.0 + v));
    }

    #[test]
    fn chebyshev_holds_on_random_flows(
        (a, b) in flow_pair(),
        r in 0.5..20.0f64,
        lambda in 0.5..20.0f64,
        gamma in 1e-3..5.0f64,
        d1 in 1e-3..1.0f64,
        ratio in 1.0..10.0f64,
    ) {
        let p = MetricParams::new(r, lambda, gamma, d1, d1 * ratio, 0.0, 1.0).unwrap();
        for &s in &a.times {
            let (lhs, rhs) = flowmetrics::chebyshev_consistency(&a, &b, &p, s).unwrap();
            prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{} > {}", lhs, rhs);
        }
    }

    #[test]
    fn superlevels_are_monotone((a, _) in flow_pair(), r in 0.1..15.0f64, lambda in 0.1..15.0f64) {
        let base = flowmetrics::superlevel_measure(&a, r, lambda);
        prop_assert!(flowmetrics::superlevel_measure(&a, r, 2.0 * lambda) <= base);
        prop_assert!(flowmetrics::superlevel_measure(&a, 2.0 * r, lambda) >= base);
    }

    #[test]
    fn phi_is_symmetric_and_nonnegative((a, b) in flow_pair(), d in 0.01..1.0f64) {
        let p = MetricParams::new(10.0, 12.0, 0.1, d, d, 0.0, 1.0).unwrap();
        for &s in &a.times {
            let ab = flowmetrics::phi_functional(&a, &b, &p, s).unwrap();
            let ba = flowmetrics::phi_functional(&b, &a, &p, s).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
        }
        prop_assert_eq!(flowmetrics::phi_functional(&a, &b, &p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn energy_components_are_nonnegative(
        ens in ensemble(30),
        xi in vec3(5.0),
        eta in vec3(2.0),
        eps in 0.0..0.5f64,
    ) {
        prop_assume!(ens.positions.iter().all(|x| geom::dist(x, &xi) > 1e-6));
        prop_assume!(eps > 0.0 || distinct(&ens.positions));
        let charge = PointChargeState { xi, eta };
        let h = diagnostics::total_energy(&ens, Some(&charge), eps).unwrap();
        prop_assert!(h.min_component() >= 0.0);
    }

    #[test]
    fn virial_rate_ignores_rigid_translations(ens in ensemble(30), xi in vec3(5.0), shift in vec3(10.0)) {
        prop_assume!(ens.positions.iter().all(|x| geom::dist(x, &xi) > 1e-3));
        let mut moved = ens.clone();
        moved.positions.iter_mut().for_each(|x| *x = geom::add(x, &shift));
        let a = diagnostics::virial_rate(&ens, &xi).unwrap();
        let b = diagnostics::virial_rate(&moved, &geom::add(&xi, &shift)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }
}

fn distinct(x: &[Vec3]) -> bool {
    (0..x.len()).all(|i| (0..i).all(|j| x[i] != x[j]))
}
