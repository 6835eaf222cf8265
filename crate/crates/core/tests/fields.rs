use vpdirac::charge::PointChargeState;
use vpdirac::density;
use vpdirac::ensemble::{sample_profile, ParticleEnsemble};
use vpdirac::fields::{self, FieldEvaluation};
use vpdirac::geom::{self, Vec3};
use vpdirac::params::{num, ParamMap};
use vpdirac::pointset;
use vpdirac::Error;

fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    geom::dist(a, b) <= tol
}

fn ball_sample(count: usize) -> ParticleEnsemble {
    let mut p = ParamMap::new();
    p.insert("mass".into(), num(1.0));
    let profile = density::build_profile("uniform-ball", &p).unwrap();
    sample_profile(profile.as_ref(), count, 1, pointset::build("halton").unwrap().as_ref()).unwrap()
}

#[test]
fn single_source_inverse_square() {
    let ens = ParticleEnsemble::from_parts(vec![[0.0; 3]], vec![[0.0; 3]], vec![1.0]).unwrap();
    let e = fields::plasma_field(&ens, &[[2.0, 0.0, 0.0], [0.0, -1.0, 0.0]], 0.0).unwrap();
    assert_eq!(e[0], [0.25, 0.0, 0.0]);
    assert_eq!(e[1], [0.0, -1.0, 0.0]);
}

#[test]
fn coincident_target_reports_index() {
    let ens = ParticleEnsemble::from_parts(
        vec![[0.0; 3], [1.0, 1.0, 1.0]],
        vec![[0.0; 3]; 2],
        vec![0.5, 0.5],
    )
    .unwrap();
    match fields::plasma_field(&ens, &[[1.0, 1.0, 1.0]], 0.0) {
        Err(Error::NearSingularity { index, .. }) => assert_eq!(index, 1),
        other => panic!("unexpected {other:?}"),
    }
    // softening removes the singularity, and the coincident source contributes nothing
    let e = fields::plasma_field(&ens, &[[1.0, 1.0, 1.0]], 0.1).unwrap();
    assert!(e[0].iter().all(|c| c.is_finite() && *c > 0.0));
}

#[test]
fn negative_softening_is_rejected() {
    let ens = ball_sample(10);
    assert!(fields::plasma_field(&ens, &[[3.0, 0.0, 0.0]], -1.0).is_err());
}

#[test]
fn point_charge_examples() {
    let f = fields::point_charge_field(&[0.0; 3], &[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]], 0.0).unwrap();
    assert_eq!(f[0], [1.0, 0.0, 0.0]);
    assert_eq!(f[1], [0.0, 0.25, 0.0]);
    assert!(matches!(
        fields::point_charge_field(&[1.0, 2.0, 3.0], &[[1.0, 2.0, 3.0]], 0.0),
        Err(Error::NearSingularity { .. })
    ));
    match fields::point_charge_field(&[0.0; 3], &[[0.0, 0.0, 0.05]], 0.1) {
        Err(Error::NearSingularity { distance, .. }) => assert!((distance - 0.05).abs() < 1e-15),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn gradient_kernel_examples() {
    let k = fields::gradient_kernel(&[0.0, 0.0, 2.0]).unwrap();
    // (δ|y|² - 3 y y)/|y|⁵ with |y|² = 4, |y|⁵ = 32
    let expected = [[4.0 / 32.0, 0.0, 0.0], [0.0, 4.0 / 32.0, 0.0], [0.0, 0.0, (4.0 - 12.0) / 32.0]];
    assert_eq!(k, expected);
    let k = fields::gradient_kernel(&[1.0, 0.0, 0.0]).unwrap();
    assert_eq!(k, [[-2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    assert!(matches!(fields::gradient_kernel(&[0.0; 3]), Err(Error::SingularKernel)));
}

#[test]
fn analytic_uniform_ball() {
    let c = [0.0; 3];
    assert!(close(&fields::uniform_ball_field(&c, 1.0, 1.0, &[2.0, 0.0, 0.0]), &[0.25, 0.0, 0.0], 1e-15));
    assert!(close(&fields::uniform_ball_field(&c, 1.0, 1.0, &[0.5, 0.0, 0.0]), &[0.5, 0.0, 0.0], 1e-15));
}

#[test]
fn sampled_ball_matches_shell_theorem() {
    let ens = ball_sample(10_000);
    let targets = [[2.0, 0.0, 0.0], [0.0, -2.0, 0.0], [1.2, 1.2, 0.8]];
    let e = fields::plasma_field(&ens, &targets, 0.0).unwrap();
    for (t, got) in targets.iter().zip(&e) {
        let r = geom::norm(t);
        let exact = geom::scale(t, 1.0 / (r * r * r));
        let rel = geom::dist(got, &exact) / geom::norm(&exact);
        assert!(rel <= 2e-2, "{t:?}: {rel}");
    }
}

#[test]
fn plasma_self_force_vanishes() {
    let ens = ball_sample(3000);
    let e = fields::self_field(&ens, 0.05).unwrap();
    let mut total = [0.0; 3];
    let mut scale = 0.0;
    for (w, f) in ens.weights.iter().zip(&e) {
        total = geom::add(&total, &geom::scale(f, *w));
        scale += w * geom::norm(f);
    }
    assert!(geom::norm(&total) <= 1e-12 * scale, "{total:?} vs {scale}");
}

#[test]
fn softening_error_is_second_order() {
    let ens = ball_sample(500);
    let targets: Vec<Vec3> = (0..8).map(|k| {
        let a = k as f64 * 0.7;
        [3.0 * a.cos(), 3.0 * a.sin(), 0.5]
    }).collect();
    let exact = fields::plasma_field(&ens, &targets, 0.0).unwrap();
    let err = |eps: f64| -> f64 {
        let e = fields::plasma_field(&ens, &targets, eps).unwrap();
        e.iter().zip(&exact).map(|(a, b)| geom::dist(a, b)).fold(0.0, f64::max)
    };
    let errs = [err(0.2), err(0.1), err(0.05)];
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "{errs:?}");
    }
    // leading term (3/2) ε² Σ w/|x - y|⁴ with unit mass at distance >= 2
    let (eps, d): (f64, f64) = (0.2, 2.0);
    assert!(errs[0] <= 1.5 * eps * eps / d.powi(4), "{errs:?}");
}

#[test]
fn evaluation_is_bit_reproducible() {
    let ens = ball_sample(2000);
    let targets: Vec<Vec3> = ens.positions.iter().take(50).map(|x| geom::add(x, &[0.01, 0.0, 0.0])).collect();
    let a = fields::plasma_field(&ens, &targets, 0.01).unwrap();
    let b = fields::plasma_field(&ens, &targets, 0.01).unwrap();
    assert_eq!(a, b);
}

#[test]
fn field_dump_has_one_row_per_target() {
    let ens = ball_sample(100);
    let charge = PointChargeState { xi: [0.0; 3], eta: [0.0; 3] };
    let targets = vec![[2.0, 0.0, 0.0], [0.0, 0.0, 3.0]];
    let eval = FieldEvaluation::evaluate(&ens, Some(&charge), targets, 0.0, 1e-6).unwrap();
    assert_eq!(eval.f[0], [0.25, 0.0, 0.0]);
    let mut buf = Vec::new();
    eval.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,x3,E1,E2,E3,F1,F2,F3");
    assert_eq!(lines.len(), 3);
    let row: Vec<f64> = lines[1].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(row.len(), 9);
    assert_eq!(&row[6..], &[0.25, 0.0, 0.0]);
}
