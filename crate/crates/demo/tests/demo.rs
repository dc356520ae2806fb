use msopt_demo::{field, landing, path, samples};

#[test]
fn samples_lie_on_the_unit_circle() {
    let s = samples(50, 1);
    assert_eq!(s.len(), 100);
    for p in s.chunks(2) {
        assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn field_pulls_points_towards_the_circle() {
    let f = field(400, 0.1, 2, 9, 1.5).unwrap();
    assert_eq!(f.len(), 9 * 9 * 4);
    for r in f.chunks(4) {
        let radius = r[0].hypot(r[1]);
        if (0.6..=1.4).contains(&radius) {
            let mean_radius = r[2].hypot(r[3]);
            assert!((mean_radius - 1.0).abs() < (radius - 1.0).abs() + 0.05, "{r:?}");
        }
    }
}

#[test]
fn path_decreases_the_objective() {
    let p = path(400, 0.1, 3, 0.7, 0.05, 200).unwrap();
    assert_eq!(p.len(), 3 * 201);
    let first = p[2];
    let last = p[p.len() - 1];
    assert!(first > 0.4 && last < first - 1.0, "{first} -> {last}");
    assert!(last < -0.9);
}

#[test]
fn landing_follows_the_exponential_law() {
    let c = landing(1.0, 0.3, 2.0).unwrap();
    assert_eq!(c.len() % 3, 0);
    for r in c.chunks(3) {
        assert!((r[1] - r[2]).abs() <= 0.05 * r[2], "{r:?}");
    }
    assert!(landing(1.0, 5.0, 1.0).is_err());
}
