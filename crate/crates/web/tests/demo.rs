use strainscope_web::Pattern;

#[test]
fn pattern_is_usable() {
    let p = Pattern::new(96, 96, 0.5, 2.0, 1).unwrap();
    assert_eq!(p.rgba().len(), 96 * 96 * 4);
    assert!(p.mig() > 25.0);
    let d = p.granule_diameter();
    assert!((3.0..=5.5).contains(&d), "{d}");
}

#[test]
fn shift_is_recovered() {
    let p = Pattern::new(96, 96, 0.5, 2.0, 2).unwrap();
    let r = p.match_shift(48, 48, 12, 1.4, -0.3).unwrap();
    assert!((r[0] - 1.4).abs() < 0.02 && (r[1] + 0.3).abs() < 0.02, "{r:?}");
    assert!(r[2] > 0.99);
}

#[test]
fn stretch_shows_in_the_map() {
    let p = Pattern::new(128, 128, 0.5, 2.0, 3).unwrap();
    let map = p.strain_map(0.01, 0.0, 6, 10).unwrap();
    assert_eq!(map.rgba().len(), map.width() * map.height() * 4);
    let oracle = 0.01 + 0.5 * 0.01 * 0.01;
    assert!((map.mean() - oracle).abs() < 1e-3, "{} vs {oracle}", map.mean());
}
