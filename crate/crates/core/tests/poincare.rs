use dimerlab::poincare::property_suite;

#[test]
fn randomized_properties_hold() {
    for c in property_suite(10_000, 11) {
        assert!(c.passed(), "{c:?}");
        eprintln!("{c:?}");
    }
}

#[test]
fn suite_is_reproducible() {
    assert_eq!(property_suite(200, 3), property_suite(200, 3));
}
