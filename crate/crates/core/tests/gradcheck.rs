use mapseg::gradcheck::*;

fn assert_below(report: GradReport, limit: f64) {
    for (what, err) in &report.errors {
        assert!(*err < limit, "{} {what}: relative error {err:e} ≥ {limit:e}", report.name);
    }
    assert!(report.checked > 0);
}

#[test]
fn conv_gradients() {
    for seed in [1, 2, 3] {
        assert_below(check_conv(seed).unwrap(), 1e-4);
    }
}

#[test]
fn batchnorm_gradients() {
    for seed in [1, 2, 3] {
        assert_below(check_batchnorm(seed).unwrap(), 1e-3);
    }
}

#[test]
fn relu_gradients_off_kink() {
    assert_below(check_relu(7).unwrap(), 1e-3);
}

#[test]
fn maxpool_gradients_unique_maxima() {
    assert_below(check_maxpool(7).unwrap(), 1e-3);
}

#[test]
fn cross_entropy_gradients() {
    for seed in [1, 2] {
        assert_below(check_softmax_cross_entropy(seed).unwrap(), 1e-4);
    }
}

#[test]
fn tiny_unet_gradients() {
    let report = check_unet(1).unwrap();
    assert!(report.excluded * 10 < report.checked, "{report:?}");
    assert_below(report, 1e-3);
}

#[test]
fn relative_error_conventions() {
    assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    assert_eq!(relative_error(&[3.0, 4.0], &[3.0, 4.0]), 0.0);
    // ‖(0, 1)‖ / max(5, √(9+9)) = 1/5
    assert!((relative_error(&[3.0, 4.0], &[3.0, 3.0]) - 0.2).abs() < 1e-15);
}

#[test]
fn numeric_gradient_of_quadratic() {
    let mut x = vec![1.0, -2.0];
    let g = numeric_gradient(&mut x, 1e-3, |v| v[0] * v[0] + 3.0 * v[1]);
    assert!((g[0] - 2.0).abs() < 1e-9 && (g[1] - 3.0).abs() < 1e-9);
    assert_eq!(x, vec![1.0, -2.0]);
}
