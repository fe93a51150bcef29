use svev_demo::{conditional, covariance, densities, support_hint};

#[test]
fn density_curves_integrate_to_one() {
    let m = 400;
    let hint = support_hint("laguerre", 3, 0.5);
    let v = densities("laguerre", 3, 0.5, 0.0, hint, m).unwrap();
    assert_eq!(v.len(), 3 * m);
    let dx = v[1] - v[0];
    for k in 1..3 {
        let mass: f64 = v[k * m..(k + 1) * m].iter().sum::<f64>() * dx;
        assert!((mass - 1.0).abs() < 2e-2, "curve {k}: {mass}");
    }
    let j = densities("jacobi", 3, 0.5, 1.5, 1.0, 50).unwrap();
    assert!(j[..50].iter().all(|x| *x > 0.0 && *x < 1.0));
    assert!(densities("hermite", 3, 0.0, 0.0, 1.0, 10).is_err());
}

#[test]
fn heatmap_is_r_major() {
    let (nl, nr) = (4, 3);
    let v = covariance("laguerre", 3, 0.5, 0.0, 4.0, 10.0, nl, nr).unwrap();
    assert_eq!(v.len(), nl * nr);
    let ctx = svev::correlations::CovContext::new(svev::EnsembleModel::laguerre(3, 0.5).unwrap()).unwrap();
    let (l, r) = (4.0 * 2.0 / 4.0, 10.0 * 3.0 / 3.0);
    let c = svev::correlations::cov::cov_closed(&ctx, r, l * l).unwrap();
    assert!((v[2 * nl + 1] - 2.0 * l * c).abs() < 1e-12 * c.abs().max(1e-12));
}

#[test]
fn conditional_curve() {
    let m = 3000;
    let v = conditional(&[0.5, 1.0, 2.0], 3.0, m).unwrap();
    let dx = v[1] - v[0];
    let mass: f64 = v[m..].iter().sum::<f64>() * dx;
    assert!((mass - 1.0).abs() < 1e-2, "{mass}");
    assert!(conditional(&[1.0], 2.0, 10).is_err());
}
