//! Browser bindings. Each export returns a flat `Float64Array`; the layouts
//! are given on the plain Rust functions, which are also what the tests use.

use svev::correlations::cov::cov_grid;
use svev::correlations::density::{rho_ev_polya, rho_sv};
use svev::correlations::{conditional_density, ConditionalOptions, CovContext};
use svev::{EnsembleModel, Family, Precision};
use wasm_bindgen::prelude::*;

fn model(family: &str, n: usize, alpha: f64, beta: f64) -> Result<EnsembleModel, String> {
    let family = match family {
        "laguerre" => Family::Laguerre { alpha },
        "jacobi" => Family::Jacobi { alpha, beta },
        other => return Err(format!("unknown family {other:?}")),
    };
    let precision = if n > svev::ensembles::MAX_N_DOUBLE { Precision::DoubleDouble } else { Precision::Double };
    EnsembleModel::new(n, family, precision).map_err(|e| e.to_string())
}

fn context(family: &str, n: usize, alpha: f64, beta: f64) -> Result<CovContext, String> {
    CovContext::new(model(family, n, alpha, beta)?).map_err(|e| e.to_string())
}

/// Natural plotting range of the squared singular values.
pub fn support_hint(family: &str, n: usize, alpha: f64) -> f64 {
    match family {
        "jacobi" => 1.0,
        _ => 4.0 * n as f64 + 2.0 * alpha.max(0.0) + 6.0 * (n as f64).sqrt() + 6.0,
    }
}

/// `[x_0..x_{m-1}, ρ_EV(x)..., ρ_SV(x)...]` on `m` points inside `(0, x_max)`.
pub fn densities(family: &str, n: usize, alpha: f64, beta: f64, x_max: f64, m: usize) -> Result<Vec<f64>, String> {
    let ctx = context(family, n, alpha, beta)?;
    let end = ctx.model().support_end().min(x_max);
    let xs: Vec<f64> = (1..=m).map(|i| end * i as f64 / (m + 1) as f64).collect();
    let mut out = xs.clone();
    for f in [rho_ev_polya, rho_sv] {
        for &x in &xs {
            out.push(f(&ctx, x).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

/// Row-major `2λ·cov(r; λ²)` with λ varying fastest: `cells[j * nl + i]`
/// belongs to `λ_i = λ_max (i+1)/nl` and `r_j = r_max (j+1)/nr`.
#[allow(clippy::too_many_arguments)]
pub fn covariance(family: &str, n: usize, alpha: f64, beta: f64, lambda_max: f64, r_max: f64, nl: usize, nr: usize) -> Result<Vec<f64>, String> {
    let ctx = context(family, n, alpha, beta)?;
    let end = ctx.model().support_end();
    let lambda_max = lambda_max.min(end.sqrt() * (1.0 - 1e-9));
    let r_max = r_max.min(end * (1.0 - 1e-9));
    let lams: Vec<f64> = (1..=nl).map(|i| lambda_max * i as f64 / nl as f64).collect();
    let rs: Vec<f64> = (1..=nr).map(|j| r_max * j as f64 / nr as f64).collect();
    let t = cov_grid(&ctx, &lams, &rs, false, 1).map_err(|e| e.to_string())?;
    // The table is λ-major; transpose so that rows are r.
    let mut out = vec![0.0; nl * nr];
    for i in 0..nl {
        for j in 0..nr {
            out[j * nl + i] = t.values[i * nr + j];
        }
    }
    Ok(out)
}

/// `[r_0..r_{m-1}, ρ(r|a)...]` on `m` points of `(0, r_max]`.
pub fn conditional(a: &[f64], r_max: f64, m: usize) -> Result<Vec<f64>, String> {
    if a.len() < 2 {
        return Err("need at least two squared singular values".into());
    }
    let opts = ConditionalOptions::default();
    let rs: Vec<f64> = (1..=m).map(|i| r_max * i as f64 / m as f64).collect();
    let mut out = rs.clone();
    for &r in &rs {
        out.push(conditional_density(r, a, &opts).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = supportHint)]
pub fn support_hint_js(family: &str, n: usize, alpha: f64) -> f64 {
    support_hint(family, n, alpha)
}

#[wasm_bindgen(js_name = densities)]
pub fn densities_js(family: &str, n: usize, alpha: f64, beta: f64, x_max: f64, m: usize) -> Result<Vec<f64>, JsError> {
    densities(family, n, alpha, beta, x_max, m).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = covariance)]
#[allow(clippy::too_many_arguments)]
pub fn covariance_js(family: &str, n: usize, alpha: f64, beta: f64, lambda_max: f64, r_max: f64, nl: usize, nr: usize) -> Result<Vec<f64>, JsError> {
    covariance(family, n, alpha, beta, lambda_max, r_max, nl, nr).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = conditional)]
pub fn conditional_js(a: Vec<f64>, r_max: f64, m: usize) -> Result<Vec<f64>, JsError> {
    conditional(&a, r_max, m).map_err(|e| JsError::new(&e))
}
