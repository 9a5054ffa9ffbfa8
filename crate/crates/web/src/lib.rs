//! Three operations exported to the browser: a periodization heat map, a
//! decay curve, and the plane-wave scaling identity.

use nctorus::{
    decay_translate, lattice_sum_decay, periodize, scaling_identity_check, DecayTable, PlaneWave, SchwartzGaussian,
    ThetaEntry, TowerSpec,
};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn two() -> ThetaEntry {
    ThetaEntry::Rational { num: 2, den: 1 }
}

fn error(msg: impl ToString) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

/// `|Σ_γ f(x + mγ)|` on a `grid × grid` sampling of the cell `[0, m)²`, where `f`
/// is `e^{−π w⁻²|x − c|²}`. Row-major, empty on invalid input.
#[wasm_bindgen]
pub fn periodization_heatmap(m: u32, grid: u32, cx: f64, cy: f64, width: f64) -> Vec<f64> {
    if m == 0 || grid == 0 || grid > 512 || !(width > 0.0) {
        return Vec::new();
    }
    let a = std::f64::consts::PI / (width * width);
    let Ok(f) = SchwartzGaussian::centered(nalgebra_identity(a), vec![cx, cy]) else { return Vec::new() };
    let Ok(p) = periodize(&f, 0, m as u64, two(), 1e-12) else { return Vec::new() };
    let terms: Vec<([f64; 2], C64)> = p
        .element()
        .coeffs()
        .iter()
        .map(|(k, &c)| ([k.coords()[0] as f64 / m as f64, k.coords()[1] as f64 / m as f64], c))
        .collect();
    let eval = |x: [f64; 2]| -> f64 {
        let tau = std::f64::consts::TAU;
        terms.iter().map(|(k, c)| c * C64::from_polar(1.0, tau * (k[0] * x[0] + k[1] * x[1]))).sum::<C64>().norm()
    };
    let h = m as f64 / grid as f64;
    let mut out = Vec::with_capacity((grid * grid) as usize);
    for i in 0..grid {
        for j in 0..grid {
            out.push(eval([(j as f64 + 0.5) * h, (i as f64 + 0.5) * h]));
        }
    }
    out
}

fn nalgebra_identity(a: f64) -> DMatrix<f64> {
    DMatrix::identity(2, 2) * a
}

fn table_json(t: &DecayTable) -> String {
    let fit = t.fit.map(|f| json!({ "slope": f.slope, "intercept": f.intercept, "r2": f.r2 }));
    json!({
        "delta": t.rows.iter().map(|r| r.delta_norm).collect::<Vec<_>>(),
        "ln_value": t.rows.iter().map(|r| r.ln_value).collect::<Vec<_>>(),
        "fit": fit,
        "constants": t.constants.iter().map(|&(m, c)| json!({ "m": m, "ln_c": c })).collect::<Vec<_>>(),
    })
    .to_string()
}

/// `ln ‖a_Δ ⋆₂ a‖₂` (`kind = "translate"`) or the level-`j` lattice-sum bound
/// (`kind = "lattice"`, tower factors all 2) for the standard Gaussian along
/// `Δ = t·(1, 1)/√2`, `t ∈ [from, to]`, with the log-log fit. JSON.
#[wasm_bindgen]
pub fn decay_curve(kind: &str, from: f64, to: f64, count: u32, level: u32) -> String {
    if !(from.is_finite() && to > from) || !(2..=400).contains(&count) || level > 6 {
        return error("need from < to, 2 ≤ count ≤ 400 and level ≤ 6");
    }
    let a = SchwartzGaussian::standard(2);
    let deltas: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            let t = from + (to - from) * i as f64 / (count - 1) as f64;
            vec![t / 2f64.sqrt(), t / 2f64.sqrt()]
        })
        .collect();
    let table = match kind {
        "translate" => decay_translate(&a, &a, &deltas, &[4]),
        "lattice" => {
            let tower = TowerSpec { theta: two(), factors: vec![2; level as usize], n_half: 1 };
            lattice_sum_decay(&a, &deltas, &tower, level as usize, &[4])
        }
        other => return error(format!("unknown kind {other:?}")),
    };
    match table {
        Ok(t) => table_json(&t),
        Err(e) => error(e),
    }
}

/// Residual of the identity relating `e_k ⋆_θ e_l` to the `θ = 2` product,
/// for plane waves `e_k(x) = e^{2πik·x}` on `ℝ²`. JSON.
#[wasm_bindgen]
pub fn scaling_check(k1: f64, k2: f64, l1: f64, l2: f64, theta: f64) -> String {
    let w1 = PlaneWave::new(vec![k1, k2], C64::new(1.0, 0.0));
    let w2 = PlaneWave::new(vec![l1, l2], C64::new(1.0, 0.0));
    let Ok(j) = nctorus::SkewMatrix::from_f64(2, &[0.0, theta, -theta, 0.0]) else {
        return error("θ must be finite");
    };
    let product = nctorus::plane_wave_mul(&w1, &w2, &j);
    match (scaling_identity_check(&w1, &w2, theta), product) {
        (Ok(r), Ok(p)) => json!({ "residual": r, "k": p.k(), "modulus": p.modulus(), "phase": p.phase() }).to_string(),
        (Err(e), _) | (_, Err(e)) => error(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_is_periodic_and_normalised() {
        let v = periodization_heatmap(2, 16, 0.3, -0.2, 1.0);
        assert_eq!(v.len(), 256);
        // The cell average of a periodized Gaussian is ∫f / m² = 1/4.
        let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.25).abs() < 1e-3, "{mean}");
        assert!(periodization_heatmap(0, 16, 0.0, 0.0, 1.0).is_empty());
    }

    #[test]
    fn decay_curves_report_fits() {
        let t: serde_json::Value = serde_json::from_str(&decay_curve("translate", 4.0, 32.0, 8, 2)).unwrap();
        assert!(t["fit"]["slope"].as_f64().unwrap() < -4.0);
        let l: serde_json::Value = serde_json::from_str(&decay_curve("lattice", 4.0, 32.0, 8, 2)).unwrap();
        assert_eq!(l["ln_value"].as_array().unwrap().len(), 8);
        let bad: serde_json::Value = serde_json::from_str(&decay_curve("sideways", 4.0, 32.0, 8, 2)).unwrap();
        assert!(bad["error"].is_string());
    }

    #[test]
    fn scaling_residual_is_tiny() {
        let v: serde_json::Value = serde_json::from_str(&scaling_check(1.0, -2.0, 0.5, 3.0, 5.0)).unwrap();
        assert!(v["residual"].as_f64().unwrap() < 1e-12);
        let bad: serde_json::Value = serde_json::from_str(&scaling_check(1.0, 0.0, 0.0, 1.0, -1.0)).unwrap();
        assert!(bad["error"].is_string());
    }
}
