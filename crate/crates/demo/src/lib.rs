//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string; the `*_json` functions are the same operations for native callers.

use prevalence_core::bayes::{self, BetaPair, GibbsConfig, Priors};
use prevalence_core::calibration::{hyperparams, ConfusionCounts};
use prevalence_core::naive::{expected_positive_rate, naive_estimate, positive_rate};
use prevalence_core::synthetic::{
    exact_posterior, generate_labels_outputs, GenerativeParams, MAX_EXACT_N,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const HIST_BINS: usize = 40;
/// Cap on sweeps x reviews so a click cannot freeze the page for long.
const MAX_WORK: u64 = 400_000_000;

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

/// Naive estimate at `pi_f` plus the whole correction line over `pi_f` in [0, 1].
pub fn naive_curve_json(pi_f: f64, eta: f64, theta: f64) -> Result<Value, String> {
    let at = naive_estimate(pi_f, eta, theta).map_err(|e| e.to_string())?;
    let curve: Vec<[f64; 2]> = (0..=100)
        .map(|i| {
            let p = i as f64 / 100.0;
            [
                p,
                naive_estimate(p, eta, theta)
                    .map(|e| e.pi_naive)
                    .unwrap_or(f64::NAN),
            ]
        })
        .collect();
    Ok(json!({
        "pi_naive": at.pi_naive,
        "range": at.range,
        "near_degenerate": at.near_degenerate,
        "false_positive_floor": 1.0 - theta,
        "curve": curve,
    }))
}

#[wasm_bindgen]
pub fn naive_curve(pi_f: f64, eta: f64, theta: f64) -> Result<String, JsValue> {
    to_js(naive_curve_json(pi_f, eta, theta))
}

fn check_work(iterations: usize, chains: usize, n: usize) -> Result<(), String> {
    if (iterations as u64)
        .saturating_mul(chains as u64)
        .saturating_mul(n as u64)
        > MAX_WORK
    {
        return Err(format!(
            "too much work for the browser: {iterations} sweeps x {chains} chains x {n} reviews"
        ));
    }
    Ok(())
}

fn histogram(samples: &[f64]) -> Vec<u32> {
    let mut h = vec![0u32; HIST_BINS];
    for &s in samples {
        h[((s * HIST_BINS as f64) as usize).min(HIST_BINS - 1)] += 1;
    }
    h
}

fn light_config(iterations: usize, seed: u64) -> GibbsConfig {
    let burn_in = iterations / 4;
    GibbsConfig {
        iterations,
        burn_in,
        lag: ((iterations - burn_in) / 1_000).max(1),
        seed,
        chains: 2,
        alpha: BetaPair::UNIFORM,
    }
}

/// Posterior of the prevalence for `positives` deceptive outputs out of `n`,
/// with priors from the confusion counts. Adds the exact mean when `n` is
/// small enough to enumerate.
#[allow(clippy::too_many_arguments)]
pub fn posterior_json(
    positives: usize,
    n: usize,
    tp: u32,
    fn_: u32,
    tn: u32,
    fp: u32,
    iterations: usize,
    seed: u64,
) -> Result<Value, String> {
    if n == 0 || positives > n {
        return Err("need 0 <= positives <= n and n > 0".into());
    }
    if iterations < 100 {
        return Err("use at least 100 sweeps".into());
    }
    let cfg = light_config(iterations, seed);
    check_work(iterations, cfg.chains, n)?;
    let (beta, gamma) = hyperparams(&ConfusionCounts {
        tp: tp.into(),
        fn_: fn_.into(),
        tn_dev: tn.into(),
        fp_dev: fp.into(),
    });
    let priors = Priors {
        alpha: BetaPair::UNIFORM,
        beta,
        gamma,
    };
    let outputs: Vec<bool> = (0..n).map(|i| i < positives).collect();
    let post = bayes::estimate(&outputs, &priors, &cfg).map_err(|e| e.to_string())?;
    let pis: Vec<f64> = post
        .retained_samples
        .iter()
        .map(|s| s.counts.pi(&priors.alpha))
        .collect();
    let exact = if n <= MAX_EXACT_N {
        Some(
            exact_posterior(&outputs, &priors)
                .map_err(|e| e.to_string())?
                .pi_mean,
        )
    } else {
        None
    };
    let naive = naive_estimate(positives as f64 / n as f64, beta.mean1(), gamma.mean1())
        .map(|e| e.pi_naive)
        .ok();
    Ok(json!({
        "pi_mean": post.pi_mean,
        "pi_ci95": [post.pi_ci95.0, post.pi_ci95.1],
        "exact_pi_mean": exact,
        "naive_at_prior_means": naive,
        "histogram": histogram(&pis),
        "bins": HIST_BINS,
        "samples": pis.len(),
        "chain_spread": post.diagnostics.pi_spread,
    }))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn posterior(
    positives: usize,
    n: usize,
    tp: u32,
    fn_: u32,
    tn: u32,
    fp: u32,
    iterations: usize,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(posterior_json(
        positives, n, tp, fn_, tn, fp, iterations, seed,
    ))
}

/// One draw from the generative model, estimated both ways. The priors come
/// from a calibration of `cal_size` reviews per class at the true rates.
pub fn recovery_json(
    pi_star: f64,
    eta_star: f64,
    theta_star: f64,
    n: usize,
    cal_size: u32,
    iterations: usize,
    seed: u64,
) -> Result<Value, String> {
    let cfg = light_config(iterations.max(100), seed);
    check_work(cfg.iterations, cfg.chains, n)?;
    let (_, f) = generate_labels_outputs(&GenerativeParams {
        pi_star,
        eta_star,
        theta_star,
        n,
        seed,
    })
    .map_err(|e| e.to_string())?;
    let tp = (eta_star * cal_size as f64).round() as u64;
    let tn = (theta_star * cal_size as f64).round() as u64;
    let (beta, gamma) = hyperparams(&ConfusionCounts {
        tp,
        fn_: cal_size as u64 - tp,
        tn_dev: tn,
        fp_dev: cal_size as u64 - tn,
    });
    let priors = Priors {
        alpha: BetaPair::UNIFORM,
        beta,
        gamma,
    };
    let post = bayes::estimate(&f, &priors, &cfg).map_err(|e| e.to_string())?;
    let pi_f = positive_rate(&f).map_err(|e| e.to_string())?;
    let eta = tp as f64 / cal_size as f64;
    let theta = tn as f64 / cal_size as f64;
    Ok(json!({
        "pi_star": pi_star,
        "pi_f": pi_f,
        "expected_pi_f": expected_positive_rate(pi_star, eta_star, theta_star),
        "pi_naive": naive_estimate(pi_f, eta, theta).map(|e| e.pi_naive).ok(),
        "pi_bayes": post.pi_mean,
        "pi_ci95": [post.pi_ci95.0, post.pi_ci95.1],
        "covered": post.pi_ci95.0 <= pi_star && pi_star <= post.pi_ci95.1,
    }))
}

#[wasm_bindgen]
pub fn recovery(
    pi_star: f64,
    eta_star: f64,
    theta_star: f64,
    n: usize,
    cal_size: u32,
    iterations: usize,
    seed: u64,
) -> Result<String, JsValue> {
    to_js(recovery_json(
        pi_star, eta_star, theta_star, n, cal_size, iterations, seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_curve_shape() {
        let v = naive_curve_json(0.15, 0.903, 0.89).unwrap();
        assert!((v["pi_naive"].as_f64().unwrap() - 0.05044).abs() < 1e-4);
        assert_eq!(v["curve"].as_array().unwrap().len(), 101);
        assert!(naive_curve_json(0.2, 0.5, 0.5).is_err());
    }

    #[test]
    fn posterior_matches_exact_on_small_input() {
        let v = posterior_json(3, 10, 36, 4, 36, 4, 20_000, 1).unwrap();
        let gibbs = v["pi_mean"].as_f64().unwrap();
        let exact = v["exact_pi_mean"].as_f64().unwrap();
        assert!((gibbs - exact).abs() < 0.02, "{gibbs} vs {exact}");
        let total: u64 = v["histogram"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_u64().unwrap())
            .sum();
        assert_eq!(total, v["samples"].as_u64().unwrap());
        assert!(posterior_json(30, 25, 1, 1, 1, 1, 1000, 0).is_err());
        assert!(posterior_json(3, 100, 1, 1, 1, 1, 0, 0).is_err());
        assert!(posterior_json(0, 100, 1, 1, 1, 1, usize::MAX / 4, 0).is_err());
    }

    #[test]
    fn recovery_is_deterministic_and_sensible() {
        let a = recovery_json(0.1, 0.9, 0.9, 3_000, 400, 4_000, 3).unwrap();
        let b = recovery_json(0.1, 0.9, 0.9, 3_000, 400, 4_000, 3).unwrap();
        assert_eq!(a, b);
        assert!((a["pi_bayes"].as_f64().unwrap() - 0.1).abs() < 0.04);
    }
}
