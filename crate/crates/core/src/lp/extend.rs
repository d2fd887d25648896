//! Extension of buyer-specific supports to the common support `{0, …, R}`.
//!
//! Each buyer missing some values gives mass `ε` to each missing value and
//! takes it from its own maximum value. `ε` is half of `min{C₁, C₂, C₃}`:
//! `C₁` keeps the maximum-value mass positive, `C₂` keeps the fractional
//! optimum above half its original value, and `C₃` bounds the welfare lost to
//! the total-variation shift against a `c`-approximation.

use super::{build_lp, solve_lp, LpError, DEFAULT_MAX_PATHS};
use crate::model::{Instance, ValueDistribution};

#[derive(Clone, Debug)]
pub struct Extension {
    pub instance: Instance,
    /// `None` when every buyer already had the full support.
    pub epsilon: Option<f64>,
    /// `(C₁, C₂, C₃)` when an extension happened.
    pub bounds: Option<(f64, f64, f64)>,
    /// Fractional optimum of the original instance at the caller's γ.
    pub fopt: f64,
}

/// Extends supports using the fractional optimum at `gamma` and approximation
/// factor `c`.
pub fn extend_supports(instance: &Instance, gamma: f64, c: f64) -> Result<Extension, LpError> {
    let v_max = instance.max_value();
    let missing: Vec<Vec<u32>> = instance
        .buyers
        .iter()
        .map(|b| (0..=v_max).filter(|&v| !b.dist.contains(v)).collect())
        .collect();
    let fopt = solve_lp(&build_lp(instance, gamma, DEFAULT_MAX_PATHS)?)?.objective;
    if missing.iter().all(Vec::is_empty) {
        return Ok(Extension {
            instance: instance.clone(),
            epsilon: None,
            bounds: None,
            fopt,
        });
    }
    if fopt <= 0.0 {
        return Err(LpError::ZeroOptimum);
    }

    let mut c1 = f64::INFINITY;
    let mut missing_value = 0.0;
    let mut missing_count = 0.0;
    for (buyer, miss) in instance.buyers.iter().zip(&missing) {
        if miss.is_empty() {
            continue;
        }
        let top = buyer.dist.max_value();
        c1 = c1.min(buyer.dist.prob(top) / (2.0 * miss.len() as f64));
        missing_value += miss.len() as f64 * top as f64;
        missing_count += miss.len() as f64;
    }
    let v_tot: f64 = instance.buyers.iter().map(|b| b.dist.max_value() as f64).sum();
    let c2 = c1.min(fopt / (2.0 * missing_value));
    let c3 = c2.min(fopt / (4.0 * c * missing_count * v_tot));
    let eps = c3 / 2.0;

    let mut out = instance.clone();
    for (buyer, miss) in out.buyers.iter_mut().zip(&missing) {
        if miss.is_empty() {
            continue;
        }
        let top = buyer.dist.max_value();
        let mut pmf: Vec<(u32, f64)> = buyer.dist.entries().to_vec();
        for entry in pmf.iter_mut() {
            if entry.0 == top {
                entry.1 -= eps * miss.len() as f64;
            }
        }
        pmf.extend(miss.iter().map(|&v| (v, eps)));
        buyer.dist = ValueDistribution::new(pmf)
            .map_err(|e| LpError::Structure {
                bundle: format!("buyer '{}'", buyer.id),
                values: miss.clone(),
                detail: format!("extended pmf invalid: {e}"),
            })?;
    }
    Ok(Extension {
        instance: out,
        epsilon: Some(eps),
        bounds: Some((c1, c2, c3)),
        fopt,
    })
}
