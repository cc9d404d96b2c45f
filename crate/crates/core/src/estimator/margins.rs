use serde::{Deserialize, Serialize};

use super::{dot, sigmoid};
use crate::error::{Error, Result};
use crate::features::{DesignLayout, FeatureKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffect {
    pub name: String,
    pub kind: FeatureKind,
    /// Change in the predicted link probability.
    pub effect: f64,
}

/// Marginal effects evaluated at the mean design row `xbar`.
///
/// Continuous columns get the derivative `L'(xbar'b) * b_k`. Indicators get
/// the discrete change from 0 to 1 with the other columns at their means;
/// for a distance bin every bin dummy is first set to zero, so the change is
/// relative to the reference bin. The intercept has no effect to report.
pub fn marginal_effects_at_mean(beta: &[f64], xbar: &[f64], layout: &DesignLayout) -> Result<Vec<MarginalEffect>> {
    let k = layout.width();
    if beta.len() != k || xbar.len() != k {
        return Err(Error::Config(format!(
            "coefficients ({}) and mean row ({}) must match the design width {k}",
            beta.len(),
            xbar.len()
        )));
    }
    let z = dot(xbar, beta);
    let p = sigmoid(z);
    let mut out = Vec::with_capacity(k);
    for (c, f) in layout.features.iter().enumerate() {
        let effect = match f.kind {
            FeatureKind::Intercept => continue,
            FeatureKind::Continuous => p * (1.0 - p) * beta[c],
            FeatureKind::Indicator => {
                let mut x = xbar.to_vec();
                x[c] = 1.0;
                let on = sigmoid(dot(&x, beta));
                x[c] = 0.0;
                on - sigmoid(dot(&x, beta))
            }
            FeatureKind::DistanceBin => {
                let mut x = xbar.to_vec();
                for (b, g) in layout.features.iter().enumerate() {
                    if g.kind == FeatureKind::DistanceBin {
                        x[b] = 0.0;
                    }
                }
                let off = sigmoid(dot(&x, beta));
                x[c] = 1.0;
                sigmoid(dot(&x, beta)) - off
            }
        };
        out.push(MarginalEffect {
            name: f.name.clone(),
            kind: f.kind,
            effect,
        });
    }
    Ok(out)
}
