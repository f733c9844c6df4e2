use std::collections::BTreeMap;

use thiserror::Error;
use tokensteer_core::decoding::HighlightConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SweepError {
    #[error("unknown sweep parameter {0:?} (expected alpha, beta or tau)")]
    UnknownParameter(String),
    #[error("grid for {name}: {reason}")]
    BadGrid { name: String, reason: String },
    #[error("grid point {0} is not a valid highlight config: {1}")]
    InvalidPoint(String, String),
}

/// Values tried for a swept parameter unless `--grid` overrides them.
pub fn default_grid(name: &str) -> Option<Vec<f64>> {
    match name {
        "alpha" => Some(vec![0.0, 0.05, 0.1]),
        "beta" => Some(vec![0.25, 0.5, 1.0]),
        "tau" => Some(vec![0.15, 0.25, 0.35]),
        _ => None,
    }
}

/// Parses `name=v1,v2,...`.
pub fn parse_grid(arg: &str) -> Result<(String, Vec<f64>), SweepError> {
    let (name, values) = arg.split_once('=').ok_or_else(|| SweepError::BadGrid {
        name: arg.to_string(),
        reason: "expected name=v1,v2,...".into(),
    })?;
    let name = name.trim().to_string();
    if default_grid(&name).is_none() {
        return Err(SweepError::UnknownParameter(name));
    }
    let values = values
        .split(',')
        .map(|v| {
            v.trim().parse::<f64>().map_err(|e| SweepError::BadGrid {
                name: name.clone(),
                reason: format!("{v:?}: {e}"),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name, values))
}

/// Cartesian product over the swept parameters, in alpha, beta, tau order.
/// Parameters not swept keep their value from `base`.
pub fn grid_points(
    base: &HighlightConfig,
    swept: &[String],
    overrides: &BTreeMap<String, Vec<f64>>,
) -> Result<Vec<HighlightConfig>, SweepError> {
    for name in swept {
        if default_grid(name).is_none() {
            return Err(SweepError::UnknownParameter(name.clone()));
        }
    }
    let axis = |name: &str, current: f64| -> Vec<f64> {
        if swept.iter().any(|s| s == name) {
            overrides
                .get(name)
                .cloned()
                .or_else(|| default_grid(name))
                .unwrap_or_default()
        } else {
            vec![current]
        }
    };
    let mut out = Vec::new();
    for &alpha in &axis("alpha", base.alpha) {
        for &beta in &axis("beta", base.beta) {
            for &tau in &axis("tau", base.tau) {
                let cfg = HighlightConfig {
                    alpha,
                    beta,
                    tau,
                    ..*base
                };
                let ok = alpha.is_finite() && alpha >= 0.0 && beta > 0.0 && beta <= 1.0 && tau >= 0.0 && tau < cfg.h_max;
                if !ok {
                    return Err(SweepError::InvalidPoint(
                        point_name(&cfg),
                        format!("needs alpha >= 0, 0 < beta <= 1, 0 <= tau < h_max ({})", cfg.h_max),
                    ));
                }
                out.push(cfg);
            }
        }
    }
    Ok(out)
}

/// File stem for a grid point, e.g. `alpha=0.05_beta=0.5_tau=0.25`.
pub fn point_name(cfg: &HighlightConfig) -> String {
    format!("alpha={}_beta={}_tau={}", cfg.alpha, cfg.beta, cfg.tau)
}
