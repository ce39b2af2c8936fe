use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{node_gauges, ScalarField};

/// `max_{shell} |u| ~ C exp(-delta rho)` fitted on gauge shells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub delta: f64,
    pub r_squared: f64,
    /// `(gauge of the shell maximizer, shell maximum)`.
    pub shells: Vec<(f64, f64)>,
}

const SHELLS: usize = 10;
const MIN_SHELLS: usize = 4;
const FLOOR: f64 = 1e-12;

/// Fits on shells between `0.3 k` and `0.8 k`, with `k` the ball radius of
/// the field's domain (or the largest node gauge when unmasked).
pub fn fit_decay(u: &ScalarField<f64>) -> Result<DecayFit> {
    let k = u
        .domain()
        .ball_radius()
        .unwrap_or_else(|| u.grid().max_gauge());
    fit_decay_with_radius(u, k)
}

pub fn fit_decay_with_radius(u: &ScalarField<f64>, k: f64) -> Result<DecayFit> {
    if !(k > 0.0) {
        return Err(Error::domain("decay fit needs a positive radius"));
    }
    let lo = 0.3 * k;
    let hi = 0.8 * k;
    let width = (hi - lo) / SHELLS as f64;
    let rho = node_gauges(u.grid());
    let mask = u.domain().mask();
    let mut best: Vec<Option<(f64, f64)>> = vec![None; SHELLS];
    for (i, v) in u.values().iter().enumerate() {
        if !mask[i] || rho[i] < lo || rho[i] >= hi {
            continue;
        }
        let s = (((rho[i] - lo) / width) as usize).min(SHELLS - 1);
        let a = v.abs();
        if best[s].is_none_or(|(_, m)| a > m) {
            best[s] = Some((rho[i], a));
        }
    }
    let shells: Vec<(f64, f64)> = best
        .into_iter()
        .flatten()
        .filter(|(_, m)| *m > FLOOR)
        .collect();
    if shells.len() < MIN_SHELLS {
        return Err(Error::InsufficientData(format!(
            "{} usable gauge shells, need {MIN_SHELLS}",
            shells.len()
        )));
    }
    let n = shells.len() as f64;
    let mx = shells.iter().map(|s| s.0).sum::<f64>() / n;
    let my = shells.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let sxx: f64 = shells.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = shells.iter().map(|s| (s.0 - mx) * (s.1.ln() - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "all shell samples at one radius".into(),
        ));
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let ss_tot: f64 = shells.iter().map(|s| (s.1.ln() - my).powi(2)).sum();
    let ss_res: f64 = shells
        .iter()
        .map(|s| (s.1.ln() - icpt - slope * s.0).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        0.0
    };
    Ok(DecayFit {
        c: icpt.exp(),
        delta: -slope,
        r_squared,
        shells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_ball_grid;
    use crate::group::{gauge, GroupPoint};

    #[test]
    fn recovers_exact_exponential() {
        let d = build_ball_grid(4.0f64, 32).unwrap();
        let u = ScalarField::from_fn(d, |x, y, t| (-gauge(&GroupPoint::h1(x, y, t))).exp());
        let fit = fit_decay(&u).unwrap();
        assert!((fit.delta - 1.0).abs() < 0.05, "{fit:?}");
        assert!(fit.r_squared > 0.99);
        assert!((fit.c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn plateau_is_not_a_confident_decay() {
        let d = build_ball_grid(4.0f64, 24).unwrap();
        let u = ScalarField::from_fn(d, |_, _, _| 1.0);
        match fit_decay(&u) {
            Err(Error::InsufficientData(_)) => {}
            Ok(fit) => assert!(fit.r_squared < 0.5 && fit.delta.abs() < 1e-12, "{fit:?}"),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn too_few_shells() {
        let d = build_ball_grid(4.0f64, 24).unwrap();
        let u = ScalarField::from_fn(d, |x, y, t| {
            if gauge(&GroupPoint::h1(x, y, t)) < 1.4 {
                1.0
            } else {
                0.0
            }
        });
        assert!(matches!(fit_decay(&u), Err(Error::InsufficientData(_))));
    }
}
