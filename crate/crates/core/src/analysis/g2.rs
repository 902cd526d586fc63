//! Second-order autocorrelation model and its weighted least-squares fit.
//!
//! Every peak is a unit-area Gaussian (IRF) convolved with a unit-area
//! two-sided exponential decay, evaluated in closed form as the sum of two
//! exponentially modified Gaussian branches. Side peaks sit at multiples of
//! the repetition period around `t0`; the whole comb is multiplied by the
//! bunching envelope `1 + A_b exp(-|t - t0| / T_B)`. Times are in ns and the
//! model value is counts per histogram bin.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fit::{jacobian, levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};
use crate::source::DEFAULT_REP_RATE_HZ;
use crate::special::exp_erfc;

/// Integration limit for g2(0) and the minimum histogram half-span, in ns.
pub const G2_INTEGRATION_LIMIT_NS: f64 = 100.0;
pub const MIN_SIDE_PEAKS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2FitParams {
    /// Side-peak area (counts per bin times ns).
    pub a_s: f64,
    /// Central-peak area.
    pub a_c: f64,
    pub sigma_ns: f64,
    pub t0_ns: f64,
    pub decay_ns: f64,
    pub a_b: f64,
    pub bunching_ns: f64,
    /// Held fixed during fitting.
    pub f_sys_hz: f64,
    /// Side peaks on each side of the center included in the sum.
    pub side_peaks: usize,
}

impl G2FitParams {
    pub fn period_ns(&self) -> f64 {
        1e9 / self.f_sys_hz
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.a_s > 0.0
            && self.a_c >= 0.0
            && self.sigma_ns > 0.0
            && self.decay_ns > 0.0
            && self.bunching_ns > 0.0
            && self.a_b >= 0.0
            && self.f_sys_hz > 0.0
            && self.t0_ns.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid g2 model parameters {self:?}")))
        }
    }

    /// `ceil(half_window / period) + 1`.
    pub fn side_peaks_for_window(half_window_ns: f64, f_sys_hz: f64) -> usize {
        (half_window_ns.abs() * f_sys_hz / 1e9).ceil() as usize + 1
    }

    fn to_vec(self) -> Vec<f64> {
        vec![
            self.a_s,
            self.a_c,
            self.sigma_ns,
            self.t0_ns,
            self.decay_ns,
            self.a_b,
            self.bunching_ns,
        ]
    }

    fn with_vec(self, x: &[f64]) -> Self {
        G2FitParams {
            a_s: x[0],
            a_c: x[1],
            sigma_ns: x[2],
            t0_ns: x[3],
            decay_ns: x[4],
            a_b: x[5],
            bunching_ns: x[6],
            ..self
        }
    }
}

/// Unit-area Gaussian(sigma) convolved with `exp(-|u|/decay) / (2 decay)`.
pub fn peak_kernel(u: f64, sigma: f64, decay: f64) -> f64 {
    let norm = 1.0 / (2.0 * decay);
    if sigma <= 1e-9 * decay {
        return norm * (-u.abs() / decay).exp();
    }
    let a = sigma * sigma / (2.0 * decay * decay);
    let shift = sigma * sigma / decay;
    // Beyond ~12 sigma the Gaussian-side erfc branch is below 1e-60.
    if u.abs() > shift + 12.0 * sigma {
        return norm * (a - u.abs() / decay).exp();
    }
    let s = SQRT_2 * sigma;
    let right = exp_erfc(a - u / decay, (shift - u) / s);
    let left = exp_erfc(a + u / decay, (shift + u) / s);
    0.5 * norm * (right + left)
}

pub fn bunching_factor(t: f64, p: &G2FitParams) -> f64 {
    1.0 + p.a_b * (-(t - p.t0_ns).abs() / p.bunching_ns).exp()
}

/// `(f_C + sum_{i != 0} f_S,i) * f_B` at delay `t` (ns).
pub fn g2_model(t: f64, p: &G2FitParams) -> f64 {
    let period = p.period_ns();
    let u = t - p.t0_ns;
    let mut side = 0.0;
    for i in 1..=p.side_peaks {
        let c = i as f64 * period;
        side += peak_kernel(u - c, p.sigma_ns, p.decay_ns) + peak_kernel(u + c, p.sigma_ns, p.decay_ns);
    }
    (p.a_c * peak_kernel(u, p.sigma_ns, p.decay_ns) + p.a_s * side) * bunching_factor(t, p)
}

/// Binned coincidence counts; `t_ns` are bin centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub t_ns: Vec<f64>,
    pub counts: Vec<f64>,
}

impl CorrelationHistogram {
    pub fn new(t_ns: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if t_ns.len() != counts.len() {
            return Err(Error::invalid("time and count columns differ in length"));
        }
        if t_ns.len() < 2 {
            return Err(Error::Precondition("histogram needs at least two bins".into()));
        }
        if t_ns.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("histogram times must be strictly increasing"));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invalid("histogram counts must be finite and non-negative"));
        }
        Ok(CorrelationHistogram { t_ns, counts })
    }

    pub fn bin_width_ns(&self) -> f64 {
        let mut d: Vec<f64> = self.t_ns.windows(2).map(|w| w[1] - w[0]).collect();
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }

    pub fn len(&self) -> usize {
        self.t_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_ns.is_empty()
    }
}

/// Fitted parameters with one-standard-error uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Fit {
    pub params: G2FitParams,
    pub std_errors: G2FitParams,
    pub g2_zero: f64,
    pub g2_zero_std_error: f64,
    pub reduced_chi2: f64,
    pub iterations: usize,
    pub initial: G2FitParams,
}

const N_FREE: usize = 7;

pub fn g2_fit(hist: &CorrelationHistogram) -> Result<G2Fit> {
    g2_fit_with(hist, DEFAULT_REP_RATE_HZ, &LmOptions::default())
}

pub fn g2_fit_with(hist: &CorrelationHistogram, f_sys_hz: f64, opts: &LmOptions) -> Result<G2Fit> {
    let t_min = hist.t_ns[0];
    let t_max = *hist.t_ns.last().unwrap();
    let bw = hist.bin_width_ns();
    if t_min > -G2_INTEGRATION_LIMIT_NS + bw || t_max < G2_INTEGRATION_LIMIT_NS - bw {
        return Err(Error::Precondition(format!(
            "histogram spans [{t_min}, {t_max}] ns, need at least +/-{G2_INTEGRATION_LIMIT_NS} ns"
        )));
    }
    let period = 1e9 / f_sys_hz;
    let visible = (t_min.abs().min(t_max.abs()) / period).floor() as usize;
    if visible < MIN_SIDE_PEAKS {
        return Err(Error::Precondition(format!(
            "only {visible} side peaks per side inside the histogram, need {MIN_SIDE_PEAKS}"
        )));
    }

    let initial = initial_guess(hist, f_sys_hz)?;
    let m = hist.len();
    let weights: Vec<f64> = hist.counts.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect();
    let residuals = |x: &[f64], r: &mut [f64]| {
        let p = initial.with_vec(x);
        for k in 0..m {
            r[k] = (hist.counts[k] - g2_model(hist.t_ns[k], &p)) * weights[k];
        }
    };

    let scale = [
        initial.a_s,
        initial.a_s * 1e-3,
        bw,
        bw,
        initial.decay_ns,
        0.01,
        period,
    ];
    let lower = [
        f64::MIN_POSITIVE,
        0.0,
        1e-4 * bw,
        f64::NEG_INFINITY,
        1e-4 * bw,
        0.0,
        1e-3 * period,
    ];
    let mut res = residuals;
    let out = levenberg_marquardt(&mut res, initial.to_vec(), m, &scale, &lower, opts);
    let dof = (m - N_FREE) as f64;
    let reduced_chi2 = out.cost / dof;
    if !out.converged || !out.x.iter().all(|v| v.is_finite()) {
        return Err(Error::FitFailure {
            iterations: out.iterations,
            rss: out.cost,
            reduced_chi2,
        });
    }

    let params = initial.with_vec(&out.x);
    let mut r0 = vec![0.0; m];
    res(&out.x, &mut r0);
    let jac = jacobian(&mut res, &out.x, &r0, &scale);
    let cov = covariance(&jac, reduced_chi2).ok_or(Error::FitFailure {
        iterations: out.iterations,
        rss: out.cost,
        reduced_chi2,
    })?;
    let err: Vec<f64> = (0..N_FREE).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();

    let ratio = params.a_c / params.a_s;
    // d(ratio) = d(a_c)/a_s - a_c d(a_s)/a_s^2
    let var_ratio = cov[(1, 1)] / params.a_s.powi(2) + ratio.powi(2) * cov[(0, 0)] / params.a_s.powi(2)
        - 2.0 * ratio * cov[(0, 1)] / params.a_s.powi(2);

    Ok(G2Fit {
        params,
        std_errors: G2FitParams {
            f_sys_hz: 0.0,
            side_peaks: 0,
            ..params.with_vec(&err)
        },
        g2_zero: ratio,
        g2_zero_std_error: var_ratio.max(0.0).sqrt(),
        reduced_chi2,
        iterations: out.iterations,
        initial,
    })
}

fn covariance(jac: &DMatrix<f64>, reduced_chi2: f64) -> Option<DMatrix<f64>> {
    let jtj = jac.transpose() * jac;
    let inv = jtj.try_inverse()?;
    Some(inv * reduced_chi2)
}

struct PeakStats {
    offset: f64,
    sum: f64,
    max: f64,
}

fn peak_window_stats(hist: &CorrelationHistogram, center: f64, half: f64) -> Option<PeakStats> {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut n = 0usize;
    for (t, c) in hist.t_ns.iter().zip(&hist.counts) {
        if (t - center).abs() < half {
            sum += c;
            max = max.max(*c);
            n += 1;
        }
    }
    (n > 0).then_some(PeakStats {
        offset: 0.0,
        sum,
        max,
    })
}

fn argmax_in(hist: &CorrelationHistogram, lo: f64, hi: f64) -> Option<f64> {
    hist.t_ns
        .iter()
        .zip(&hist.counts)
        .filter(|(t, _)| (lo..hi).contains(*t))
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(t, _)| *t)
}

/// Deterministic starting point from peak positions, heights and areas.
fn initial_guess(hist: &CorrelationHistogram, f_sys_hz: f64) -> Result<G2FitParams> {
    let period = 1e9 / f_sys_hz;
    let bw = hist.bin_width_ns();
    let t_pos = argmax_in(hist, 0.5 * period, 1.5 * period);
    let t_neg = argmax_in(hist, -1.5 * period, -0.5 * period);
    let t0 = match (t_pos, t_neg) {
        (Some(a), Some(b)) => 0.5 * (a + b),
        _ => return Err(Error::Precondition("no side peaks next to the center".into())),
    };
    let t_min = hist.t_ns[0];
    let t_max = *hist.t_ns.last().unwrap();
    let half_window = (t_min - t0).abs().max((t_max - t0).abs());
    let side_peaks = G2FitParams::side_peaks_for_window(half_window, f_sys_hz);

    // Side peaks whose full window lies inside the data.
    let mut peaks = Vec::new();
    for i in 1..=side_peaks as i64 {
        for sign in [-1.0, 1.0] {
            let c = t0 + sign * i as f64 * period;
            if c - 0.5 * period >= t_min && c + 0.5 * period <= t_max {
                if let Some(mut s) = peak_window_stats(hist, c, 0.5 * period) {
                    s.offset = (c - t0).abs();
                    peaks.push(s);
                }
            }
        }
    }
    if peaks.len() < 6 {
        return Err(Error::Precondition("too few complete side peaks for initialization".into()));
    }
    peaks.sort_by(|a, b| a.offset.total_cmp(&b.offset));
    let far = &peaks[peaks.len() - 6..];
    let decay_ns = (far.iter().map(|p| p.sum * bw / (2.0 * p.max.max(1.0))).sum::<f64>() / far.len() as f64)
        .clamp(2.0 * bw, period);

    // Two passes: areas relative to the far-peak baseline give the envelope,
    // which in turn corrects the baseline.
    let mut a_b = 0.0;
    let mut bunching_ns = 5.0 * period;
    let mut a_s = far.iter().map(|p| p.sum).sum::<f64>() * bw / far.len() as f64;
    for _ in 0..2 {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for p in &peaks {
            let excess = p.sum * bw / a_s - 1.0;
            if excess > 0.02 {
                xs.push(p.offset);
                ys.push(excess.ln());
            }
        }
        if xs.len() >= 2 {
            let (slope, intercept) = line_fit(&xs, &ys);
            if slope < 0.0 {
                bunching_ns = -1.0 / slope;
                a_b = intercept.exp();
            }
        }
        let env = |d: f64| 1.0 + a_b * (-d / bunching_ns).exp();
        a_s = far.iter().map(|p| p.sum * bw / env(p.offset)).sum::<f64>() / far.len() as f64;
    }

    let mut guess = G2FitParams {
        a_s,
        a_c: 0.0,
        sigma_ns: 2.0 * bw,
        t0_ns: t0,
        decay_ns,
        a_b,
        bunching_ns,
        f_sys_hz,
        side_peaks,
    };
    let excess: f64 = hist
        .t_ns
        .iter()
        .zip(&hist.counts)
        .filter(|(t, _)| (*t - t0).abs() < 0.5 * period)
        .map(|(t, c)| c - g2_model(*t, &guess))
        .sum();
    guess.a_c = (excess * bw / (1.0 + a_b)).max(0.0);
    Ok(guess)
}

fn line_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
