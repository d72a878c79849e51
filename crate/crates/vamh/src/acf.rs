//! Sample autocorrelation and integrated autocorrelation time.

use crate::error::{Error, Result};
use rustfft::{num_complex::Complex, FftPlanner};

/// Sample autocorrelation function with biased normalization:
/// `rho(k) = gamma(k) / gamma(0)` where
/// `gamma(k) = n^-1 sum (g_t - g_bar)(g_{t+k} - g_bar)`.
///
/// Returns lags `0..=max_lag`. Errs on constant traces (undefined ACF) and
/// when the trace is not longer than `max_lag`.
pub fn sample_acf(g: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = g.len();
    if n <= max_lag {
        return Err(Error::Config(format!(
            "trace length {n} must exceed max lag {max_lag}"
        )));
    }
    let mean = g.iter().sum::<f64>() / n as f64;
    let var: f64 = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var == 0.0 {
        return Err(Error::DegenerateTrace(
            "constant trace has undefined autocorrelation".into(),
        ));
    }

    // Autocovariance by FFT on the zero-padded, centered series.
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = g
        .iter()
        .map(|&v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = *v * v.conj();
    }
    planner.plan_fft_inverse(size).process(&mut buf);

    let scale = 1.0 / (size as f64 * n as f64 * var);
    Ok((0..=max_lag).map(|k| buf[k].re * scale).collect())
}

/// Integrated autocorrelation time `1 + 2 sum rho(k)`, truncated by the
/// initial-positive-sequence rule on pairwise sums.
pub fn integrated_autocorr_time(g: &[f64]) -> Result<f64> {
    let max_lag = (g.len() / 2).saturating_sub(1);
    let rho = sample_acf(g, max_lag)?;
    let mut t = 1.0;
    let mut k = 1;
    while k + 1 <= max_lag {
        let pair = rho[k] + rho[k + 1];
        if pair <= 0.0 {
            break;
        }
        t += 2.0 * pair;
        k += 2;
    }
    Ok(t)
}

/// Writes the `lag,acf` and windowed `step,g` files of a trace.
///
/// `window` is a 1-based inclusive step range for the trace export.
pub fn export_trace_and_acf<W1: std::io::Write, W2: std::io::Write>(
    g: &[f64],
    max_lag: usize,
    window: (usize, usize),
    mut trace_out: W1,
    mut acf_out: W2,
    config_comment: &str,
) -> Result<()> {
    let acf = sample_acf(g, max_lag)?;
    writeln!(acf_out, "# {config_comment}")?;
    writeln!(acf_out, "lag,acf")?;
    for (k, v) in acf.iter().enumerate() {
        writeln!(acf_out, "{k},{v}")?;
    }

    let (lo, hi) = window;
    if lo == 0 || lo > hi {
        return Err(Error::Config(format!("bad trace window [{lo}, {hi}]")));
    }
    writeln!(trace_out, "# {config_comment}")?;
    writeln!(trace_out, "step,g")?;
    for step in lo..=hi.min(g.len()) {
        writeln!(trace_out, "{step},{}", g[step - 1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::RandomStream;

    #[test]
    fn acf_lag_zero_is_one() {
        let g: Vec<f64> = (0..100).map(|k| (k as f64 * 0.7).sin()).collect();
        let acf = sample_acf(&g, 10).unwrap();
        assert!((acf[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn acf_matches_direct_computation() {
        let mut rng = RandomStream::new(3, 0);
        let mut g = vec![0.0f64; 400];
        for k in 1..g.len() {
            g[k] = 0.6 * g[k - 1] + rng.standard_normal();
        }
        let acf = sample_acf(&g, 5).unwrap();
        let n = g.len();
        let mean = g.iter().sum::<f64>() / n as f64;
        let gamma0: f64 = g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        for k in 0..=5 {
            let gk: f64 = (0..n - k).map(|t| (g[t] - mean) * (g[t + k] - mean)).sum::<f64>()
                / n as f64;
            assert!((acf[k] - gk / gamma0).abs() < 1e-10, "lag {k}");
        }
    }

    #[test]
    fn constant_trace_is_degenerate() {
        let g = vec![2.5; 50];
        assert!(matches!(
            sample_acf(&g, 5),
            Err(Error::DegenerateTrace(_))
        ));
    }

    #[test]
    fn white_noise_stays_in_band() {
        let mut rng = RandomStream::new(17, 0);
        let n = 100_000;
        let g: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let acf = sample_acf(&g, 200).unwrap();
        let band = 3.0 / (n as f64).sqrt();
        let outside = acf[1..].iter().filter(|v| v.abs() > band).count();
        // 99% of lags inside the 3-sigma band
        assert!(outside <= 2, "{outside} of 200 lags outside");
        let t = integrated_autocorr_time(&g).unwrap();
        assert!((t - 1.0).abs() < 0.1, "iact {t}");
    }

    #[test]
    fn iact_grows_with_correlation() {
        let mut rng = RandomStream::new(23, 0);
        let n = 200_000;
        let mut g = vec![0.0f64; n];
        let phi: f64 = 0.9;
        for k in 1..n {
            g[k] = phi * g[k - 1] + rng.standard_normal();
        }
        let t = integrated_autocorr_time(&g).unwrap();
        let expected = (1.0 + phi) / (1.0 - phi); // AR(1) value 19
        assert!((t - expected).abs() < 0.15 * expected, "iact {t}");
    }

    #[test]
    fn export_writes_both_files() {
        let g: Vec<f64> = (0..3000).map(|k| ((k * 37 % 100) as f64) / 100.0).collect();
        let mut trace = Vec::new();
        let mut acf = Vec::new();
        export_trace_and_acf(&g, 50, (1001, 2000), &mut trace, &mut acf, "test").unwrap();
        let trace = String::from_utf8(trace).unwrap();
        let acf = String::from_utf8(acf).unwrap();
        assert_eq!(trace.lines().count(), 2 + 1000);
        assert!(trace.lines().nth(2).unwrap().starts_with("1001,"));
        assert_eq!(acf.lines().count(), 2 + 51);
    }
}
