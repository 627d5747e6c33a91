//! Small reductions over sampled series.

/// Mean of `values` over samples with `t >= t_from`.
pub fn mean_since(ts: &[f64], values: &[f64], t_from: f64) -> Option<f64> {
    let sel: Vec<f64> = ts
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_from)
        .map(|(_, v)| *v)
        .collect();
    if sel.is_empty() {
        None
    } else {
        Some(sel.iter().sum::<f64>() / sel.len() as f64)
    }
}

/// First sample time at which `values` exceeds `level`.
pub fn first_crossing(ts: &[f64], values: &[f64], level: f64) -> Option<f64> {
    ts.iter().zip(values).find(|(_, v)| **v > level).map(|(t, _)| *t)
}

/// `max |a − b| / max |b|`: error of `a` against the reference `b`,
/// normalized by the reference's peak.
pub fn peak_normalized_error(a: &[f64], b: &[f64]) -> f64 {
    let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if peak == 0.0 {
        if err == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        err / peak
    }
}

/// `max |a − b| / |b|` over the samples.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / y.abs()))
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

pub fn min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reductions() {
        let ts = [0.0, 1.0, 2.0, 3.0];
        let v = [0.0, 0.5, 1.0, 1.0];
        assert_eq!(mean_since(&ts, &v, 2.0), Some(1.0));
        assert_eq!(mean_since(&ts, &v, 9.0), None);
        assert_eq!(first_crossing(&ts, &v, 0.4), Some(1.0));
        assert_eq!(first_crossing(&ts, &v, 2.0), None);
        assert_eq!(peak_normalized_error(&[0.0, 1.1], &[0.0, 1.0]), 0.10000000000000009);
        assert_eq!(peak_normalized_error(&[0.0], &[0.0]), 0.0);
        assert_eq!(max_relative_error(&[2.0, 1.0], &[1.0, 1.0]), 1.0);
        assert!((correlation(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
        assert!((correlation(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(min(&v), 0.0);
        assert_eq!(max(&v), 1.0);
    }
}
