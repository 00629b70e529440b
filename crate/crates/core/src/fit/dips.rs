//! Resonance location on single transmission rows.

use crate::error::{Error, Result};
use crate::numerics::lm::{levenberg_marquardt, Bounds, LmOptions};
use crate::units::nm_to_omega;

/// A row resampled onto ascending angular frequency.
pub(crate) struct Row {
    pub omega: Vec<f64>,
    pub y: Vec<f64>,
}

impl Row {
    pub fn from_wavelengths(wavelength_nm: &[f64], values: &[f64]) -> Self {
        let mut pts: Vec<(f64, f64)> =
            wavelength_nm.iter().zip(values).map(|(&l, &v)| (nm_to_omega(l), v)).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { omega: pts.iter().map(|p| p.0).collect(), y: pts.iter().map(|p| p.1).collect() }
    }

    fn range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.omega.partition_point(|&w| w < lo);
        let b = self.omega.partition_point(|&w| w <= hi);
        a..b.max(a)
    }
}

/// Lorentzian dip b·(1 − d / (1 + 4(ω − c)²/Γ²)).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dip {
    pub center: f64,
    pub width: f64,
    pub depth: f64,
    pub baseline: f64,
    /// One-sigma uncertainty of the centre.
    pub center_sd: f64,
    /// RMS of the relative fit residual.
    pub rel_scatter: f64,
}

fn lorentz_dip(x: &[f64], w: f64) -> f64 {
    let u = 2.0 * (w - x[0]) / x[1];
    x[3] * (1.0 - x[2] / (1.0 + u * u))
}

fn quantile(v: &mut [f64], q: f64) -> f64 {
    v.sort_by(f64::total_cmp);
    v[((v.len() - 1) as f64 * q).round() as usize]
}

/// Fits the deepest dip within `guess ± half` to a Lorentzian.
pub(crate) fn fit_dip(row: &Row, guess: f64, half: f64) -> Result<Dip> {
    let r = row.range(guess - half, guess + half);
    if r.len() < 8 {
        return Err(Error::FitFailure(format!(
            "fewer than 8 samples within {half:.3e} rad/s of {guess:.6e} rad/s"
        )));
    }
    let (w, y) = (&row.omega[r.clone()], &row.y[r.clone()]);
    let imin = (0..y.len()).min_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
    let base0 = quantile(&mut y.to_vec(), 0.9);
    let half_level = 0.5 * (base0 + y[imin]);
    let mut lo = imin;
    while lo > 0 && y[lo] < half_level {
        lo -= 1;
    }
    let mut hi = imin;
    while hi + 1 < y.len() && y[hi] < half_level {
        hi += 1;
    }
    let step = (w[w.len() - 1] - w[0]) / (w.len() - 1) as f64;
    let fwhm = (w[hi] - w[lo]).max(2.0 * step);
    let c0 = w[imin];
    let fr = row.range(c0 - 4.0 * fwhm, c0 + 4.0 * fwhm);
    let (fw, fy) = (&row.omega[fr.clone()], &row.y[fr]);
    let depth0 = (1.0 - y[imin] / base0).clamp(0.01, 1.0);
    let x0 = [c0, fwhm, depth0, base0];
    let scale = [fwhm, fwhm, 1.0, base0.abs().max(1e-12)];
    let bounds = Bounds {
        lower: vec![c0 - 2.0 * fwhm, 0.05 * fwhm, 0.0, 0.0],
        upper: vec![c0 + 2.0 * fwhm, 20.0 * fwhm, 1.0, f64::INFINITY],
    };
    let rep = levenberg_marquardt(
        |x: &[f64]| fw.iter().zip(fy).map(|(&w, &v)| lorentz_dip(x, w) - v).collect(),
        &x0,
        &scale,
        &bounds,
        &LmOptions { ftol: 1e-15, xtol: 1e-14, ..Default::default() },
    )?;
    let x = &rep.x;
    let rel = fw
        .iter()
        .zip(fy)
        .map(|(&w, &v)| {
            let m = lorentz_dip(x, w);
            ((v - m) / m.abs().max(1e-300)).powi(2)
        })
        .sum::<f64>()
        / fw.len() as f64;
    Ok(Dip {
        center: x[0],
        width: x[1],
        depth: x[2],
        baseline: x[3],
        center_sd: rep.std_errors()[0],
        rel_scatter: rel.sqrt(),
    })
}

/// Ring-1 resonances of one row: the signal and i+ dips, with i− placed
/// symmetrically below the signal.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RowFrame {
    pub signal: Dip,
    pub plus: Dip,
}

impl RowFrame {
    pub fn omega_s(&self) -> f64 {
        self.signal.center
    }

    pub fn fsr(&self) -> f64 {
        self.plus.center - self.signal.center
    }

    pub fn omega_minus(&self) -> f64 {
        2.0 * self.signal.center - self.plus.center
    }

    pub fn center(&self, mode: super::Mode) -> f64 {
        self.omega_s() + mode.order() * self.fsr()
    }
}

pub(crate) fn frame_row(row: &Row, guess_s: f64, fsr: f64) -> Result<RowFrame> {
    let signal = fit_dip(row, guess_s, fsr / 3.0)?;
    let plus = fit_dip(row, signal.center + fsr, fsr / 3.0)?;
    Ok(RowFrame { signal, plus })
}

/// Locates ring-1 resonances in every row of a map, tracking the signal from
/// row to row starting at `guess_s`.
pub(crate) fn frame_rows(rows: &[Row], guess_s: f64, fsr: f64) -> Result<Vec<RowFrame>> {
    let mut guess = guess_s;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let f = frame_row(row, guess, fsr).map_err(|e| Error::FitFailure(format!("row {i}: {e}")))?;
        guess = f.omega_s();
        out.push(f);
    }
    Ok(out)
}

/// The two deepest separated minima within `center ± half`, as offsets from
/// `center`, or `None` when the second is not clearly resolved.
pub(crate) fn doublet(row: &Row, center: f64, half: f64, baseline: f64, min_sep: f64, min_depth: f64) -> Option<(f64, f64)> {
    let r = row.range(center - half, center + half);
    if r.len() < 7 {
        return None;
    }
    let (w, y) = (&row.omega[r.clone()], &row.y[r]);
    let n = y.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let a = i.saturating_sub(2);
            let b = (i + 3).min(n);
            y[a..b].iter().sum::<f64>() / (b - a) as f64
        })
        .collect();
    let mut minima: Vec<usize> = (1..n - 1)
        .filter(|&i| smooth[i] <= smooth[i - 1] && smooth[i] < smooth[i + 1])
        .filter(|&i| 1.0 - smooth[i] / baseline > min_depth)
        .collect();
    minima.sort_by(|&a, &b| smooth[a].total_cmp(&smooth[b]));
    let first = *minima.first()?;
    let second = minima.iter().copied().find(|&i| (w[i] - w[first]).abs() > min_sep)?;
    let refine = |i: usize| {
        let (y0, y1, y2) = (smooth[i - 1], smooth[i], smooth[i + 1]);
        let den = y0 - 2.0 * y1 + y2;
        let shift = if den > 0.0 { 0.5 * (y0 - y2) / den } else { 0.0 };
        w[i] + shift.clamp(-1.0, 1.0) * (w[i + 1] - w[i - 1]) * 0.5 - center
    };
    let (a, b) = (refine(first), refine(second));
    Some((a.min(b), a.max(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_row(c: f64, width: f64, depth: f64, base: f64) -> Row {
        let omega: Vec<f64> = (0..400).map(|i| c + (i as f64 - 190.0) * 0.05 * width).collect();
        let y = omega.iter().map(|&w| lorentz_dip(&[c, width, depth, base], w)).collect();
        Row { omega, y }
    }

    #[test]
    fn exact_lorentzian_is_recovered() {
        let row = synthetic_row(1.2e15, 3.8e10, 0.63, 0.0132);
        let d = fit_dip(&row, 1.2e15 + 1e10, 4e11).unwrap();
        assert!((d.center - 1.2e15).abs() < 1e-6 * 3.8e10);
        assert!((d.width / 3.8e10 - 1.0).abs() < 1e-8);
        assert!((d.depth / 0.63 - 1.0).abs() < 1e-8);
        assert!((d.baseline / 0.0132 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn doublet_finds_both_dips() {
        let c = 1.2e15;
        let omega: Vec<f64> = (0..800).map(|i| c + (i as f64 - 400.0) * 1e9).collect();
        let y = omega
            .iter()
            .map(|&w| lorentz_dip(&[c - 8e10, 3e10, 0.5, 1.0], w) * lorentz_dip(&[c + 6e10, 3e10, 0.4, 1.0], w))
            .collect();
        let row = Row { omega, y };
        let (a, b) = doublet(&row, c, 3e11, 1.0, 1.5e10, 0.05).unwrap();
        assert!((a + 8e10).abs() < 2e9, "{a}");
        assert!((b - 6e10).abs() < 2e9, "{b}");
    }
}
