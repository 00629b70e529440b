/// Samples on a uniform grid with C¹ cubic-Hermite (Catmull-Rom) evaluation.
///
/// Outside the sampled interval the value is `outside`.
#[derive(Debug, Clone)]
pub struct UniformSeries {
    start: f64,
    step: f64,
    values: Vec<f64>,
    outside: f64,
}

impl UniformSeries {
    pub fn new(start: f64, step: f64, values: Vec<f64>, outside: f64) -> Self {
        assert!(step > 0.0, "step must be positive");
        assert!(values.len() >= 2, "need at least two samples");
        Self { start, step, values, outside }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let u = (t - self.start) / self.step;
        if !(0.0..=(n - 1) as f64).contains(&u) {
            return self.outside;
        }
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let y0 = self.values[i];
        let y1 = self.values[i + 1];
        let m0 = if i == 0 { y1 - y0 } else { 0.5 * (y1 - self.values[i - 1]) };
        let m1 = if i + 2 >= n { y1 - y0 } else { 0.5 * (self.values[i + 2] - y0) };
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1
    }

    /// Derivative of the interpolant.
    pub fn slope(&self, t: f64) -> f64 {
        let n = self.values.len();
        let u = (t - self.start) / self.step;
        if !(0.0..=(n - 1) as f64).contains(&u) {
            return 0.0;
        }
        let i = (u.floor() as usize).min(n - 2);
        let s = u - i as f64;
        let y0 = self.values[i];
        let y1 = self.values[i + 1];
        let m0 = if i == 0 { y1 - y0 } else { 0.5 * (y1 - self.values[i - 1]) };
        let m1 = if i + 2 >= n { y1 - y0 } else { 0.5 * (self.values[i + 2] - y0) };
        let s2 = s * s;
        ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / self.step
    }
}

/// Piecewise-linear interpolation on a strictly increasing abscissa.
pub fn lerp_sorted(x: &[f64], y: &[f64], t: f64) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    if t <= x[0] {
        return y[0];
    }
    if t >= x[x.len() - 1] {
        return y[y.len() - 1];
    }
    let i = x.partition_point(|&v| v <= t) - 1;
    let s = (t - x[i]) / (x[i + 1] - x[i]);
    y[i] + s * (y[i + 1] - y[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_nodes_and_quadratics() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let s = UniformSeries::new(0.0, 0.1, ys, 0.0);
        assert!((s.eval(0.5) - 0.25).abs() < 1e-12);
        // Catmull-Rom is exact for quadratics in the interior.
        assert!((s.eval(0.73) - 0.73 * 0.73).abs() < 1e-12);
        assert_eq!(s.eval(-1.0), 0.0);
        assert_eq!(s.eval(5.0), 0.0);
    }

    #[test]
    fn lerp_clamps() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 10.0, 0.0];
        assert_eq!(lerp_sorted(&x, &y, 0.5), 5.0);
        assert_eq!(lerp_sorted(&x, &y, -3.0), 0.0);
        assert_eq!(lerp_sorted(&x, &y, 1.5), 5.0);
    }
}
