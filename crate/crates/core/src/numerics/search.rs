//! Derivative-free scalar and low-dimensional searches.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`.
/// `tol` is absolute; the bracket never shrinks below a few ulps of its ends.
pub fn golden_max<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let floor = 8.0 * f64::EPSILON * a.abs().max(b.abs());
    let tol = tol.max(floor);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Arg-max of a smooth unimodal `f` by bisection on the sign of its central
/// difference. Resolves the maximizer far below the √ε limit of value-based
/// searches.
pub fn argmax_by_slope<F>(mut f: F, mut a: f64, mut b: f64, rel_tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let slope = |f: &mut F, x: f64| {
        let h = 1e-6 * x.abs().max(1e-300);
        f(x + h) - f(x - h)
    };
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if (b - a) <= rel_tol * mid.abs() {
            break;
        }
        if slope(&mut f, mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone)]
pub struct PatternOptions {
    pub initial_step: Vec<f64>,
    pub min_step: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub max_evals: usize,
}

#[derive(Debug, Clone)]
pub struct PatternResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Compass search minimizing `f` inside a box. Steps halve whenever no axis
/// move improves; stops when all steps are below `min_step`.
pub fn pattern_search<F>(mut f: F, x0: &[f64], opts: &PatternOptions) -> PatternResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = xi.clamp(opts.lower[i], opts.upper[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let mut fx = f(&x);
    let mut evals = 1;
    let mut step = opts.initial_step.clone();
    let mut last_dir: Option<(usize, f64)> = None;

    while evals < opts.max_evals {
        let mut improved = false;
        // retry the previous successful direction first
        let mut order: Vec<(usize, f64)> = Vec::with_capacity(2 * n);
        if let Some(d) = last_dir {
            order.push(d);
        }
        for i in 0..n {
            for s in [1.0, -1.0] {
                if Some((i, s)) != last_dir {
                    order.push((i, s));
                }
            }
        }
        for (i, s) in order {
            if step[i] < opts.min_step[i] {
                continue;
            }
            let mut y = x.clone();
            y[i] += s * step[i];
            clamp(&mut y);
            if y[i] == x[i] {
                continue;
            }
            let fy = f(&y);
            evals += 1;
            if fy < fx {
                x = y;
                fx = fy;
                improved = true;
                last_dir = Some((i, s));
                break;
            }
            if evals >= opts.max_evals {
                break;
            }
        }
        if !improved {
            last_dir = None;
            let mut any = false;
            for (s, &min) in step.iter_mut().zip(&opts.min_step) {
                *s *= 0.5;
                any |= *s >= min;
            }
            if !any {
                break;
            }
        }
    }
    PatternResult { x, value: fx, evals }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 1.234).powi(2) + 2.0, -5.0, 5.0, 1e-10);
        assert!((x - 1.234).abs() < 1e-7);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_bisection_is_sharp() {
        let x = argmax_by_slope(|x: f64| x * (-x / 3.7).exp(), 0.1, 100.0, 1e-13);
        assert!((x / 3.7 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pattern_search_rosenbrock_like() {
        let f = |p: &[f64]| (p[0] - 1.0).powi(2) + 10.0 * (p[1] - p[0] * p[0]).powi(2);
        let opts = PatternOptions {
            initial_step: vec![0.5, 0.5],
            min_step: vec![1e-7, 1e-7],
            lower: vec![-3.0, -3.0],
            upper: vec![3.0, 3.0],
            max_evals: 100_000,
        };
        let r = pattern_search(f, &[-1.0, 2.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-3, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 2e-3, "{:?}", r.x);
    }
}
