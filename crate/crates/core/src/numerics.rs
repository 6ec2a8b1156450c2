//! Small numerical kernels shared across modules: adaptive quadrature,
//! natural cubic splines and a counter-based random stream.

/// Locally adaptive trapezoid rule. Intervals are bisected until the
/// difference between the one-panel and two-panel estimates falls below the
/// tolerance share of that interval; the accepted value carries the
/// Richardson correction.
pub(crate) fn adaptive_trapezoid(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let whole = 0.5 * (b - a) * (fa + fb);
    let total = (b - a).abs();
    trapezoid_rec(f, a, b, fa, fb, whole, tol, total, 60)
}

#[allow(clippy::too_many_arguments)]
fn trapezoid_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    total: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let fm = f(m);
    let left = 0.25 * (b - a) * (fa + fm);
    let right = 0.25 * (b - a) * (fm + fb);
    let refined = left + right;
    let err = (refined - whole) / 3.0;
    // Never accept the first few levels: a symmetric integrand can make the
    // coarse estimates agree by accident.
    let share = tol * (b - a).abs() / total;
    if depth == 0 || ((b - a).abs() < total / 16.0 && err.abs() <= share) {
        return refined + err;
    }
    trapezoid_rec(f, a, m, fa, fm, left, tol, total, depth - 1)
        + trapezoid_rec(f, m, b, fm, fb, right, tol, total, depth - 1)
}

/// Natural cubic spline through strictly increasing knots.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub(crate) fn new(t: Vec<f64>, y: Vec<f64>) -> Option<Self> {
        let n = t.len();
        if n < 2 || y.len() != n || t.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm for the interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                let h0 = t[i + 1] - t[i];
                let h1 = t[i + 2] - t[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; k];
            sol[k - 1] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Some(CubicSpline { t, y, m })
    }

    pub(crate) fn domain(&self) -> (f64, f64) {
        (self.t[0], *self.t.last().unwrap())
    }

    fn segment(&self, x: f64) -> usize {
        match self.t.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.t.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.t.len() - 2),
        }
    }

    /// Value and first three derivatives at `x` (extrapolated linearly
    /// outside the knot range, like the natural end conditions imply).
    pub(crate) fn eval(&self, x: f64) -> [f64; 4] {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let d2 = a * m0 + b * m1;
        let d3 = (m1 - m0) / h;
        [value, d1, d2, d3]
    }
}

/// SplitMix64 output function applied to a counter. Consecutive counters
/// give a high-quality stream, and any position can be drawn directly.
#[inline]
pub(crate) fn splitmix64(counter: u64) -> u64 {
    let mut z = counter.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in (0, 1), never exactly zero.
#[inline]
pub(crate) fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Keyed random stream: the value at `(key, index)` is fixed regardless of
/// evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub(crate) fn new(seed: u64, domain: u64) -> Self {
        CounterRng {
            key: splitmix64(seed ^ splitmix64(domain.wrapping_add(0x5EED))),
        }
    }

    #[inline]
    pub(crate) fn bits(&self, index: u64) -> u64 {
        splitmix64(self.key.wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03)))
    }

    #[inline]
    pub(crate) fn uniform(&self, index: u64) -> f64 {
        unit_open(self.bits(index))
    }

    /// Pair of independent standard normals from two consecutive counters
    /// (Box-Muller).
    #[inline]
    pub(crate) fn normal_pair(&self, index: u64) -> (f64, f64) {
        let u1 = self.uniform(2 * index);
        let u2 = self.uniform(2 * index + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        (r * theta.cos(), r * theta.sin())
    }
}
