//! Target trajectory prediction.
//!
//! The last `m + 1` observations, spaced `tau` apart, are fitted with a
//! degree-`2m` Bezier curve on `[-T, T]` (`T = m tau`) that interpolates every
//! observation at `t = i tau - T` and has the least integrated squared
//! acceleration. Past observations live at `t <= 0`; `t > 0` is the forecast.

use std::collections::VecDeque;

use nalgebra::{DMatrix, LU};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Uniformly spaced observations `h_0 .. h_m`, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBuffer {
    interval: f64,
    positions: Vec<Vec3>,
    /// Time of `h_m`, seconds.
    timestamp: f64,
}

impl ObservationBuffer {
    pub fn new(interval: f64, positions: Vec<Vec3>, timestamp: f64) -> Result<Self> {
        if !(interval > 0.0) || !interval.is_finite() {
            return Err(Error::InvalidParameter(format!("observation interval must be positive, got {interval}")));
        }
        if positions.len() < 2 {
            return Err(Error::BufferNotReady);
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFiniteObservation(i));
        }
        Ok(Self {
            interval,
            positions,
            timestamp,
        })
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    /// Number of intervals `m` (one less than the number of positions).
    pub fn intervals(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }
}

/// Raw, irregularly timed detections, resampled on demand onto the
/// `tau` grid that ends at the latest detection.
#[derive(Debug, Clone)]
pub struct DetectionHistory {
    interval: f64,
    intervals: usize,
    raw: VecDeque<(f64, Vec3)>,
}

impl DetectionHistory {
    pub fn new(interval: f64, intervals: usize) -> Result<Self> {
        if !(interval > 0.0) || intervals == 0 {
            return Err(Error::InvalidParameter("history needs interval > 0 and at least one interval".into()));
        }
        Ok(Self {
            interval,
            intervals,
            raw: VecDeque::new(),
        })
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Appends a detection. Detections at or before the latest time replace
    /// nothing and are ignored.
    pub fn push(&mut self, time: f64, position: Vec3) {
        if !time.is_finite() || !position.iter().all(|v| v.is_finite()) {
            return;
        }
        if let Some(&(last, _)) = self.raw.back() {
            if time <= last {
                return;
            }
        }
        self.raw.push_back((time, position));
        // keep the newest sample at or before the window start
        let start = time - self.span();
        while self.raw.len() > 2 && self.raw[1].0 <= start {
            self.raw.pop_front();
        }
    }

    fn span(&self) -> f64 {
        self.interval * self.intervals as f64
    }

    pub fn last_time(&self) -> Option<f64> {
        self.raw.back().map(|r| r.0)
    }

    pub fn is_ready(&self) -> bool {
        match (self.raw.front(), self.raw.back()) {
            (Some(a), Some(b)) => a.0 <= b.0 - self.span() + 1e-9,
            _ => false,
        }
    }

    fn position_at(&self, t: f64) -> Vec3 {
        let i = self.raw.partition_point(|r| r.0 <= t);
        if i == 0 {
            return self.raw[0].1;
        }
        if i == self.raw.len() {
            return self.raw[i - 1].1;
        }
        let (t0, p0) = self.raw[i - 1];
        let (t1, p1) = self.raw[i];
        let s = (t - t0) / (t1 - t0);
        p0 + (p1 - p0) * s
    }

    /// Resampled window ending at the latest detection.
    pub fn buffer(&self) -> Result<ObservationBuffer> {
        if !self.is_ready() {
            return Err(Error::BufferNotReady);
        }
        let last = self.last_time().unwrap();
        let positions = (0..=self.intervals)
            .map(|i| self.position_at(last - (self.intervals - i) as f64 * self.interval))
            .collect();
        ObservationBuffer::new(self.interval, positions, last)
    }
}

/// Bezier curve on `[-horizon, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierCurve {
    control: Vec<Vec3>,
    horizon: f64,
}

impl BezierCurve {
    pub fn new(control: Vec<Vec3>, horizon: f64) -> Result<Self> {
        if control.is_empty() || !(horizon > 0.0) {
            return Err(Error::InvalidParameter("curve needs control points and a positive horizon".into()));
        }
        Ok(Self { control, horizon })
    }

    /// Constant curve through a single point.
    pub fn stationary(p: Vec3, horizon: f64) -> Self {
        Self {
            control: vec![p; 3],
            horizon,
        }
    }

    pub fn degree(&self) -> usize {
        self.control.len() - 1
    }

    pub fn control_points(&self) -> &[Vec3] {
        &self.control
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn param(&self, t: f64) -> f64 {
        (t.clamp(-self.horizon, self.horizon) + self.horizon) / (2.0 * self.horizon)
    }

    /// Position at `clamp(t, -T, T)`.
    pub fn eval(&self, t: f64) -> Vec3 {
        de_casteljau(&self.control, self.param(t))
    }

    /// Position and time derivative of `t -> eval(t)`; the derivative is zero
    /// where the argument is clamped.
    pub fn eval_with_velocity(&self, t: f64) -> (Vec3, Vec3) {
        let p = self.eval(t);
        if t < -self.horizon || t > self.horizon || self.control.len() < 2 {
            return (p, Vec3::zeros());
        }
        let n = self.degree() as f64;
        let hodo: Vec<Vec3> = self.control.windows(2).map(|w| (w[1] - w[0]) * (n / (2.0 * self.horizon))).collect();
        (p, de_casteljau(&hodo, self.param(t)))
    }

    /// Second time derivative inside the domain.
    pub fn acceleration(&self, t: f64) -> Vec3 {
        if self.control.len() < 3 {
            return Vec3::zeros();
        }
        let n = self.degree() as f64;
        let scale = n * (n - 1.0) / (4.0 * self.horizon * self.horizon);
        let second: Vec<Vec3> = self.control.windows(3).map(|w| (w[2] - 2.0 * w[1] + w[0]) * scale).collect();
        de_casteljau(&second, self.param(t))
    }
}

fn de_casteljau(points: &[Vec3], u: f64) -> Vec3 {
    let mut work: Vec<Vec3> = points.to_vec();
    let n = work.len();
    for r in 1..n {
        for i in 0..n - r {
            work[i] = work[i] * (1.0 - u) + work[i + 1] * u;
        }
    }
    work[0]
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn bernstein(n: usize, i: usize, u: f64) -> f64 {
    binomial(n, i) * u.powi(i as i32) * (1.0 - u).powi((n - i) as i32)
}

/// Minimum-acceleration interpolating fit for a fixed `(m, tau)`; the KKT
/// matrix is factored once and reused for every buffer.
#[derive(Debug, Clone)]
pub struct BezierFitter {
    intervals: usize,
    interval: f64,
    kkt: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl BezierFitter {
    pub fn new(intervals: usize, interval: f64) -> Result<Self> {
        if intervals == 0 || !(interval > 0.0) {
            return Err(Error::InvalidParameter("fit needs m >= 1 and tau > 0".into()));
        }
        let m = intervals;
        let n = 2 * m;
        let horizon = m as f64 * interval;
        let nc = n + 1;
        let size = nc + m + 1;

        // Gram of the second derivative in the control-point basis.
        // rho'' = n(n-1)/(2T)^2 sum_i B_i^{n-2}(u) (q_{i+2} - 2 q_{i+1} + q_i), dt = 2T du
        let mut gram = DMatrix::<f64>::zeros(nc, nc);
        let scale = n as f64 * (n as f64 - 1.0) / (4.0 * horizon * horizon);
        for (u, w) in gauss_legendre_unit(n.max(2) - 1) {
            let mut row = vec![0.0; nc];
            for i in 0..=n - 2 {
                let b = scale * bernstein(n - 2, i, u);
                row[i] += b;
                row[i + 1] -= 2.0 * b;
                row[i + 2] += b;
            }
            for a in 0..nc {
                for b in 0..nc {
                    gram[(a, b)] += 2.0 * horizon * w * row[a] * row[b];
                }
            }
        }

        let mut kkt = DMatrix::<f64>::zeros(size, size);
        kkt.view_mut((0, 0), (nc, nc)).copy_from(&(gram * 2.0));
        for k in 0..=m {
            let u = k as f64 / n as f64;
            for i in 0..nc {
                let b = bernstein(n, i, u);
                kkt[(nc + k, i)] = b;
                kkt[(i, nc + k)] = b;
            }
        }
        let lu = kkt.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular("prediction KKT system"));
        }
        Ok(Self {
            intervals,
            interval,
            kkt: lu,
        })
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn matches(&self, buffer: &ObservationBuffer) -> bool {
        buffer.intervals() == self.intervals && buffer.interval() == self.interval
    }

    pub fn fit(&self, buffer: &ObservationBuffer) -> Result<BezierCurve> {
        if !self.matches(buffer) {
            return Err(Error::ShapeMismatch(format!(
                "fitter built for m={} tau={}, buffer has m={} tau={}",
                self.intervals,
                self.interval,
                buffer.intervals(),
                buffer.interval()
            )));
        }
        let m = self.intervals;
        let nc = 2 * m + 1;
        let mut rhs = DMatrix::<f64>::zeros(nc + m + 1, 3);
        for (k, h) in buffer.positions().iter().enumerate() {
            for a in 0..3 {
                rhs[(nc + k, a)] = h[a];
            }
        }
        let sol = self.kkt.solve(&rhs).ok_or(Error::Singular("prediction KKT system"))?;
        let control = (0..nc).map(|i| Vec3::new(sol[(i, 0)], sol[(i, 1)], sol[(i, 2)])).collect();
        BezierCurve::new(control, m as f64 * self.interval)
    }
}

/// One-shot fit; builds a fresh [`BezierFitter`].
pub fn fit_prediction(buffer: &ObservationBuffer) -> Result<BezierCurve> {
    BezierFitter::new(buffer.intervals(), buffer.interval())?.fit(buffer)
}
