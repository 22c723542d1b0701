//! Minimum-jerk piecewise quintic through waypoints, for position and yaw.
//!
//! Segment `i` is `c_i^T beta(s)` with `beta(s) = [1, s, .., s^5]` and local
//! time `s` in `[0, t_i]`. Column layout of every coefficient row is
//! `[x, y, z, yaw]`. The coefficients solve a banded system built from head
//! and tail boundary conditions, waypoint interpolation and continuity of
//! derivatives 0..4 at every junction.

use crate::banded::BandedMatrix;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Number of coefficient columns: x, y, z, yaw.
pub const DIMS: usize = 4;

/// Coefficients of one segment, `[power][column]`.
pub type SegmentCoeffs = [[f64; DIMS]; 6];

/// Velocity and acceleration of position and yaw.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rates {
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub yaw_rate: f64,
    pub yaw_acceleration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryState {
    pub position: Vec3,
    pub yaw: f64,
    pub rates: Rates,
}

impl BoundaryState {
    pub fn at_rest(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw,
            rates: Rates::default(),
        }
    }

    fn rows(&self) -> [[f64; DIMS]; 3] {
        let r = &self.rates;
        [
            [self.position.x, self.position.y, self.position.z, self.yaw],
            [r.velocity.x, r.velocity.y, r.velocity.z, r.yaw_rate],
            [r.acceleration.x, r.acceleration.y, r.acceleration.z, r.yaw_acceleration],
        ]
    }
}

/// `d^order/ds^order` of the monomial basis at `s`.
pub fn basis(order: usize, s: f64) -> [f64; 6] {
    let mut out = [0.0; 6];
    for (p, o) in out.iter_mut().enumerate().skip(order) {
        let mut c = 1.0;
        for q in 0..order {
            c *= (p - q) as f64;
        }
        *o = c * s.powi((p - order) as i32);
    }
    out
}

/// Position, yaw and their first three derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_acceleration: f64,
    pub yaw_jerk: f64,
}

/// Gradient of a cost with respect to the free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGradient {
    pub waypoints: Vec<Vec3>,
    pub yaws: Vec<f64>,
    pub durations: Vec<f64>,
}

/// Gradient with respect to the coefficients and (directly) the durations.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffGradient {
    pub coeffs: Vec<SegmentCoeffs>,
    pub durations: Vec<f64>,
}

impl CoeffGradient {
    pub fn zeros(segments: usize) -> Self {
        Self {
            coeffs: vec![[[0.0; DIMS]; 6]; segments],
            durations: vec![0.0; segments],
        }
    }

    pub fn add_scaled(&mut self, other: &CoeffGradient, scale: f64) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += scale * y;
                }
            }
        }
        for (a, b) in self.durations.iter_mut().zip(&other.durations) {
            *a += scale * b;
        }
    }
}

#[derive(Debug, Clone)]
pub struct MincoTrajectory {
    head: BoundaryState,
    tail: Rates,
    waypoints: Vec<Vec3>,
    yaws: Vec<f64>,
    durations: Vec<f64>,
    coeffs: Vec<SegmentCoeffs>,
    system: BandedMatrix,
}

/// Builds the trajectory. `waypoints[i]` and `yaws[i]` are the end of segment
/// `i`; the last entry is the terminal position and yaw, `tail` supplies the
/// terminal derivatives.
pub fn minco_map(
    head: &BoundaryState,
    tail: &Rates,
    waypoints: &[Vec3],
    yaws: &[f64],
    durations: &[f64],
) -> Result<MincoTrajectory> {
    let m = durations.len();
    if m == 0 {
        return Err(Error::InvalidParameter("trajectory needs at least one segment".into()));
    }
    if waypoints.len() != m || yaws.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{m} durations but {} waypoints and {} yaws",
            waypoints.len(),
            yaws.len()
        )));
    }
    if let Some(t) = durations.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(format!("segment duration must be positive, got {t}")));
    }
    let n = 6 * m;
    let mut a = BandedMatrix::zeros(n, 6, 6);
    let mut rhs = vec![0.0; n * DIMS];
    let head_rows = head.rows();
    a.set(0, 0, 1.0);
    a.set(1, 1, 1.0);
    a.set(2, 2, 2.0);
    rhs[..3 * DIMS].copy_from_slice(head_rows.as_flattened());

    for i in 0..m - 1 {
        let t = durations[i];
        let c0 = 6 * i;
        let c1 = 6 * (i + 1);
        let row = |k: usize| 6 * i + 3 + k;
        let set_row = |a: &mut BandedMatrix, r: usize, order: usize| {
            for (p, v) in basis(order, t).iter().enumerate() {
                if *v != 0.0 {
                    a.set(r, c0 + p, *v);
                }
            }
        };
        set_row(&mut a, row(0), 3);
        a.set(row(0), c1 + 3, -6.0);
        set_row(&mut a, row(1), 4);
        a.set(row(1), c1 + 4, -24.0);
        set_row(&mut a, row(2), 0);
        set_row(&mut a, row(3), 0);
        a.set(row(3), c1, -1.0);
        set_row(&mut a, row(4), 1);
        a.set(row(4), c1 + 1, -1.0);
        set_row(&mut a, row(5), 2);
        a.set(row(5), c1 + 2, -2.0);
        let w = &waypoints[i];
        rhs[row(2) * DIMS..row(2) * DIMS + DIMS].copy_from_slice(&[w.x, w.y, w.z, yaws[i]]);
    }

    let t = durations[m - 1];
    let c0 = 6 * (m - 1);
    for (k, order) in [0usize, 1, 2].iter().enumerate() {
        for (p, v) in basis(*order, t).iter().enumerate() {
            if *v != 0.0 {
                a.set(n - 3 + k, c0 + p, *v);
            }
        }
    }
    let w = &waypoints[m - 1];
    let tail_rows = [
        [w.x, w.y, w.z, yaws[m - 1]],
        [tail.velocity.x, tail.velocity.y, tail.velocity.z, tail.yaw_rate],
        [tail.acceleration.x, tail.acceleration.y, tail.acceleration.z, tail.yaw_acceleration],
    ];
    rhs[(n - 3) * DIMS..].copy_from_slice(tail_rows.as_flattened());

    a.factor()?;
    a.solve_in_place(&mut rhs, DIMS);
    let coeffs = rhs
        .chunks_exact(6 * DIMS)
        .map(|seg| std::array::from_fn(|p| std::array::from_fn(|d| seg[p * DIMS + d])))
        .collect();

    Ok(MincoTrajectory {
        head: *head,
        tail: *tail,
        waypoints: waypoints.to_vec(),
        yaws: yaws.to_vec(),
        durations: durations.to_vec(),
        coeffs,
        system: a,
    })
}

fn eval_column(c: &SegmentCoeffs, order: usize, s: f64, d: usize) -> f64 {
    // Horner on the differentiated polynomial
    let mut acc = 0.0;
    for p in (order..6).rev() {
        let mut k = 1.0;
        for q in 0..order {
            k *= (p - q) as f64;
        }
        acc = acc * s + k * c[p][d];
    }
    acc
}

impl MincoTrajectory {
    pub fn segments(&self) -> usize {
        self.durations.len()
    }

    pub fn head(&self) -> &BoundaryState {
        &self.head
    }

    pub fn tail(&self) -> &Rates {
        &self.tail
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn yaws(&self) -> &[f64] {
        &self.yaws
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn coeffs(&self) -> &[SegmentCoeffs] {
        &self.coeffs
    }

    pub fn total_duration(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Derivative `order` of column `d` of segment `i` at local time `s`.
    pub fn segment_value(&self, i: usize, order: usize, s: f64, d: usize) -> f64 {
        eval_column(&self.coeffs[i], order, s, d)
    }

    pub fn segment_state(&self, i: usize, s: f64) -> TrajectoryState {
        let c = &self.coeffs[i];
        let v = |order: usize| Vec3::new(eval_column(c, order, s, 0), eval_column(c, order, s, 1), eval_column(c, order, s, 2));
        TrajectoryState {
            position: v(0),
            velocity: v(1),
            acceleration: v(2),
            jerk: v(3),
            yaw: eval_column(c, 0, s, 3),
            yaw_rate: eval_column(c, 1, s, 3),
            yaw_acceleration: eval_column(c, 2, s, 3),
            yaw_jerk: eval_column(c, 3, s, 3),
        }
    }

    /// Segment index and local time for a global time, clamped to the
    /// trajectory span.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let mut s = t.max(0.0);
        for (i, &d) in self.durations.iter().enumerate() {
            if s <= d || i + 1 == self.durations.len() {
                return (i, s.min(d));
            }
            s -= d;
        }
        unreachable!()
    }

    pub fn eval(&self, t: f64) -> TrajectoryState {
        let (i, s) = self.locate(t);
        self.segment_state(i, s)
    }

    /// Maps a coefficient-space gradient to waypoints, yaws and durations
    /// with one transposed banded solve.
    pub fn propagate_gradient(&self, grad: &CoeffGradient) -> Result<TrajectoryGradient> {
        let m = self.segments();
        if grad.coeffs.len() != m || grad.durations.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "gradient for {} segments, trajectory has {m}",
                grad.coeffs.len()
            )));
        }
        let n = 6 * m;
        let mut adj: Vec<f64> = grad.coeffs.iter().flat_map(|s| s.as_flattened().iter().copied()).collect();
        self.system.solve_transpose_in_place(&mut adj, DIMS);
        let lam = |r: usize| &adj[r * DIMS..r * DIMS + DIMS];

        let mut waypoints = Vec::with_capacity(m);
        let mut yaws = Vec::with_capacity(m);
        for i in 0..m {
            let r = if i + 1 < m { 6 * i + 5 } else { n - 3 };
            let l = lam(r);
            waypoints.push(Vec3::new(l[0], l[1], l[2]));
            yaws.push(l[3]);
        }

        // d(A c)/dt_i: the k-th derivative row becomes the (k+1)-th
        let mut durations = grad.durations.clone();
        for (i, dt) in durations.iter_mut().enumerate() {
            let t = self.durations[i];
            let c = &self.coeffs[i];
            let rows: &[(usize, usize)] = if i + 1 < m {
                &[(3, 4), (4, 5), (5, 1), (6, 1), (7, 2), (8, 3)]
            } else {
                &[(0, 1), (1, 2), (2, 3)]
            };
            let base = if i + 1 < m { 6 * i } else { n - 3 };
            for &(off, order) in rows {
                let l = lam(base + off);
                for (d, ld) in l.iter().enumerate() {
                    *dt -= ld * eval_column(c, order, t, d);
                }
            }
        }
        Ok(TrajectoryGradient {
            waypoints,
            yaws,
            durations,
        })
    }

    /// Exact `sum_i int_0^{t_i} |p'''|^2 + (psi''')^2` with its coefficient
    /// and duration gradients.
    pub fn jerk_energy(&self) -> (f64, CoeffGradient) {
        let mut grad = CoeffGradient::zeros(self.segments());
        let mut total = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let t = self.durations[i];
            let (t2, t3, t4, t5) = (t * t, t * t * t, t.powi(4), t.powi(5));
            for d in 0..DIMS {
                let (c3, c4, c5) = (c[3][d], c[4][d], c[5][d]);
                total += 36.0 * c3 * c3 * t
                    + 144.0 * c4 * c3 * t2
                    + 192.0 * c4 * c4 * t3
                    + 240.0 * c5 * c3 * t3
                    + 720.0 * c5 * c4 * t4
                    + 720.0 * c5 * c5 * t5;
                let g = &mut grad.coeffs[i];
                g[3][d] += 72.0 * c3 * t + 144.0 * c4 * t2 + 240.0 * c5 * t3;
                g[4][d] += 144.0 * c3 * t2 + 384.0 * c4 * t3 + 720.0 * c5 * t4;
                g[5][d] += 240.0 * c3 * t3 + 720.0 * c4 * t4 + 1440.0 * c5 * t5;
                grad.durations[i] += 36.0 * c3 * c3
                    + 288.0 * c4 * c3 * t
                    + 576.0 * c4 * c4 * t2
                    + 720.0 * c5 * c3 * t2
                    + 2880.0 * c5 * c4 * t3
                    + 3600.0 * c5 * c5 * t4;
            }
        }
        (total, grad)
    }
}
