//! Tracking objective: visibility terms integrated along the trajectory,
//! jerk energy with a duration regularizer, and feasibility penalties.
//!
//! Every sampled term is written as an integrand of the trajectory state at
//! a sample plus the sample's global time; [`integrate_cost`] turns that
//! into a value and a gradient over coefficients and durations.

use crate::field::{collision_cost, FovParams, ScalarField3};
use crate::geometry::{yaw_rotation, yaw_rotation_derivative, Vec3, YawPose};
use crate::minco::{basis, CoeffGradient, MincoTrajectory, TrajectoryGradient, TrajectoryState};
use crate::prediction::BezierCurve;
use crate::world::OccupancyWorld;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub occlusion: f64,
    pub observation: f64,
    pub angle: f64,
    pub penalty: f64,
    /// Weight of the duration regularizer.
    pub time: f64,
    pub max_velocity: f64,
    pub max_acceleration: f64,
    pub max_yaw_rate: f64,
    pub max_yaw_acceleration: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            occlusion: 100.0,
            observation: 1e3,
            angle: 1e4,
            penalty: 1e5,
            time: 1e5,
            max_velocity: 2.0,
            max_acceleration: 4.0,
            max_yaw_rate: 1.5,
            max_yaw_acceleration: 3.0,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.occlusion, self.observation, self.angle, self.penalty, self.time];
        if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(crate::Error::InvalidParameter("cost weights must be finite and nonnegative".into()));
        }
        let l = [self.max_velocity, self.max_acceleration, self.max_yaw_rate, self.max_yaw_acceleration];
        if l.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(crate::Error::InvalidParameter("kinematic limits must be positive".into()));
        }
        Ok(())
    }

    /// Sets a weight by name; returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "occlusion" | "lambda_o" => &mut self.occlusion,
            "observation" | "lambda_v" | "lambda_d" => &mut self.observation,
            "angle" | "lambda_a" => &mut self.angle,
            "penalty" | "lambda_p" => &mut self.penalty,
            "time" | "gamma" => &mut self.time,
            "max_velocity" | "v1" => &mut self.max_velocity,
            "max_acceleration" | "v2" => &mut self.max_acceleration,
            "max_yaw_rate" | "w1" => &mut self.max_yaw_rate,
            "max_yaw_acceleration" | "w2" => &mut self.max_yaw_acceleration,
            _ => return false,
        };
        *slot = value;
        true
    }
}

/// Trapezoid sample counts per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationRule {
    pub counts: Vec<usize>,
}

impl IntegrationRule {
    /// Sample spacing targeted by [`IntegrationRule::for_durations`], seconds.
    pub const SPACING: f64 = 0.05;

    /// `k_i = max(8, ceil(t_i / 0.05))`.
    pub fn for_durations(durations: &[f64]) -> Self {
        Self {
            counts: durations
                .iter()
                .map(|t| ((t / Self::SPACING).ceil() as usize).max(8))
                .collect(),
        }
    }

    pub fn uniform(segments: usize, k: usize) -> Self {
        Self {
            counts: vec![k.max(2); segments],
        }
    }

    /// Trapezoid weight of sample `j` out of `0..=k`.
    pub fn eta(j: usize, k: usize) -> f64 {
        if j == 0 || j == k {
            0.5
        } else {
            1.0
        }
    }
}

/// One trajectory sample handed to an integrand.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub state: TrajectoryState,
    /// Time since the trajectory start.
    pub time: f64,
}

/// Integrand value and its partial derivatives with respect to the sampled
/// derivatives (orders 0..=2) of position and yaw and to the sample time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SampleGrad {
    pub value: f64,
    pub d_position: [Vec3; 3],
    pub d_yaw: [f64; 3],
    pub d_time: f64,
}

impl SampleGrad {
    fn add_scaled(&mut self, o: &SampleGrad, s: f64) {
        self.value += s * o.value;
        for h in 0..3 {
            self.d_position[h] += s * o.d_position[h];
            self.d_yaw[h] += s * o.d_yaw[h];
        }
        self.d_time += s * o.d_time;
    }
}

/// Value of a cost term with its coefficient-space gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TermValue {
    pub value: f64,
    pub grad: CoeffGradient,
}

fn derivative(state: &TrajectoryState, order: usize) -> (Vec3, f64) {
    match order {
        0 => (state.position, state.yaw),
        1 => (state.velocity, state.yaw_rate),
        2 => (state.acceleration, state.yaw_acceleration),
        _ => (state.jerk, state.yaw_jerk),
    }
}

/// `sum_i t_i/k_i sum_j eta_j f(sample_ij)` and its gradient.
///
/// The duration gradient includes the shift of every later sample's global
/// time, so integrands that depend on absolute time (through the target
/// prediction) are differentiated exactly.
pub fn integrate_cost<F>(traj: &MincoTrajectory, rule: &IntegrationRule, mut f: F) -> TermValue
where
    F: FnMut(&Sample) -> SampleGrad,
{
    let m = traj.segments();
    assert_eq!(rule.counts.len(), m, "integration rule does not match trajectory");
    let mut grad = CoeffGradient::zeros(m);
    let mut value = 0.0;
    let mut time_sums = vec![0.0; m];
    let mut start = 0.0;
    for i in 0..m {
        let t = traj.durations()[i];
        let k = rule.counts[i];
        let step = t / k as f64;
        for j in 0..=k {
            let frac = j as f64 / k as f64;
            let s = frac * t;
            let eta = IntegrationRule::eta(j, k);
            let state = traj.segment_state(i, s);
            let g = f(&Sample {
                state,
                time: start + s,
            });
            if g == SampleGrad::default() {
                continue;
            }
            let w = eta * step;
            value += w * g.value;
            let mut chain = g.d_time;
            for h in 0..3 {
                let dp = g.d_position[h];
                let dy = g.d_yaw[h];
                if dp == Vec3::zeros() && dy == 0.0 {
                    continue;
                }
                let b = basis(h, s);
                let gc = &mut grad.coeffs[i];
                for p in h..6 {
                    let wb = w * b[p];
                    gc[p][0] += wb * dp.x;
                    gc[p][1] += wb * dp.y;
                    gc[p][2] += wb * dp.z;
                    gc[p][3] += wb * dy;
                }
                let (next_p, next_y) = derivative(&state, h + 1);
                chain += dp.dot(&next_p) + dy * next_y;
            }
            grad.durations[i] += eta / k as f64 * g.value + w * chain * frac;
            time_sums[i] += w * g.d_time;
        }
        start += t;
    }
    // later samples move with every earlier duration
    let mut suffix = 0.0;
    for i in (0..m).rev() {
        grad.durations[i] += suffix;
        suffix += time_sums[i];
    }
    TermValue { value, grad }
}

/// Fixed inputs of one optimization.
#[derive(Debug, Clone)]
pub struct EvaluationContext<'a> {
    pub prediction: &'a BezierCurve,
    /// Prediction-clock time at trajectory start (nonzero while the target is lost).
    pub time_offset: f64,
    pub fov_field: &'a ScalarField3,
    pub robot_field: &'a ScalarField3,
    /// Obstacle points for the occlusion term.
    pub obstacles: Vec<Vec3>,
    /// Obstacle points for the collision penalty.
    pub collision_points: Vec<Vec3>,
    pub weights: CostWeights,
    pub rule: IntegrationRule,
    /// Duration the regularizer pulls the total toward.
    pub reference_duration: f64,
    fov: FovParams,
    peak: f64,
}

impl<'a> EvaluationContext<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        prediction: &'a BezierCurve,
        time_offset: f64,
        fov_field: &'a ScalarField3,
        robot_field: &'a ScalarField3,
        obstacles: Vec<Vec3>,
        collision_points: Vec<Vec3>,
        weights: CostWeights,
        rule: IntegrationRule,
        reference_duration: f64,
    ) -> Result<Self> {
        let fov = *fov_field
            .fov()
            .ok_or_else(|| crate::Error::InvalidParameter("visibility field has no camera parameters".into()))?;
        let peak = fov_field.interpolate(&Vec3::new(fov.distance, 0.0, 0.0)).value;
        Ok(Self {
            prediction,
            time_offset,
            fov_field,
            robot_field,
            obstacles,
            collision_points,
            weights,
            rule,
            reference_duration,
            fov,
            peak,
        })
    }

    pub fn fov(&self) -> &FovParams {
        &self.fov
    }

    /// Field value at the preferred observation point.
    pub fn peak_value(&self) -> f64 {
        self.peak
    }

    /// Target position and velocity at trajectory time `t`; the prediction
    /// is held at its horizon end beyond `T`.
    pub fn target(&self, t: f64) -> (Vec3, Vec3) {
        let tau = self.time_offset + t;
        let horizon = self.prediction.horizon();
        if tau >= horizon {
            (self.prediction.eval(horizon), Vec3::zeros())
        } else {
            self.prediction.eval_with_velocity(tau)
        }
    }
}

fn pyramid_reach(fov: &FovParams) -> f64 {
    fov.depth * (1.0 + fov.tan_half_alpha().powi(2) + fov.tan_half_beta().powi(2)).sqrt()
}

/// `f_o = 1/2 (sum_k Xi(R(psi)(w_k - p)))^2` at one sample.
pub fn occlusion_integrand(ctx: &EvaluationContext<'_>, sample: &Sample) -> SampleGrad {
    let st = &sample.state;
    let rot = yaw_rotation(st.yaw);
    let drot = yaw_rotation_derivative(st.yaw);
    let reach2 = pyramid_reach(&ctx.fov).powi(2);
    let mut sum = 0.0;
    let mut d_pos = Vec3::zeros();
    let mut d_yaw = 0.0;
    for w in &ctx.obstacles {
        let rel = w - st.position;
        if rel.norm_squared() > reach2 {
            continue;
        }
        let b = rot * rel;
        if !ctx.fov.contains(&b) {
            continue;
        }
        let s = ctx.fov_field.interpolate(&b);
        if s.value <= 0.0 && s.gradient == Vec3::zeros() {
            continue;
        }
        sum += s.value;
        d_pos -= rot.transpose() * s.gradient;
        d_yaw += (drot * rel).dot(&s.gradient);
    }
    if sum == 0.0 {
        return SampleGrad::default();
    }
    SampleGrad {
        value: 0.5 * sum * sum,
        d_position: [sum * d_pos, Vec3::zeros(), Vec3::zeros()],
        d_yaw: [sum * d_yaw, 0.0, 0.0],
        d_time: 0.0,
    }
}

/// `f_v = 1/2 (Xi(d e_1) - Xi(R(psi)(rho - p)))^2` at one sample.
pub fn observation_integrand(ctx: &EvaluationContext<'_>, sample: &Sample) -> SampleGrad {
    let st = &sample.state;
    let (rho, rho_dot) = ctx.target(sample.time);
    let delta = rho - st.position;
    let rot = yaw_rotation(st.yaw);
    let q = rot * delta;
    let s = ctx.fov_field.interpolate(&q);
    let e = ctx.peak - s.value;
    // df/dq = -e grad
    let gq = -e * s.gradient;
    SampleGrad {
        value: 0.5 * e * e,
        d_position: [-(rot.transpose() * gq), Vec3::zeros(), Vec3::zeros()],
        d_yaw: [gq.dot(&(yaw_rotation_derivative(st.yaw) * delta)), 0.0, 0.0],
        d_time: gq.dot(&(rot * rho_dot)),
    }
}

/// `f_a = 1 - cos(psi - phi)` with `phi` the horizontal bearing to the target.
pub fn angle_integrand(ctx: &EvaluationContext<'_>, sample: &Sample) -> SampleGrad {
    let st = &sample.state;
    let (rho, rho_dot) = ctx.target(sample.time);
    let delta = rho - st.position;
    let r2 = delta.x * delta.x + delta.y * delta.y;
    if r2 <= 1e-12 {
        return SampleGrad::default();
    }
    let phi = delta.y.atan2(delta.x);
    let (sn, cs) = (st.yaw - phi).sin_cos();
    // dphi/ddelta = (-dy, dx) / r^2
    let dphi = Vec3::new(-delta.y, delta.x, 0.0) / r2;
    SampleGrad {
        value: 1.0 - cs,
        d_position: [sn * dphi, Vec3::zeros(), Vec3::zeros()],
        d_yaw: [sn, 0.0, 0.0],
        d_time: -sn * dphi.dot(&rho_dot),
    }
}

fn cubic_hinge(x: f64) -> (f64, f64) {
    if x > 0.0 {
        (x * x * x, 3.0 * x * x)
    } else {
        (0.0, 0.0)
    }
}

/// Collision and kinematic-limit penalties at one sample.
pub fn penalty_integrand(ctx: &EvaluationContext<'_>, sample: &Sample) -> SampleGrad {
    let st = &sample.state;
    let w = &ctx.weights;
    let mut g = SampleGrad::default();
    if !ctx.collision_points.is_empty() {
        let c = collision_cost(ctx.robot_field, &ctx.collision_points, &st.position, st.yaw);
        g.value += c.value;
        g.d_position[0] += c.d_position;
        g.d_yaw[0] += c.d_yaw;
    }
    for (order, limit) in [(1, w.max_velocity), (2, w.max_acceleration)] {
        let (v, _) = derivative(st, order);
        let (h, dh) = cubic_hinge(v.norm_squared() - limit * limit);
        g.value += h;
        g.d_position[order] += 2.0 * dh * v;
    }
    for (order, limit) in [(1, w.max_yaw_rate), (2, w.max_yaw_acceleration)] {
        let (_, y) = derivative(st, order);
        let (h, dh) = cubic_hinge(y * y - limit * limit);
        g.value += h;
        g.d_yaw[order] += 2.0 * dh * y;
    }
    g
}

pub fn occlusion_cost(traj: &MincoTrajectory, ctx: &EvaluationContext<'_>) -> TermValue {
    integrate_cost(traj, &ctx.rule, |s| occlusion_integrand(ctx, s))
}

pub fn observation_cost(traj: &MincoTrajectory, ctx: &EvaluationContext<'_>) -> TermValue {
    integrate_cost(traj, &ctx.rule, |s| observation_integrand(ctx, s))
}

pub fn angle_cost(traj: &MincoTrajectory, ctx: &EvaluationContext<'_>) -> TermValue {
    integrate_cost(traj, &ctx.rule, |s| angle_integrand(ctx, s))
}

pub fn penalty_cost(traj: &MincoTrajectory, ctx: &EvaluationContext<'_>) -> TermValue {
    integrate_cost(traj, &ctx.rule, |s| penalty_integrand(ctx, s))
}

/// Exact jerk energy plus `gamma (T - sum t_i)^2`.
pub fn energy_cost(traj: &MincoTrajectory, gamma: f64, reference_duration: f64) -> TermValue {
    let (mut value, mut grad) = traj.jerk_energy();
    let gap = reference_duration - traj.total_duration();
    value += gamma * gap * gap;
    for g in &mut grad.durations {
        *g -= 2.0 * gamma * gap;
    }
    TermValue { value, grad }
}

/// Individual weighted contributions to the total.
#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct CostBreakdown {
    pub occlusion: f64,
    pub observation: f64,
    pub angle: f64,
    pub energy: f64,
    pub penalty: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.occlusion + self.observation + self.angle + self.energy + self.penalty
    }
}

/// Weighted sum of all terms in coefficient space, sampled in one pass.
pub fn total_coeff_cost(traj: &MincoTrajectory, ctx: &EvaluationContext<'_>) -> (f64, CoeffGradient) {
    let w = ctx.weights;
    let terms: [(f64, fn(&EvaluationContext<'_>, &Sample) -> SampleGrad); 4] = [
        (w.occlusion, occlusion_integrand),
        (w.observation, observation_integrand),
        (w.angle, angle_integrand),
        (w.penalty, penalty_integrand),
    ];
    let sampled = integrate_cost(traj, &ctx.rule, |s| {
        let mut g = SampleGrad::default();
        for (weight, f) in &terms {
            if *weight != 0.0 {
                g.add_scaled(&f(ctx, s), *weight);
            }
        }
        g
    });
    let energy = energy_cost(traj, w.time, ctx.reference_duration);
    let mut grad = sampled.grad;
    grad.add_scaled(&energy.grad, 1.0);
    (sampled.value + energy.value, grad)
}

/// Per-term weighted values (separate passes; for reporting and tests).
pub fn cost_breakdown(traj: &MincoTrajectory, ctx: &EvaluationContext<'_>) -> CostBreakdown {
    let w = ctx.weights;
    CostBreakdown {
        occlusion: w.occlusion * occlusion_cost(traj, ctx).value,
        observation: w.observation * observation_cost(traj, ctx).value,
        angle: w.angle * angle_cost(traj, ctx).value,
        energy: energy_cost(traj, w.time, ctx.reference_duration).value,
        penalty: w.penalty * penalty_cost(traj, ctx).value,
    }
}

/// Total objective and its gradient over waypoints, yaws and durations.
pub fn total_objective(traj: &MincoTrajectory, ctx: &EvaluationContext<'_>) -> Result<(f64, TrajectoryGradient)> {
    let (value, grad) = total_coeff_cost(traj, ctx);
    Ok((value, traj.propagate_gradient(&grad)?))
}

/// Occupied voxels that may enter the view from any of `poses`, merged and
/// thinned to at most `cap` points by farthest-point sampling.
pub fn gather_obstacles(world: &OccupancyWorld, poses: &[YawPose], fov: &FovParams, margin: f64, cap: usize) -> Vec<Vec3> {
    let spec = world.spec();
    let mut keyed: Vec<(usize, Vec3)> = poses
        .iter()
        .flat_map(|p| world.obstacle_points_near_fov(p, fov, margin))
        .filter_map(|p| spec.voxel_of(&p).map(|v| (spec.linear(v), p)))
        .collect();
    keyed.sort_by_key(|k| k.0);
    keyed.dedup_by_key(|k| k.0);
    let points: Vec<Vec3> = keyed.into_iter().map(|k| k.1).collect();
    farthest_point_subsample(&points, cap)
}

/// Keeps the points that could block at least one of the `(eye, target)`
/// sightlines: those no deeper along the sightline than the target plus
/// `slack`. Points well behind the target cannot occlude it.
pub fn keep_possible_occluders(points: Vec<Vec3>, sightlines: &[(Vec3, Vec3)], slack: f64) -> Vec<Vec3> {
    let axes: Vec<(Vec3, Vec3, f64)> = sightlines
        .iter()
        .filter_map(|(eye, target)| {
            let d = target - eye;
            let n = d.norm();
            (n > 1e-9).then(|| (*eye, d / n, n + slack))
        })
        .collect();
    if axes.is_empty() {
        return points;
    }
    points
        .into_iter()
        .filter(|w| axes.iter().any(|(eye, u, limit)| (w - eye).dot(u) <= *limit))
        .collect()
}

/// Replaces the points in each cube of side `leaf` by their centroid, in
/// cell order. A non-positive leaf returns the points unchanged.
pub fn voxel_downsample(points: &[Vec3], leaf: f64) -> Vec<Vec3> {
    if !(leaf > 0.0) {
        return points.to_vec();
    }
    let mut cells: std::collections::BTreeMap<[i64; 3], (Vec3, usize)> = std::collections::BTreeMap::new();
    for p in points {
        let key = [0, 1, 2].map(|a| (p[a] / leaf).floor() as i64);
        let e = cells.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    cells.into_values().map(|(sum, n)| sum / n as f64).collect()
}

/// Greedy farthest-point subset of size `cap`, seeded with the first point.
pub fn farthest_point_subsample(points: &[Vec3], cap: usize) -> Vec<Vec3> {
    if points.len() <= cap {
        return points.to_vec();
    }
    if cap == 0 {
        return Vec::new();
    }
    let mut chosen = Vec::with_capacity(cap);
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut next = 0;
    for _ in 0..cap {
        chosen.push(points[next]);
        let c = points[next];
        let mut best = (0, -1.0);
        for (i, p) in points.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < dist[i] {
                dist[i] = d;
            }
            if dist[i] > best.1 {
                best = (i, dist[i]);
            }
        }
        next = best.0;
    }
    chosen
}

/// Occupied voxels and floor points within `radius` of the polyline through
/// `points`.
pub fn gather_collision_points(world: &OccupancyWorld, points: &[Vec3], radius: f64) -> Vec<Vec3> {
    if points.is_empty() {
        return Vec::new();
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let pad = Vec3::repeat(radius);
    let r2 = radius * radius;
    let (lo, hi) = (lo - pad, hi + pad);
    let mut candidates = world.obstacle_points_in_box(&lo, &hi);
    candidates.extend(world.floor_points_in_box(&lo, &hi));
    candidates
        .into_iter()
        .filter(|w| {
            if points.len() == 1 {
                return (w - points[0]).norm_squared() <= r2;
            }
            points.windows(2).any(|s| segment_distance_squared(w, &s[0], &s[1]) <= r2)
        })
        .collect()
}

fn segment_distance_squared(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm_squared()
}

/// Sampled integrand values of one term along the trajectory, for audits.
pub fn sample_integrand(
    traj: &MincoTrajectory,
    ctx: &EvaluationContext<'_>,
    f: fn(&EvaluationContext<'_>, &Sample) -> SampleGrad,
    spacing: f64,
) -> Vec<(f64, f64)> {
    let total = traj.total_duration();
    let n = ((total / spacing).ceil() as usize).max(1);
    (0..=n)
        .map(|k| {
            let t = total * k as f64 / n as f64;
            let state = traj.eval(t);
            (t, f(ctx, &Sample { state, time: t }).value)
        })
        .collect()
}
