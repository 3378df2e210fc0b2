//! Closed-form population loss of the no-overlap ReLU network under Gaussian
//! inputs, its gradient, critical points and Lipschitz estimates.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{sample_unit_sphere, Rng};
use crate::vector::{angle, RealVector};

/// Ground truth `w*` and patch count `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    w_star: RealVector,
    k: usize,
}

impl ProblemSpec {
    pub fn new(w_star: RealVector, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        w_star.ensure_nondegenerate()?;
        Ok(Self { w_star, k })
    }

    /// Ground truth drawn uniformly from the unit sphere.
    pub fn random(d: usize, k: usize, rng: &mut Rng) -> Result<Self> {
        Self::new(sample_unit_sphere(d, rng), k)
    }

    pub fn w_star(&self) -> &RealVector {
        &self.w_star
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    pub fn w_star_norm(&self) -> f64 {
        self.w_star.norm()
    }

    /// `b = (k² − k) / 2π`
    pub fn b(&self) -> f64 {
        let k = self.k as f64;
        (k * k - k) / (2.0 * PI)
    }

    /// `a = b + k/2`
    pub fn a(&self) -> f64 {
        self.b() + self.k as f64 / 2.0
    }
}

/// `E[σ(u·x) σ(v·x)]` for standard Gaussian `x`, in closed form.
pub fn g_closed(u: &RealVector, v: &RealVector) -> Result<f64> {
    let theta = angle(u, v)?;
    Ok(u.norm() * v.norm() * (theta.sin() + (PI - theta) * theta.cos()) / (2.0 * PI))
}

/// Population loss `f(w)`.
pub fn loss(w: &RealVector, spec: &ProblemSpec) -> Result<f64> {
    w.ensure_len(spec.dim())?;
    let k = spec.k as f64;
    let nw = w.norm();
    let ns = spec.w_star_norm();
    let g = g_closed(w, &spec.w_star)?;
    Ok((spec.a() * (nw * nw + ns * ns) - 2.0 * k * g - 2.0 * spec.b() * nw * ns) / (k * k))
}

/// Analytic gradient of [`loss`]. Defined for every `w ≠ 0`, including
/// `θ ∈ {0, π}`.
pub fn grad(w: &RealVector, spec: &ProblemSpec) -> Result<RealVector> {
    w.ensure_len(spec.dim())?;
    let theta = angle(w, &spec.w_star)?;
    let k = spec.k as f64;
    let ratio = spec.w_star_norm() / w.norm();
    let pair = (k * k - k) / PI;
    let coef_w = k + pair - (k / PI) * ratio * theta.sin() - pair * ratio;
    let coef_star = (k / PI) * (PI - theta);
    Ok(w.scale(coef_w / (k * k)).axpy(-coef_star / (k * k), &spec.w_star))
}

/// Central-difference approximation of the gradient with step `h`.
pub fn finite_diff_grad(w: &RealVector, spec: &ProblemSpec, h: f64) -> Result<RealVector> {
    w.ensure_len(spec.dim())?;
    let norm = w.norm();
    if norm <= 2.0 * h {
        return Err(Error::DegenerateVector { norm });
    }
    let mut probe = w.clone().into_vec();
    let mut out = Vec::with_capacity(w.len());
    for i in 0..w.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fp = loss(&RealVector::from_raw(probe.clone()), spec)?;
        probe[i] = orig - h;
        let fm = loss(&RealVector::from_raw(probe.clone()), spec)?;
        probe[i] = orig;
        out.push((fp - fm) / (2.0 * h));
    }
    Ok(RealVector::from_raw(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    LocalMax,
    GlobalMin,
    Saddle,
}

/// Scale `c` such that `−c·w*` is the degenerate saddle.
pub fn saddle_scale(k: usize) -> f64 {
    let k = k as f64;
    (k * k - k) / (k * k + (PI - 1.0) * k)
}

/// The critical points of `f`: origin, `w*` and the saddle for `k > 1`;
/// only `w*` for `k = 1`.
pub fn critical_points(spec: &ProblemSpec) -> Vec<(RealVector, CriticalKind)> {
    if spec.k == 1 {
        return vec![(spec.w_star.clone(), CriticalKind::GlobalMin)];
    }
    vec![
        (RealVector::zeros(spec.dim()), CriticalKind::LocalMax),
        (spec.w_star.clone(), CriticalKind::GlobalMin),
        (spec.w_star.scale(-saddle_scale(spec.k)), CriticalKind::Saddle),
    ]
}

/// Coplanar Lipschitz bound `1 + 3‖w*‖/M` for iterates with norm at least `M`.
pub fn lipschitz_bound(radius: f64, spec: &ProblemSpec) -> Result<f64> {
    let ns = spec.w_star_norm();
    if !(radius > 0.0 && radius <= ns) {
        return Err(Error::InvalidRadius(radius));
    }
    Ok(1.0 + 3.0 * ns / radius)
}

/// Measured gradient Lipschitz ratio over random pairs lying in a common
/// half-plane through `w*`, with norms in `[M, 3‖w*‖]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LipschitzEstimate {
    pub radius: f64,
    pub bound: f64,
    pub max_ratio: f64,
    /// `max_ratio / bound`
    pub constant: f64,
    pub pairs: usize,
}

pub fn estimate_lipschitz(
    spec: &ProblemSpec,
    radius: f64,
    pairs: usize,
    rng: &mut Rng,
) -> Result<LipschitzEstimate> {
    let bound = lipschitz_bound(radius, spec)?;
    let d = spec.dim();
    let ns = spec.w_star_norm();
    let axis = spec.w_star.scale(1.0 / ns);
    let mut max_ratio: f64 = 0.0;
    for i in 0..pairs {
        // unit vector orthogonal to w*; in 1-D the half-plane degenerates to the axis
        let ortho = if d > 1 {
            loop {
                let g = sample_unit_sphere(d, rng);
                let r = g.axpy(-g.dot(&axis), &axis);
                let n = r.norm();
                if n > 1e-6 {
                    break r.scale(1.0 / n);
                }
            }
        } else {
            RealVector::zeros(1)
        };
        let max_phi = if d > 1 { PI } else { 0.0 };
        let point = |rng: &mut Rng, near: Option<(f64, f64)>| {
            let (r, phi) = match near {
                // alternate far pairs with close pairs to probe the local constant
                Some((r0, p0)) => (
                    (r0 + rng.uniform_in(-0.05, 0.05) * ns).clamp(radius, 3.0 * ns),
                    (p0 + rng.uniform_in(-0.05, 0.05)).clamp(0.0, max_phi),
                ),
                None => (rng.uniform_in(radius, 3.0 * ns), rng.uniform_in(0.0, max_phi)),
            };
            (axis.scale(r * phi.cos()).axpy(r * phi.sin(), &ortho), r, phi)
        };
        let (w1, r1, p1) = point(rng, None);
        let (w2, _, _) = if i % 2 == 0 { point(rng, None) } else { point(rng, Some((r1, p1))) };
        let dist = w1.distance(&w2);
        if dist < 1e-9 {
            continue;
        }
        let ratio = grad(&w1, spec)?.distance(&grad(&w2, spec)?) / dist;
        max_ratio = max_ratio.max(ratio);
    }
    Ok(LipschitzEstimate { radius, bound, max_ratio, constant: max_ratio / bound, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec(d: usize, k: usize, seed: u64) -> ProblemSpec {
        ProblemSpec::random(d, k, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn constants_follow_k() {
        let s = unit_spec(3, 2, 0);
        assert!((s.b() - 1.0 / PI).abs() < 1e-15);
        assert!((s.a() - (1.0 / PI + 1.0)).abs() < 1e-15);
        let s1 = unit_spec(3, 1, 0);
        assert_eq!(s1.b(), 0.0);
        assert_eq!(s1.a(), 0.5);
    }

    #[test]
    fn g_closed_special_angles() {
        let u = RealVector::new(vec![1.0, 0.0]).unwrap();
        let v = RealVector::new(vec![0.0, 1.0]).unwrap();
        assert!((g_closed(&u, &u).unwrap() - 0.5).abs() < 1e-15);
        assert!(g_closed(&u, &u.scale(-1.0)).unwrap().abs() < 1e-15);
        assert!((g_closed(&u, &v).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((1.0 / (2.0 * PI) - 0.159155).abs() < 1e-6);
    }

    #[test]
    fn g_closed_is_homogeneous_and_symmetric() {
        let mut rng = Rng::new(4);
        for _ in 0..50 {
            let u = sample_unit_sphere(5, &mut rng).scale(rng.uniform_in(0.1, 3.0));
            let v = sample_unit_sphere(5, &mut rng).scale(rng.uniform_in(0.1, 3.0));
            let c = rng.uniform_in(0.1, 10.0);
            let g = g_closed(&u, &v).unwrap();
            assert!((g - g_closed(&v, &u).unwrap()).abs() < 1e-15);
            assert!((g_closed(&u.scale(c), &v).unwrap() - c * g).abs() < 1e-12 * (1.0 + c));
        }
    }

    #[test]
    fn loss_at_truth_and_opposite() {
        for k in 1..=8 {
            let s = unit_spec(6, k, k as u64);
            assert!(loss(s.w_star(), &s).unwrap().abs() < 1e-14);
            let opp = s.w_star().scale(-1.0);
            assert!((loss(&opp, &s).unwrap() - 1.0 / k as f64).abs() < 1e-12, "k={k}");
        }
        let s = unit_spec(6, 2, 9);
        assert!((loss(&s.w_star().scale(-1.0), &s).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn loss_rejects_origin_and_shape() {
        let s = unit_spec(3, 2, 0);
        assert!(matches!(loss(&RealVector::zeros(3), &s), Err(Error::DegenerateVector { .. })));
        assert!(matches!(grad(&RealVector::zeros(3), &s), Err(Error::DegenerateVector { .. })));
        let short = RealVector::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(loss(&short, &s).unwrap_err(), Error::ShapeMismatch { expected: 3, got: 2 });
    }

    #[test]
    fn loss_is_rotation_invariant() {
        // Householder reflection applied to both w and w*
        let mut rng = Rng::new(21);
        let s = unit_spec(5, 3, 1);
        let h = sample_unit_sphere(5, &mut rng);
        let reflect = |x: &RealVector| x.axpy(-2.0 * x.dot(&h), &h);
        for _ in 0..20 {
            let w = sample_unit_sphere(5, &mut rng).scale(rng.uniform_in(0.2, 2.0));
            let rs = ProblemSpec::new(reflect(s.w_star()), 3).unwrap();
            let a = loss(&w, &s).unwrap();
            let b = loss(&reflect(&w), &rs).unwrap();
            assert!((a - b).abs() < 1e-13);
            assert!(a >= -1e-12);
        }
    }

    #[test]
    fn gradient_zero_at_truth_and_saddle() {
        for k in 1..=8 {
            let s = unit_spec(7, k, 100 + k as u64);
            assert!(grad(s.w_star(), &s).unwrap().norm() < 1e-14);
            for (p, kind) in critical_points(&s) {
                if kind != CriticalKind::LocalMax {
                    assert!(grad(&p, &s).unwrap().norm() <= 1e-9, "k={k} {kind:?}");
                }
            }
        }
    }

    #[test]
    fn critical_point_listing() {
        let s1 = unit_spec(4, 1, 0);
        let cp = critical_points(&s1);
        assert_eq!(cp.len(), 1);
        assert_eq!(cp[0], (s1.w_star().clone(), CriticalKind::GlobalMin));

        let s2 = unit_spec(4, 2, 0);
        let cp = critical_points(&s2);
        assert_eq!(cp.len(), 3);
        assert_eq!(cp[0].1, CriticalKind::LocalMax);
        assert_eq!(cp[0].0.norm(), 0.0);
        let c = saddle_scale(2);
        assert!((c - 1.0 / (1.0 + PI)).abs() < 1e-15);
        assert!((c - 0.2415).abs() < 1e-4);
        assert!(cp[2].0.distance(&s2.w_star().scale(-c)) < 1e-15);
    }

    #[test]
    fn finite_differences_near_truth_are_small() {
        let s = unit_spec(5, 3, 2);
        let h = 1e-6;
        assert!(finite_diff_grad(s.w_star(), &s, h).unwrap().norm() <= 10.0 * h);
        let tiny = RealVector::new(vec![1e-7, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(finite_diff_grad(&tiny, &s, h).is_err());
    }

    #[test]
    fn finite_differences_converge_second_order() {
        // error against the analytic gradient drops ~4x when h halves
        let s = unit_spec(4, 3, 5);
        let mut rng = Rng::new(6);
        let w = sample_unit_sphere(4, &mut rng).scale(0.8);
        let g = grad(&w, &s).unwrap();
        let e1 = finite_diff_grad(&w, &s, 1e-2).unwrap().distance(&g);
        let e2 = finite_diff_grad(&w, &s, 5e-3).unwrap().distance(&g);
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lipschitz_bound_values() {
        let s = unit_spec(3, 2, 0);
        assert!((lipschitz_bound(1.0, &s).unwrap() - 4.0).abs() < 1e-12);
        assert!((lipschitz_bound(0.5, &s).unwrap() - 7.0).abs() < 1e-12);
        assert_eq!(lipschitz_bound(0.0, &s).unwrap_err(), Error::InvalidRadius(0.0));
        assert!(lipschitz_bound(-1.0, &s).is_err());
        assert!(lipschitz_bound(1.5, &s).is_err());
    }
}
