use super::*;
use crate::field_models::{ConstantField, FixedDirectionField, HarmonicField};
use crate::Mat3;

/// Closed-form helix in a constant field b·e₃, written out by hand.
fn helix_oracle(b: f64, eps: f64, s: &PhaseState, t: f64) -> PhaseState {
    let g = s.gamma();
    let w = b / (eps * g);
    let (sn, cs) = (w * t).sin_cos();
    let (a, c, z) = (s.xi.x, s.xi.y, s.xi.z);
    let xi = Vec3::new(a * cs - c * sn, a * sn + c * cs, z);
    let x = s.x + Vec3::new(a * sn + c * (cs - 1.0), a * (1.0 - cs) + c * sn, z * w * t) / (g * w);
    PhaseState::new(x, xi)
}

fn dist(a: &PhaseState, b: &PhaseState) -> f64 {
    (a.x - b.x).norm().max((a.xi - b.xi).norm())
}

#[test]
fn constant_field_is_integrated_exactly() {
    let m = ConstantField::along_e3(1.3);
    let s = PhaseState::new(Vec3::new(0.1, -0.2, 0.3), Vec3::new(0.7, -0.4, 0.25));
    let times = [0.5, 1.7, 3.0];
    let traj = integrate_linear(&m, s, &times, IntegratorConfig::new(0.05)).unwrap();
    for (t, got) in times.iter().zip(&traj.states) {
        assert!(dist(got, &helix_oracle(1.3, 0.05, &s, *t)) < 1e-12, "t = {t}");
    }
    assert!(traj.max_norm_drift < 1e-13);
}

#[test]
fn rk4_reference_agrees_on_constant_field() {
    let m = ConstantField::along_e3(1.0);
    let s = PhaseState::new(Vec3::zeros(), Vec3::new(0.5, 0.1, -0.3));
    let cfg = IntegratorConfig::new(0.1).with_scheme(Scheme::Rk4).with_steps(512);
    let end = FlowSystem::linear(&m, cfg).unwrap().flow(s, 1.0).unwrap();
    assert!(dist(&end, &helix_oracle(1.0, 0.1, &s, 1.0)) < 1e-8);
}

#[test]
fn splitting_converges_to_rk4_in_varying_field() {
    let m = FixedDirectionField::sine(0.3);
    let s = PhaseState::new(Vec3::new(0.2, 0.1, 0.0), Vec3::new(0.6, -0.3, 0.4));
    let eps = 0.1;
    let reference = FlowSystem::linear(&m, IntegratorConfig::new(eps).with_scheme(Scheme::Rk4).with_steps(512))
        .unwrap()
        .flow(s, 1.0)
        .unwrap();
    let err = |n: usize| {
        let e = FlowSystem::linear(&m, IntegratorConfig::new(eps).with_steps(n)).unwrap().flow(s, 1.0).unwrap();
        dist(&e, &reference)
    };
    let (coarse, fine) = (err(32), err(64));
    assert!(fine < 1e-4, "fine error {fine}");
    let order = (coarse / fine).log2();
    assert!(order > 1.7, "observed order {order}");
}

#[test]
fn straightened_flow_matches_full_flow() {
    let m = HarmonicField::new(0.15, 0.1);
    let x0 = Vec3::new(0.1, -0.1, 0.05);
    let xi_lab = Vec3::new(0.3, 0.2, -0.25);
    let o_t = rotation_at(&m, &x0).unwrap().o_t;
    let cfg = IntegratorConfig::new(0.2).with_steps(256);
    let t = 0.6;
    let full = FlowSystem::full(&m, None, cfg).unwrap().flow(PhaseState::new(x0, xi_lab), t).unwrap();
    let str = FlowSystem::straightened(&m, None, cfg).unwrap().flow(PhaseState::new(x0, o_t * xi_lab), t).unwrap();
    let o = rotation_at(&m, &str.x).unwrap().o();
    assert!((full.x - str.x).norm() < 1e-6, "x mismatch {}", (full.x - str.x).norm());
    assert!((full.xi - o * str.xi).norm() < 1e-6, "xi mismatch {}", (full.xi - o * str.xi).norm());
}

#[test]
fn internal_fields_match_rk4() {
    let m = HarmonicField::new(0.15, 0.1);
    let fields = UniformFields { e: Vec3::new(0.3, -0.2, 0.5), b: Vec3::new(0.1, 0.4, -0.2) };
    let s = PhaseState::new(Vec3::new(0.1, -0.1, 0.05), Vec3::new(0.3, 0.2, -0.25));
    for sys in [FlowKind::Full, FlowKind::Straightened] {
        let make = |cfg| match sys {
            FlowKind::Full => FlowSystem::full(&m, Some(&fields), cfg),
            _ => FlowSystem::straightened(&m, Some(&fields), cfg),
        };
        let a = make(IntegratorConfig::new(0.2).with_steps(512)).unwrap().flow(s, 0.5).unwrap();
        let b =
            make(IntegratorConfig::new(0.2).with_scheme(Scheme::Rk4).with_steps(256)).unwrap().flow(s, 0.5).unwrap();
        assert!(dist(&a, &b) < 1e-6, "{sys:?}: {}", dist(&a, &b));
    }
}

#[test]
fn backward_flow_inverts_forward_flow() {
    let m = FixedDirectionField::sine(0.3);
    let sys = FlowSystem::linear(&m, IntegratorConfig::new(0.1)).unwrap();
    let s = PhaseState::new(Vec3::new(0.2, 0.1, 0.0), Vec3::new(0.6, -0.3, 0.4));
    let fwd = sys.flow(s, 0.8).unwrap();
    let back = backward_flow(&sys, fwd, 0.8).unwrap();
    assert!(dist(&back, &s) < 1e-6);
}

#[test]
fn dual_jacobian_matches_differences() {
    let m = FixedDirectionField::sine(0.3);
    let s = PhaseState::new(Vec3::new(0.2, 0.1, 0.0), Vec3::new(0.6, -0.3, 0.4));
    let sys = FlowSystem::linear(&m, IntegratorConfig::new(0.2)).unwrap();
    let jac = sys.jacobian(s, 0.5).unwrap();
    let fd = flow_jacobian_fd(&sys, s, 0.5, 1e-4).unwrap();
    let rel = (jac.matrix - fd).norm() / fd.norm();
    assert!(rel < 1e-3, "relative mismatch {rel}");
    assert!((jac.det - 1.0).abs() < 1e-10, "det = {}", jac.det);
    assert!(dist(&jac.end, &sys.flow(s, 0.5).unwrap()) < 1e-14);
}

#[test]
fn full_system_jacobian_is_volume_preserving() {
    let m = HarmonicField::new(0.15, 0.1);
    let s = PhaseState::new(Vec3::new(0.1, -0.1, 0.05), Vec3::new(0.3, 0.2, -0.25));
    let sys = FlowSystem::full(&m, None, IntegratorConfig::new(0.2)).unwrap();
    let jac = sys.jacobian(s, 0.5).unwrap();
    assert!((jac.det - 1.0).abs() < 1e-10, "det = {}", jac.det);
}

#[test]
fn rejects_bad_inputs() {
    let m = FixedDirectionField::sine(0.3);
    assert!(FlowSystem::linear(&m, IntegratorConfig::new(0.0)).is_err());
    assert!(FlowSystem::linear(&m, IntegratorConfig::new(0.1).with_steps(4)).is_err());
    assert!(FlowSystem::linear(&HarmonicField::new(0.1, 0.1), IntegratorConfig::new(0.1)).is_err());
    let sys = FlowSystem::linear(&m, IntegratorConfig::new(0.1)).unwrap();
    let s = PhaseState::new(Vec3::new(f64::NAN, 0.0, 0.0), Vec3::zeros());
    assert!(sys.flow(s, 1.0).is_err());
    assert!(sys.integrate(PhaseState::new(Vec3::zeros(), Vec3::zeros()), &[1.0, 0.5]).is_err());
}

#[test]
fn support_bound_is_monotone_and_exact_for_constant_e() {
    let hist: Vec<_> = (0..=10).map(|k| (0.1 * k as f64, 2.0)).collect();
    let r = support_radius_bound(1.0, 0.1, 1.0, &hist).unwrap();
    assert!(r.windows(2).all(|w| w[1] >= w[0]));
    assert!((r[10] - 1.2).abs() < 1e-14);
    assert!(support_radius_bound(1.0, 0.1, 1.0, &[(0.5, 1.0)]).is_err());
}

#[test]
fn velocity_jacobian_matches_differences() {
    let xi = Vec3::new(0.3, -1.2, 0.5);
    let fd: Mat3 = diff::jacobian3(relativistic_velocity, &xi, 1e-4);
    assert!((velocity_jacobian(&xi) - fd).norm() < 1e-11);
}
