use std::f64::consts::PI;

use rayon::prelude::*;

use super::{Experiment, ExperimentSpec, Outcome, Param, ResultTable};
use crate::asymptotics::{approx_error_fixed, approx_error_general, convergence_order, diffeo_margin};
use crate::characteristics::{FlowSystem, IntegratorConfig};
use crate::field_models::{
    lorentz_factor, perp, validate_field, ConstantField, FieldKind, FixedDirectionField, FnField, HarmonicField,
    MagneticField, PhaseState, Region, ValidationOptions,
};
use crate::phase_averaging::{
    averaged_initial_term, constant_field_closed_form, gradient_sup, oscillatory_integral, InitialTermQuadrature,
    OscillatoryIntegralSpec,
};
use crate::quadrature::{MomentumGrid, SphericalQuadrature};
use crate::vlasov_transport::{example_closed_form, lipschitz_growth_probe, preparedness_norm, LipschitzRow};
use crate::wave_kernel::{
    shell_bound, shell_convolution, shell_convolution_vec, sup_on_sphere, time_derivative_identity_residual,
    transfer_identity_residual, KernelSymbol, TransferQuadrature,
};
use crate::{Result, Vec3};

const fn p(key: &'static str, default: &'static str, help: &'static str) -> Param {
    Param { key, default, help }
}

pub(super) static REGISTRY: &[Experiment] = &[
    Experiment {
        name: "validate-field",
        summary: "divergence, curl and strength bounds of the built-in field models",
        columns: &["model", "max_div", "max_curl", "min_b", "max_b", "admissible", "expected"],
        params: &[
            p("points_per_axis", "17", "grid points per axis of the validation box"),
            p("tolerance", "1e-6", "divergence/curl threshold"),
        ],
        run: validate_fields,
    },
    Experiment {
        name: "oracle-homogeneous",
        summary: "integrator against the closed-form helix in a unit constant field",
        columns: &["epsilon", "state", "t", "err_x", "err_xi"],
        params: &[
            p("epsilons", "1e-2, 1e-3", "gyration parameters"),
            p("t_final", "1", "end of the time window"),
            p("time_samples", "20", "output intervals on [0, t_final]"),
            p("states", "4", "number of initial states"),
        ],
        run: oracle_homogeneous,
    },
    Experiment {
        name: "converge-fixed",
        summary: "closed-form fixed-direction approximation: error orders in epsilon",
        columns: &["epsilon", "err_x", "err_xi"],
        params: &[
            p("epsilons", "1e-1, 3e-2, 1e-2, 3e-3, 1e-3", "sweep"),
            p("amplitude", "0.1", "b_e = 1 + amplitude sin x1"),
            p("t_final", "0.5", "end of the time window"),
            p("time_samples", "40", "output intervals on [0, t_final]"),
            p("states", "4", "number of initial states, |xi| <= 1"),
            p("steps_per_gyroperiod", "64", "base resolution; the reference uses 8x"),
        ],
        run: converge_fixed,
    },
    Experiment {
        name: "converge-general",
        summary: "second-order averaging in a harmonic field: error orders in epsilon",
        columns: &["epsilon", "err_u", "err_theta"],
        params: &[
            p("epsilons", "1e-1, 3e-2, 1e-2, 3e-3, 1e-3", "sweep"),
            p("alpha", "0.1", "harmonic field coefficient of x1^2 - x2^2"),
            p("beta", "0.1", "harmonic field coefficient of x1 x3"),
            p("t_final", "0.5", "end of the time window"),
            p("time_samples", "40", "output intervals on [0, t_final]"),
            p("steps_per_gyroperiod", "64", "base resolution; the reference uses 8x"),
        ],
        run: converge_general,
    },
    Experiment {
        name: "symbols",
        summary: "numerical sup over the sphere of |p| and |q| against bounds and sharp values",
        columns: &["radius", "sup_p", "sharp_p", "bound_p", "sup_q", "sharp_q", "bound_q"],
        params: &[
            p("radii", "0.5, 1, 2", "momentum magnitudes"),
            p("n_polar", "16", "sphere nodes in the polar angle"),
            p("n_azimuth", "32", "sphere nodes in the azimuth"),
        ],
        run: symbols,
    },
    Experiment {
        name: "shell",
        summary: "shell convolution: analytic cases, refinement, bound and the time-derivative identity",
        columns: &[
            "t",
            "constant",
            "constant_rel_err",
            "odd_norm",
            "gaussian",
            "refined_rel_diff",
            "bound_ratio",
            "identity_residual",
        ],
        params: &[
            p("times", "0.5, 1, 1.5", "evaluation times"),
            p("n_polar", "16", "sphere nodes in the polar angle"),
            p("n_azimuth", "32", "sphere nodes in the azimuth"),
            p("time_nodes", "16", "Gauss nodes in the shell radius"),
        ],
        run: shell,
    },
    Experiment {
        name: "transfer-identity",
        summary: "derivative transfer after straightening, two independent quadratures",
        columns: &["case", "lhs_norm", "rhs_norm", "absolute", "relative"],
        params: &[
            p("t", "0.6", "evaluation time"),
            p("lhs_scale", "2", "resolution multiplier of the left side"),
            p("rhs_scale", "3", "resolution multiplier of the right side"),
        ],
        run: transfer_identity,
    },
    Experiment {
        name: "osc-scaling",
        summary: "oscillatory time integrals: constant-field equality case and epsilon gains",
        columns: &["kind", "mode", "epsilon", "t", "value", "reference"],
        params: &[
            p("resonance_epsilons", "1e-2, 1e-3, 1e-4", "constant-field cases"),
            p("modes", "1, 2", "gyro modes of the constant-field cases"),
            p("sweep_epsilons", "1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4", "inhomogeneous sweep"),
            p("initial_epsilons", "0.08, 0.04, 0.02, 0.01", "averaged initial-term sweep"),
            p("t_final", "0.5", "time horizon"),
        ],
        run: osc_scaling,
    },
    Experiment {
        name: "prepared-vs-ill",
        summary: "gyrating example residual and transported Lipschitz growth of prepared and ill-prepared data",
        columns: &["epsilon", "sup_dt_ill", "sup_dxi_ill", "sup_dt_prepared", "sup_dxi_prepared", "example_residual"],
        params: &[
            p("epsilons", "0.1, 0.03, 0.01, 0.003, 0.001", "sweep"),
            p("t", "0.5", "transport time"),
            p("probes", "24", "phase-space probe points"),
            p("steps_per_gyroperiod", "32", "integrator resolution"),
        ],
        run: prepared_vs_ill,
    },
    Experiment {
        name: "volume",
        summary: "flow Jacobian determinant and momentum-norm conservation",
        columns: &["system", "state", "det_minus_one", "norm_drift"],
        params: &[
            p("epsilon", "1e-2", "gyration parameter"),
            p("t", "1", "flow time"),
            p("states", "8", "number of initial states"),
        ],
        run: volume,
    },
    Experiment {
        name: "diffeo-margin",
        summary: "operator norm of D_x X - I for the fixed-direction flow",
        columns: &["epsilon", "t", "margin"],
        params: &[
            p("epsilons", "0.1, 0.03, 0.01", "sweep"),
            p("times", "0, 0.5, 1, 1.5, 2", "flow times"),
            p("amplitude", "0.1", "b_e = 1 + amplitude sin x1"),
        ],
        run: diffeo,
    },
];

/// Deterministic states with |ξ| ≤ r_max spread by the golden angle.
fn spread_states(n: usize, r_max: f64) -> Vec<PhaseState> {
    (0..n)
        .map(|k| {
            let a = 2.399963229728653 * k as f64;
            let r = r_max * (0.3 + 0.7 * (k as f64 + 0.5) / n as f64);
            let c = (0.6 * (0.7 * a).sin()).clamp(-0.9, 0.9);
            let s = (1.0 - c * c).sqrt();
            PhaseState::new(
                Vec3::new(0.3 * a.cos(), 0.2 * a.sin(), 0.1 * (1.3 * a).cos()),
                Vec3::new(r * s * (1.7 * a).cos(), r * s * (1.7 * a).sin(), r * c),
            )
        })
        .collect()
}

fn time_grid(t_final: f64, intervals: usize) -> Vec<f64> {
    (0..=intervals).map(|k| t_final * k as f64 / intervals as f64).collect()
}

/// Gyration in B = e₃ with ⟨ξ⟩ conserved: Ξ = cos(ωt)ξ̄ − sin(ωt)ξ^⊥ + ξ₃e₃ with ω = 1/(ε⟨ξ⟩),
/// and X the exact time integral of Ξ/⟨ξ⟩.
fn helix(eps: f64, s: &PhaseState, t: f64) -> PhaseState {
    let gamma = lorentz_factor(&s.xi);
    let w = 1.0 / (eps * gamma);
    let (sn, cs) = (w * t).sin_cos();
    let bar = Vec3::new(s.xi.x, s.xi.y, 0.0);
    let pp = perp(&s.xi);
    let xi = bar * cs - pp * sn + Vec3::z() * s.xi.z;
    let x = s.x + (bar * (sn / w) - pp * ((1.0 - cs) / w) + Vec3::z() * (s.xi.z * t)) / gamma;
    PhaseState::new(x, xi)
}

fn bump(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (1.0 - u * u).powi(4)
    } else {
        0.0
    }
}

fn worst(values: &[f64]) -> (usize, f64) {
    values.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 || v.is_nan() { (i, *v) } else { b })
}

impl Outcome {
    /// Every entry of `values` (table rows `rows[i]`) at most `tol`.
    fn check_max(&mut self, name: &str, values: &[f64], rows: &[usize], tol: f64) {
        let (i, v) = worst(values);
        let row = rows.get(i).copied().unwrap_or(i);
        self.check(name, v <= tol, format!("max {v:.3e} at row {row}, tolerance {tol:.0e}"));
    }

    fn check_slope(&mut self, name: &str, pts: &[(f64, f64)], lo: f64, hi: f64) -> Result<()> {
        let fit = convergence_order(pts)?;
        self.table.note_f64(name, fit.slope);
        self.table.note_f64(&format!("{name}_half_width_95"), fit.half_width_95);
        let ok = fit.slope >= lo && fit.slope <= hi;
        self.check(name, ok, format!("slope {:.4} +- {:.4}, accepted [{lo}, {hi}]", fit.slope, fit.half_width_95));
        Ok(())
    }
}

fn all_rows(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn validate_fields(spec: &ExperimentSpec) -> Result<Outcome> {
    let opts = ValidationOptions { points_per_axis: spec.usize("points_per_axis")?, tolerance: spec.f64("tolerance")? };
    let divergent =
        FnField::new(FieldKind::GeneralDirection, Region::cube(1.0), 0.5, |x: &Vec3| Vec3::new(0.3 * x.x, 0.0, 1.0));
    let models: Vec<(Box<dyn MagneticField>, bool)> = vec![
        (Box::new(ConstantField::along_e3(1.0)), true),
        (Box::new(FixedDirectionField::sine(0.1)), true),
        (Box::new(FixedDirectionField::new(1.0, 0.1, 1.0, 0.05, 0.7)), true),
        (Box::new(HarmonicField::new(0.1, 0.1)), true),
        (Box::new(FixedDirectionField::new(0.5, 1.0, 1.0, 0.0, 1.0)), false),
        (Box::new(divergent), false),
    ];
    let mut out = Outcome::new(ResultTable::new(REGISTRY[0].columns));
    let mut wrong = Vec::new();
    for (k, (m, expected)) in models.iter().enumerate() {
        let rep = validate_field(m.as_ref(), opts)?;
        let ok = rep.is_admissible();
        out.table.note(&format!("model_{k}"), m.describe());
        out.table.push(vec![
            k as f64,
            rep.max_div,
            rep.max_curl,
            rep.min_b,
            rep.max_b,
            ok as u8 as f64,
            *expected as u8 as f64,
        ]);
        if ok != *expected {
            wrong.push(k);
        }
    }
    out.check("classification", wrong.is_empty(), format!("misclassified rows {wrong:?}"));
    Ok(out)
}

fn oracle_homogeneous(spec: &ExperimentSpec) -> Result<Outcome> {
    let eps_list = spec.epsilons("epsilons")?;
    let times = time_grid(spec.f64("t_final")?, spec.usize("time_samples")?);
    let states = spread_states(spec.usize("states")?, 1.0);
    let model = ConstantField::along_e3(1.0);
    let mut out = Outcome::new(ResultTable::new(REGISTRY[1].columns));
    let mut errs = Vec::new();
    for &eps in &eps_list {
        let sys = FlowSystem::linear(&model, IntegratorConfig::new(eps))?;
        let trajectories: Vec<_> = states.par_iter().map(|s| sys.integrate(*s, &times)).collect::<Result<_>>()?;
        for (k, (s, tr)) in states.iter().zip(&trajectories).enumerate() {
            for (t, got) in times.iter().zip(&tr.states) {
                let want = helix(eps, s, *t);
                let (ex, exi) = ((got.x - want.x).norm(), (got.xi - want.xi).norm());
                out.table.push(vec![eps, k as f64, *t, ex, exi]);
                errs.push(ex.max(exi));
            }
        }
    }
    let n = errs.len();
    out.check_max("max_error", &errs, &all_rows(n), 1e-8);
    Ok(out)
}

fn converge_fixed(spec: &ExperimentSpec) -> Result<Outcome> {
    let eps_list = spec.epsilons("epsilons")?;
    let model = FixedDirectionField::sine(spec.f64("amplitude")?);
    let times = time_grid(spec.f64("t_final")?, spec.usize("time_samples")?);
    let states = spread_states(spec.usize("states")?, 1.0);
    let steps = spec.usize("steps_per_gyroperiod")?;
    let rows: Vec<(f64, f64)> = eps_list
        .par_iter()
        .map(|&eps| {
            let cfg = IntegratorConfig::new(eps).with_steps(steps);
            states.iter().try_fold((0.0f64, 0.0f64), |acc, s| {
                let e = approx_error_fixed(&model, *s, eps, &times, cfg)?;
                Ok((acc.0.max(e.x), acc.1.max(e.xi)))
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::new(ResultTable::new(REGISTRY[2].columns));
    for (eps, (ex, exi)) in eps_list.iter().zip(&rows) {
        out.table.push(vec![*eps, *ex, *exi]);
    }
    let px: Vec<_> = eps_list.iter().zip(&rows).map(|(e, r)| (*e, r.0)).collect();
    let pxi: Vec<_> = eps_list.iter().zip(&rows).map(|(e, r)| (*e, r.1)).collect();
    out.check_slope("slope_x", &px, 1.7, 2.3)?;
    out.check_slope("slope_xi", &pxi, 0.7, 1.3)?;
    Ok(out)
}

fn converge_general(spec: &ExperimentSpec) -> Result<Outcome> {
    let eps_list = spec.epsilons("epsilons")?;
    let model = HarmonicField::new(spec.f64("alpha")?, spec.f64("beta")?);
    let t_final = spec.f64("t_final")?;
    let intervals = spec.usize("time_samples")?;
    let times: Vec<f64> = (1..=intervals).map(|k| t_final * k as f64 / intervals as f64).collect();
    let steps = spec.usize("steps_per_gyroperiod")?;
    let state = PhaseState::new(Vec3::new(0.1, 0.05, -0.1), Vec3::new(0.5, -0.3, 0.4));
    let rows: Vec<(f64, f64)> = eps_list
        .par_iter()
        .map(|&eps| approx_error_general(&model, &state, eps, &times, IntegratorConfig::new(eps).with_steps(steps)))
        .collect::<Result<_>>()?;
    let mut out = Outcome::new(ResultTable::new(REGISTRY[3].columns));
    for (eps, (eu, eth)) in eps_list.iter().zip(&rows) {
        out.table.push(vec![*eps, *eu, *eth]);
    }
    let pu: Vec<_> = eps_list.iter().zip(&rows).map(|(e, r)| (*e, r.0)).collect();
    let pth: Vec<_> = eps_list.iter().zip(&rows).map(|(e, r)| (*e, r.1)).collect();
    out.check_slope("slope_u", &pu, 1.6, 2.4)?;
    out.check_slope("slope_theta", &pth, 0.6, 1.4)?;
    Ok(out)
}

fn symbols(spec: &ExperimentSpec) -> Result<Outcome> {
    let quad = SphericalQuadrature::new(spec.usize("n_polar")?, spec.usize("n_azimuth")?);
    let dir = Vec3::new(0.3, -0.5, 0.8).normalize();
    let mut out = Outcome::new(ResultTable::new(REGISTRY[4].columns));
    let (mut excess, mut gap) = (Vec::new(), Vec::new());
    for r in spec.list("radii")? {
        let xi = dir * r;
        let mut row = vec![r];
        for sym in [KernelSymbol::P, KernelSymbol::Q] {
            let sup = sup_on_sphere(sym, &xi, &quad)?;
            let (sharp, bound) = (sym.sharp_sup(&xi), sym.bound(r));
            row.extend([sup, sharp, bound]);
            excess.push(sup - bound);
            gap.push((sup - sharp).abs());
        }
        out.table.push(row);
    }
    // two entries (p, q) per row
    let rows: Vec<usize> = (0..excess.len()).map(|i| i / 2).collect();
    out.check_max("sup_below_bound", &excess, &rows, 0.0);
    out.check_max("sup_matches_sharp", &gap, &rows, 1e-3);
    Ok(out)
}

fn shell(spec: &ExperimentSpec) -> Result<Outcome> {
    let quad = SphericalQuadrature::new(spec.usize("n_polar")?, spec.usize("n_azimuth")?);
    let fine = quad.refined();
    let nodes = spec.usize("time_nodes")?;
    let x = Vec3::new(0.1, 0.2, -0.3);
    let xi0 = Vec3::new(0.4, -0.2, 0.3);
    let centre = Vec3::new(0.2, 0.0, 0.1);
    let source = |s: f64, y: &Vec3| (1.0 + s) * (-(y - centre).norm_squared()).exp();
    let weight = |w: &Vec3| KernelSymbol::P.evaluate(1.0, w, &xi0).unwrap_or_else(|_| Vec3::repeat(f64::NAN));
    let degree = KernelSymbol::P.degree();
    let sup_p = sup_on_sphere(KernelSymbol::P, &xi0, &quad)?;
    let mut out = Outcome::new(ResultTable::new(REGISTRY[5].columns));
    let (mut c_err, mut odd, mut refine, mut ratio, mut ident) = (vec![], vec![], vec![], vec![], vec![]);
    for t in spec.list("times")? {
        let c = shell_convolution(|_| 1.0, 0, |_, _| 1.0, t, &x, &quad, nodes)?;
        let ce = (c - t * t / 2.0).abs() / (t * t / 2.0);
        let o = shell_convolution_vec(|w| *w, 0, |_, _| 1.0, t, &x, &quad, nodes)?.norm();
        let g = shell_convolution_vec(weight, degree, source, t, &x, &quad, nodes)?;
        let g_fine = shell_convolution_vec(weight, degree, source, t, &x, &fine, 2 * nodes)?;
        let rd = (g - g_fine).norm() / g_fine.norm();
        let bound = shell_bound(t, degree, sup_p, t + t * t / 2.0);
        let id = time_derivative_identity_residual(source, t, &x, &quad, nodes, 1e-3)?.residual;
        out.table.push(vec![t, c, ce, o, g.norm(), rd, g.norm() / bound, id]);
        c_err.push(ce);
        odd.push(o);
        refine.push(rd);
        ratio.push(g.norm() / bound);
        ident.push(id);
    }
    let rows = all_rows(c_err.len());
    out.check_max("constant_case", &c_err, &rows, 1e-6);
    out.check_max("odd_case", &odd, &rows, 1e-10);
    out.check_max("refinement", &refine, &rows, 1e-6);
    out.check_max("bound", &ratio, &rows, 1.0);
    out.check_max("time_derivative_identity", &ident, &rows, 1e-6);
    Ok(out)
}

/// Smooth test density in (s, y, η), compactly supported in η; with `angular` it carries the
/// gyro-mode cos θ, without it is θ-independent.
fn transfer_density(angular: bool) -> impl Fn(f64, &Vec3, &Vec3) -> f64 + Sync {
    move |s: f64, y: &Vec3, eta: &Vec3| {
        let r = eta.x.hypot(eta.y);
        let ang = if angular && r > 0.0 { eta.x / r } else { 1.0 };
        (1.0 + 0.5 * s) * (-(y.norm_squared())).exp() * bump(r / 0.9) * bump(eta.z / 0.9) * ang * (1.0 + r)
    }
}

fn transfer_quadrature(scale: usize) -> TransferQuadrature {
    TransferQuadrature {
        sphere: SphericalQuadrature::new(6 * scale, 12 * scale),
        momentum: MomentumGrid::new(0.9, 6 * scale, 8, 6 * scale),
        time_nodes: 3 * scale,
    }
}

fn transfer_identity(spec: &ExperimentSpec) -> Result<Outcome> {
    let t = spec.f64("t")?;
    let (lq, rq) = (transfer_quadrature(spec.usize("lhs_scale")?), transfer_quadrature(spec.usize("rhs_scale")?));
    let x = Vec3::new(0.1, 0.0, 0.0);
    let fixed = FixedDirectionField::sine(0.2);
    let general = HarmonicField::new(0.1, 0.1);
    let cases: [(&dyn MagneticField, bool); 3] = [(&fixed, true), (&fixed, false), (&general, true)];
    let mut out = Outcome::new(ResultTable::new(REGISTRY[6].columns));
    let mut results = Vec::new();
    for (k, (m, angular)) in cases.iter().enumerate() {
        let r = transfer_identity_residual(*m, transfer_density(*angular), t, &x, &lq, &rq)?;
        out.table.push(vec![k as f64, r.lhs.norm(), r.rhs.norm(), r.absolute, r.relative]);
        results.push(r);
    }
    out.check_max("fixed_direction", &[results[0].relative], &[0], 1e-4);
    out.check_max("theta_independent_zero", &[results[1].lhs.norm().max(results[1].rhs.norm())], &[1], 1e-10);
    out.check_max("general_direction", &[results[2].relative], &[2], 1e-4);
    Ok(out)
}

fn unit_amplitude(_: f64, _: &Vec3, _: f64, _: f64) -> f64 {
    1.0
}

fn example_profile(xi: &Vec3) -> f64 {
    let r = xi.x.hypot(xi.y);
    let c2 = if r > 0.0 { (xi.x * xi.x - xi.y * xi.y) / (r * r) } else { 1.0 };
    bump(r / 0.8) * bump(xi.z / 0.8) * r * r * c2
}

fn osc_scaling(spec: &ExperimentSpec) -> Result<Outcome> {
    let t_final = spec.f64("t_final")?;
    let mut out = Outcome::new(ResultTable::new(REGISTRY[7].columns));

    // kind 0: constant field, resonant and generic times
    let constant = ConstantField::along_e3(1.0);
    let xi = Vec3::new(0.6, 0.0, 0.8);
    let gamma = lorentz_factor(&xi);
    let start = PhaseState::new(Vec3::zeros(), xi);
    let (mut excess, mut equality, mut excess_rows, mut equality_rows) = (vec![], vec![], vec![], vec![]);
    for mode in spec.list("modes")? {
        let n = mode as i32;
        for &eps in &spec.epsilons("resonance_epsilons")? {
            let quarter = PI * eps * gamma / n.abs() as f64;
            let k = ((t_final / quarter - 1.0) / 2.0).round().max(0.0);
            let resonant = (2.0 * k + 1.0) * quarter;
            for (t, is_resonant) in [(resonant, true), (t_final, false)] {
                let v = oscillatory_integral(
                    &OscillatoryIntegralSpec::new(&unit_amplitude, n, eps, Vec3::x(), t, start),
                    &constant,
                )?
                .norm();
                let bound = 2.0 * eps * gamma / n.abs() as f64;
                excess_rows.push(out.table.rows.len());
                excess.push(v - bound);
                if is_resonant {
                    equality_rows.push(out.table.rows.len());
                    equality.push((v - bound).abs());
                }
                out.table.push(vec![0.0, n as f64, eps, t, v, constant_field_closed_form(1.0, eps, &xi, n, t)]);
            }
        }
    }
    out.check_max("constant_bound", &excess, &excess_rows, 1e-12);
    out.check_max("constant_equality", &equality, &equality_rows, 1e-12);

    // kind 1: inhomogeneous field, a smooth amplitude vanishing at s = t
    let model = FixedDirectionField::sine(0.1);
    let amp = move |s: f64, x: &Vec3, r: f64, _z: f64| (1.0 - s / t_final) * (1.0 + 0.5 * x.x.sin()) * (1.0 + r);
    let state = PhaseState::new(Vec3::new(0.2, -0.1, 0.0), Vec3::new(0.5, 0.3, -0.2));
    let dir = Vec3::new(1.0, 2.0, 2.0) / 3.0;
    let sweep = spec.epsilons("sweep_epsilons")?;
    let values: Vec<f64> = sweep
        .par_iter()
        .map(|&eps| {
            oscillatory_integral(&OscillatoryIntegralSpec::new(&amp, 1, eps, dir, t_final, state), &model)
                .map(|c| c.norm())
        })
        .collect::<Result<_>>()?;
    for (eps, v) in sweep.iter().zip(&values) {
        out.table.push(vec![1.0, 1.0, *eps, t_final, *v, 0.0]);
    }
    let pts: Vec<_> = sweep.iter().copied().zip(values.iter().copied()).collect();
    out.check_slope("slope_inhomogeneous", &pts, 0.7, 1.3)?;

    // kind 2: averaged initial term of mode-2 data with a spatial envelope
    let enveloped = |x: &Vec3, xi: &Vec3| (-(x - Vec3::new(0.5, 0.0, 0.0)).norm_squared()).exp() * example_profile(xi);
    let quad = InitialTermQuadrature::new(SphericalQuadrature::new(4, 8), MomentumGrid::new(0.8, 4, 8, 4), 2);
    let x0 = Vec3::new(0.3, -0.2, 0.0);
    let init_eps = spec.epsilons("initial_epsilons")?;
    let init: Vec<f64> = init_eps
        .par_iter()
        .map(|&eps| averaged_initial_term(&model, enveloped, t_final, &x0, eps, &quad).map(|v| v.norm()))
        .collect::<Result<_>>()?;
    for (eps, v) in init_eps.iter().zip(&init) {
        out.table.push(vec![2.0, 2.0, *eps, t_final, *v, 0.0]);
    }
    let pts: Vec<_> = init_eps.iter().copied().zip(init.iter().copied()).collect();
    out.check_slope("slope_initial_term", &pts, 0.7, f64::INFINITY)?;
    out.table.note_f64("threshold_time", 0.25 * model.c_lower() / gradient_sup(&model));
    Ok(out)
}

fn chi(r: f64, z: f64) -> f64 {
    bump(r / 0.9) * bump(z / 0.9) * (1.0 + r)
}

fn example_in(_: &Vec3, xi: &Vec3) -> f64 {
    let r = xi.x.hypot(xi.y);
    if r == 0.0 {
        return chi(0.0, xi.z);
    }
    chi(r, xi.z) * (xi.x * xi.x - xi.y * xi.y) / (r * r)
}

fn gyrotropic(x: &Vec3, xi: &Vec3) -> f64 {
    (-(x.norm_squared())).exp() * chi(xi.x.hypot(xi.y), xi.z)
}

fn prepared_vs_ill(spec: &ExperimentSpec) -> Result<Outcome> {
    let eps_list = spec.epsilons("epsilons")?;
    let t = spec.f64("t")?;
    let probes = spread_states(spec.usize("probes")?, 0.7);
    let steps = spec.usize("steps_per_gyroperiod")?;
    let model = FixedDirectionField::sine(0.1);
    let ill_data = |x: &Vec3, xi: &Vec3| gyrotropic(x, xi) + example_in(x, xi);
    let ill = lipschitz_growth_probe(&model, ill_data, &eps_list, t, &probes, steps)?;
    let prepared = lipschitz_growth_probe(&model, gyrotropic, &eps_list, t, &probes, steps)?;
    let residuals: Vec<f64> = eps_list
        .iter()
        .map(|&eps| {
            probes
                .iter()
                .try_fold(0.0f64, |acc, z| Ok(acc.max(example_closed_form(chi, eps, t, &z.x, &z.xi)?.residual.abs())))
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::new(ResultTable::new(REGISTRY[8].columns));
    for ((a, b), res) in ill.iter().zip(&prepared).zip(&residuals) {
        out.table.push(vec![a.epsilon, a.sup_dt, a.sup_dxi, b.sup_dt, b.sup_dxi, *res]);
    }
    let grid = MomentumGrid::new(0.9, 8, 32, 8);
    let pos = [Vec3::zeros()];
    out.table.note_f64("preparedness_ill", preparedness_norm(&model, ill_data, &pos, &grid)?);
    out.table.note_f64("preparedness_prepared", preparedness_norm(&model, gyrotropic, &pos, &grid)?);
    out.check_max("example_residual", &residuals, &all_rows(residuals.len()), 1e-10);
    let dt = |rows: &[LipschitzRow]| rows.iter().map(|r| (r.epsilon, r.sup_dt)).collect::<Vec<_>>();
    out.check_slope("slope_ill", &dt(&ill), -1.3, -0.7)?;
    out.check_slope("slope_prepared", &dt(&prepared), -0.3, 0.3)?;
    Ok(out)
}

fn volume(spec: &ExperimentSpec) -> Result<Outcome> {
    let eps = spec.f64("epsilon")?;
    let t = spec.f64("t")?;
    let states = spread_states(spec.usize("states")?, 1.0);
    let fixed = FixedDirectionField::sine(0.1);
    let general = HarmonicField::new(0.1, 0.1);
    let cfg = IntegratorConfig::new(eps);
    let systems = [
        FlowSystem::linear(&fixed, cfg)?,
        FlowSystem::straightened(&general, None, cfg)?,
        FlowSystem::full(&general, None, cfg)?,
    ];
    let mut out = Outcome::new(ResultTable::new(REGISTRY[9].columns));
    let (mut det, mut det_rows, mut drift, mut drift_rows) = (vec![], vec![], vec![], vec![]);
    for (k, sys) in systems.iter().enumerate() {
        let rows: Vec<(f64, f64)> = states
            .par_iter()
            .map(|s| {
                let d = (sys.jacobian(*s, t)?.det - 1.0).abs();
                let tr = sys.integrate(*s, &[t])?;
                Ok((d, tr.max_norm_drift))
            })
            .collect::<Result<_>>()?;
        for (j, (d, n)) in rows.into_iter().enumerate() {
            let row = out.table.rows.len();
            // the straightened coordinates are not canonical, its determinant is reported only
            if k != 1 {
                det.push(d);
                det_rows.push(row);
            }
            drift.push(n);
            drift_rows.push(row);
            out.table.push(vec![k as f64, j as f64, d, n]);
        }
    }
    out.check_max("determinant", &det, &det_rows, 1e-6);
    out.check_max("norm_conservation", &drift, &drift_rows, 1e-10);
    Ok(out)
}

fn diffeo(spec: &ExperimentSpec) -> Result<Outcome> {
    let model = FixedDirectionField::sine(spec.f64("amplitude")?);
    let samples = spread_states(6, 1.0);
    let horizon = 0.25 * model.c_lower() / gradient_sup(&model);
    let times = spec.list("times")?;
    let mut out = Outcome::new(ResultTable::new(REGISTRY[10].columns));
    let (mut margins, mut rows) = (vec![], vec![]);
    for &eps in &spec.epsilons("epsilons")? {
        let vals: Vec<f64> = times
            .par_iter()
            .map(|&t| diffeo_margin(&model, eps, t, &samples, IntegratorConfig::new(eps)))
            .collect::<Result<_>>()?;
        for (t, m) in times.iter().zip(vals) {
            if *t <= horizon {
                rows.push(out.table.rows.len());
                margins.push(m);
            }
            out.table.push(vec![eps, *t, m]);
        }
    }
    out.table.note_f64("horizon", horizon);
    let (i, v) = worst(&margins);
    let row = rows.get(i).copied().unwrap_or(0);
    out.check("margin_below_one", v < 1.0, format!("max {v:.3e} at row {row} for t <= {horizon:.4}"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helix_oracle_solves_the_equations() {
        let s = PhaseState::new(Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.4, -0.3, 0.5));
        let (eps, t, h) = (0.05, 0.37, 1e-5);
        let a = helix(eps, &s, t - h);
        let b = helix(eps, &s, t + h);
        let mid = helix(eps, &s, t);
        let gamma = lorentz_factor(&s.xi);
        let dx = (b.x - a.x) / (2.0 * h);
        let dxi = (b.xi - a.xi) / (2.0 * h);
        assert!((dx - mid.xi / gamma).norm() < 1e-8);
        assert!((dxi - Vec3::z().cross(&mid.xi) / (eps * gamma)).norm() < 1e-4);
        assert_eq!(helix(eps, &s, 0.0), s);
    }

    #[test]
    fn spread_states_respect_radius() {
        for s in spread_states(50, 0.7) {
            assert!(s.xi.norm() <= 0.7 + 1e-15 && s.xi.x.hypot(s.xi.y) > 0.0);
        }
    }
}
