//! Integrates one characteristic in each system, then checks the flow Jacobian and the
//! backward flow.
use magflow::characteristics::{backward_flow, FlowSystem, IntegratorConfig};
use magflow::field_models::{FixedDirectionField, HarmonicField, PhaseState};
use magflow::Vec3;

fn main() -> magflow::Result<()> {
    let eps = 0.01;
    let cfg = IntegratorConfig::new(eps);
    let fixed = FixedDirectionField::sine(0.1);
    let harmonic = HarmonicField::new(0.1, 0.1);
    let start = PhaseState::new(Vec3::new(0.2, -0.1, 0.0), Vec3::new(0.6, -0.5, 0.3));
    let times: Vec<f64> = (1..=4).map(|k| 0.25 * k as f64).collect();

    let systems = [
        ("linear", FlowSystem::linear(&fixed, cfg)?),
        ("straightened", FlowSystem::straightened(&harmonic, None, cfg)?),
        ("full", FlowSystem::full(&harmonic, None, cfg)?),
    ];
    for (name, sys) in &systems {
        let tr = sys.integrate(start, &times)?;
        let end = tr.last().unwrap();
        let jac = sys.jacobian(start, 1.0)?;
        println!(
            "{name:<12} X(1) = ({:+.5}, {:+.5}, {:+.5})  |Xi| drift {:.1e}  det DF - 1 = {:+.1e}  steps {}",
            end.x.x,
            end.x.y,
            end.x.z,
            tr.max_norm_drift,
            jac.det - 1.0,
            tr.steps
        );
    }

    let sys = &systems[0].1;
    let back = backward_flow(sys, sys.flow(start, 1.0)?, 1.0)?;
    println!("round trip error {:.2e}", (back.x - start.x).norm() + (back.xi - start.xi).norm());
    Ok(())
}
