//! Admissibility report for the built-in field models.
use magflow::field_models::{
    validate_field, ConstantField, FixedDirectionField, HarmonicField, MagneticField, ValidationOptions,
};

fn main() -> magflow::Result<()> {
    let models: [Box<dyn MagneticField>; 4] = [
        Box::new(ConstantField::along_e3(1.0)),
        Box::new(FixedDirectionField::sine(0.1)),
        Box::new(HarmonicField::new(0.1, 0.1)),
        Box::new(FixedDirectionField::new(0.5, 1.0, 1.0, 0.0, 1.0)),
    ];
    for m in &models {
        let rep = validate_field(m.as_ref(), ValidationOptions::default())?;
        println!(
            "{:<55} div {:.1e} curl {:.1e} b in [{:.3}, {:.3}] admissible {}",
            m.describe(),
            rep.max_div,
            rep.max_curl,
            rep.min_b,
            rep.max_b,
            rep.is_admissible()
        );
        for (sev, issue) in &rep.issues {
            println!("    {sev:?}: {issue:?}");
        }
    }
    Ok(())
}
