//! The concentration function for several scopes and the location of its
//! minimum.

use rfl_lab::concentration::{eval_h, find_h_minimum, HQuadrature, HSearch};
use rfl_lab::model::{ScopeFamily, ScopeFunction};

fn main() -> rfl_lab::Result<()> {
    let alpha = 0.4;
    let quad = HQuadrature::default();
    let scopes: Vec<ScopeFunction> = vec![
        ScopeFamily::well(1.0, 2.0, 1.0).into(),
        ScopeFamily::shifted_well(1.0, 2.0, 1.0, vec![0.5]).into(),
        ScopeFamily::bump(1.0, 2.0, 1.0).into(),
    ];
    for rho in &scopes {
        let field = find_h_minimum(rho, 1, alpha, &HSearch::default())?;
        println!(
            "{:12} x0 = {:.5}  H(x0) = {:.6}  boundary {:.1e}",
            rho.family.name(),
            field.x0[0],
            field.min_value,
            field.boundary_max
        );
        for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            print!("  H({x:+.0}) = {:.5}", eval_h(&[x], rho, alpha, &quad)?);
        }
        println!();
    }

    // two dimensions
    let rho: ScopeFunction = ScopeFamily::well(1.0, 2.0, 1.0).into();
    let search = HSearch {
        half_width: 3.0,
        samples: 13,
        levels: 2,
        ..HSearch::default()
    };
    let field = find_h_minimum(&rho, 2, alpha, &search)?;
    println!("2-D well: x0 = {:?}  H(x0) = {:.6}", field.x0, field.min_value);
    Ok(())
}
