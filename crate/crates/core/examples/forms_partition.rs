//! Regional, full and complement forms on one grid, and the split of the
//! full form into the regional part plus two annuli.

use rfl_lab::forms::{complement_form, full_form, regional_form, NonlocalForm};
use rfl_lab::model::{GridFunction, GridSpec, ScopeFamily, ScopeFunction};

fn main() -> rfl_lab::Result<()> {
    let alpha = 0.4;
    let grid = GridSpec::new(1, 8.0, 128)?;
    let rho: ScopeFunction = ScopeFamily::well(1.0, 2.0, 1.0).into();
    let limit: ScopeFunction = ScopeFamily::constant(2.0, 2.0, 2.0).into();
    let u = GridFunction::from_fn(&grid, |x| (-x[0] * x[0]).exp());

    let full = full_form(&u, &u, alpha)?;
    let regional = regional_form(&u, &u, &rho, alpha)?;
    let inner = complement_form(&u, &rho, 2.0, alpha)?;
    let outer = complement_form(&u, &limit, f64::INFINITY, alpha)?;
    println!("full             {full:.12}");
    println!("regional         {regional:.12}");
    println!("rho <= r < 2     {inner:.12}");
    println!("r >= 2           {outer:.12}");
    println!("split error      {:.2e}", (full - regional - inner - outer).abs() / full);

    // the assembled operator applied to u
    let form = NonlocalForm::regional(&grid, alpha, &rho)?;
    let au = form.apply(&u)?;
    println!("<Au, u> h        {:.12}", au.dot(&u));
    println!("kernel offsets   {}", form.kernel().len());
    Ok(())
}
