//! Guided modes and two-mode parameters of the Mo/B4C/57Fe/B4C/Mo cavity.

use nuclear_waveguide::modes::{reference_cavity, InputAperture, ModeSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let stack = reference_cavity::<f64>()?;
    let set = ModeSet::solve(&stack)?;
    let overlaps = set.input_overlaps(InputAperture::Core);
    println!("{:>3} {:>24} {:>24} {:>22}", "λ", "q - k0 (1/mm)", "ξ", "B_λ(0)/B_in (√nm)");
    for (i, ((mode, xi), b)) in set.modes().iter().zip(set.couplings()).zip(&overlaps).enumerate() {
        let q = mode.q_rel() * 1e-3;
        let b = b / 1e-9f64.sqrt();
        println!(
            "{:>3} {:>11.4} {:+11.4}i {:>11.4e} {:+11.3e}i {:>10.5} {:+10.3e}i",
            i + 1,
            q.re,
            q.im,
            xi.re,
            xi.im,
            b.re,
            b.im
        );
    }
    if let Some(params) = set.two_mode_parameters() {
        let p = params?;
        println!();
        println!("δq        {:.3} 1/mm", p.delta_q * 1e-3);
        println!("π/δq      {:.3} μm", p.beat_length() * 1e6);
        println!("δκ        {:.3} 1/mm", p.delta_kappa * 1e-3);
        println!("Q_beat    {:.2}", p.q_beat);
        println!("Q_atten   {:.2}", p.q_atten);
        println!("|ξ1/ξ2|   {:.5}", p.xi_mags[0] / p.xi_mags[1]);
    }
    Ok(())
}
