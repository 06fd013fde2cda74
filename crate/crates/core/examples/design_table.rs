//! Prints the density-evolution design table for the default degree profile.
use dmcv_core::postproc::density::{DeSettings, Ensemble};
use dmcv_core::postproc::ldpc::DegreeProfile;
use dmcv_core::postproc::rates::DESIGN_TABLE;

fn main() {
    let s = DeSettings::default();
    println!("pub const DESIGN_TABLE: [(f64, f64); {}] = [", DESIGN_TABLE.len());
    for &(r, _) in DESIGN_TABLE.iter() {
        let t = Ensemble::from_profile(&DegreeProfile::low_rate(), r).unwrap().threshold(&s);
        println!("    ({r:.3}, {:.6}),", t.snr);
    }
    println!("];");
}
