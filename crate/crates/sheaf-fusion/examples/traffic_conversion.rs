//! Convert vehicle counts to emitted PM2.5 mass and concentration, and
//! invert a concentration back into counts.
//!
//! ```sh
//! cargo run --example traffic_conversion
//! ```

use sheaf_fusion::emissions::{concentration, emitted_mass, EmissionFactorTable, VehicleCounts};
use sheaf_fusion::simulation::{inverse_guidebook, DEFAULT_COUNT_RATIO};
use sheaf_fusion::Result;

fn main() -> Result<()> {
    let factors = EmissionFactorTable::default();
    println!("emission factors (g/km):");
    for (name, factor) in factors.entries() {
        println!("  {name:<13} {factor}");
    }

    // A camera saw 200 two-wheelers and 30 four-wheelers over a 1 km
    // segment.
    let counts = VehicleCounts::pair(200.0, 30.0, 1.0)?;
    let mass = emitted_mass(&counts, &factors)?;
    println!("\nper-type emitted mass:");
    for (name, grams) in &mass.per_type {
        println!("  {name:<13} {grams} g");
    }
    println!("total: {} g over {} km", mass.total_g, counts.vkt_km());

    // Dilute the mass into the segment-sized box to compare with a dust
    // sensor.
    let ug_m3 = concentration(mass.total_g, counts.vkt_km())?;
    println!("as a concentration: {ug_m3} µg/m³");

    // The factor table round-trips through TOML for the CLI's --ef flag.
    println!("\nfactor table as TOML:\n{}", factors.to_toml_string());

    // And the conversion inverts: given a concentration and an assumed
    // vehicle mix, recover counts that reproduce it.
    let pm = 20.0;
    let counts = inverse_guidebook(pm, DEFAULT_COUNT_RATIO, &factors)?;
    let (two, four) = DEFAULT_COUNT_RATIO;
    println!("{pm} µg/m³ at a {two}:{four} two- to four-wheeler mix is equivalent to:");
    for (name, count) in counts.entries() {
        println!("  {name:<13} {count:.2}");
    }
    let back = emitted_mass(&counts, &factors)?.total_g;
    println!("which emits {back} g — the round trip is exact to float noise");
    Ok(())
}
