//! Propagate disagreeing sensor data, read off the consistency
//! filtration, and let the selection rule filter the outlier away.
//!
//! ```sh
//! cargo run --example filtration_snapshot
//! ```

use sheaf_fusion::consistency::{select_consistent, selection_cutoff};
use sheaf_fusion::{Assignment, Result, TopologyConfig};

fn main() -> Result<()> {
    let network = TopologyConfig::default().build()?;

    // Camera C2 badly under-counts and dust sensor S2 reads high; C1 and
    // S1 agree exactly (200 two-wheelers + 30 four-wheelers = 12.91 g).
    let assignment = Assignment::new()
        .with("C1", vec![200.0, 30.0])
        .with("C2", vec![100.0, 0.0])
        .with_scalar("S1", 12.91)
        .with_scalar("S2", 20.0);

    let result = network.sheaf.propagate(&assignment)?;
    let filtration = result.filtration();

    println!("consistency filtration (faces in order of agreement):");
    let cutoff = selection_cutoff(&filtration)?;
    for entry in filtration.entries() {
        let marker = if entry.epsilon <= cutoff { "   " } else { " x " };
        println!("  {}{:<4} {:>8.4}", marker, entry.face, entry.epsilon);
    }
    println!("consistency radius: {:.4}", filtration.radius());
    println!("selection cutoff (mean + std/2): {:.4}", cutoff);

    let selection = select_consistent(&filtration, &result)?;
    println!(
        "\nkept {} faces, eliminated {:?}",
        selection.faces_c.len(),
        selection.eliminated
    );
    println!(
        "fused estimate {:.3} µg/m³ at spent tolerance {:.4}",
        selection.value_c, selection.epsilon_c
    );

    // For contrast, the same data without the camera conversions applied —
    // the raw vertex values — averaged naively:
    let naive = [12.91, 4.7, 12.91, 20.0];
    println!(
        "naive average of the converted readings: {:.3} µg/m³",
        naive.iter().sum::<f64>() / naive.len() as f64
    );
    Ok(())
}
