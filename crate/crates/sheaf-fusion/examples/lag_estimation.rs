//! Estimate the traffic-to-sensor lag from 24-hour profiles and split a
//! dust-sensor day into a base line plus lagged traffic.
//!
//! ```sh
//! cargo run --example lag_estimation
//! ```

use std::f64::consts::TAU;

use sheaf_fusion::emissions::{
    base_pattern, estimate_lag, guidebook_value, total_pm25, DailySeries, EmissionFactorTable,
    GuidebookMode, SeriesKind, ShiftMode, VehicleCounts,
};
use sheaf_fusion::Result;

fn main() -> Result<()> {
    let factors = EmissionFactorTable::default();

    // Hourly vehicle activity with a morning and an evening rush hour; the
    // guidebook turns each hour's counts into an emitted-mass value. The
    // two sharp bumps are what make the lag identifiable — a featureless
    // profile correlates equally well at many shifts.
    let mut vehicle_hours = [0.0; 24];
    for (h, slot) in vehicle_hours.iter_mut().enumerate() {
        let h = h as f64;
        let activity = 10.0
            + 100.0 * (-(h - 8.0) * (h - 8.0) / 4.0).exp()
            + 140.0 * (-(h - 18.0) * (h - 18.0) / 6.0).exp();
        let counts = VehicleCounts::pair(2.0 * activity, 0.3 * activity, 1.0)?;
        *slot = guidebook_value(&counts, &factors, GuidebookMode::Mass)?;
    }
    let vehicle = DailySeries::new(SeriesKind::VehicleDerived, vehicle_hours)?;

    // The sensor sees a slowly varying base line plus the traffic signal
    // from `true_lag` hours earlier (transport takes time).
    let true_lag = 7;
    let base_truth: [f64; 24] =
        std::array::from_fn(|h| 18.0 + 6.0 * (TAU * h as f64 / 24.0).sin());
    let mut sensor_hours = [0.0; 24];
    for (h, slot) in sensor_hours.iter_mut().enumerate() {
        *slot = base_truth[h] + vehicle_hours[(h + 24 - true_lag) % 24];
    }
    let sensor = DailySeries::new(SeriesKind::Sensor, sensor_hours)?;

    let estimate = estimate_lag(&vehicle, &sensor, 12)?;
    println!(
        "estimated lag: {} h (true lag {true_lag} h, r = {:.4}, degenerate = {})",
        estimate.lag_hours, estimate.correlation, estimate.degenerate
    );

    // Removing the lagged traffic leaves the base line.
    let base = base_pattern(&sensor, &vehicle, estimate.lag_hours, ShiftMode::Circular)?;
    println!("\nhour    vehicle     sensor   recovered base   true base");
    for h in 0..24 {
        println!(
            " {h:>2}   {:>8.3}   {:>8.3}     {:>10.3}    {:>8.3}",
            vehicle.hours()[h],
            sensor.hours()[h],
            base.hours()[h],
            base_truth[h],
        );
    }

    // The decomposition reassembles exactly: base + lagged traffic = sensor.
    let mut worst = 0.0f64;
    for h in 0..24 {
        let rebuilt = total_pm25(&base, &vehicle, estimate.lag_hours, h)?;
        worst = worst.max((rebuilt - sensor.hours()[h]).abs());
    }
    println!("\nlargest reassembly error over the day: {worst:e}");
    Ok(())
}
