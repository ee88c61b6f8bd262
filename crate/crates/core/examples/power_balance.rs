//! Resonator occupation and transmitted power from the three-reservoir power balance.

use nis_calib::thermal::{
    steady_state_occupation, transmitted_power_exact, transmitted_power_highbias, SystemModel,
};
use nis_calib::Bias;

fn main() -> nis_calib::Result<()> {
    let model = SystemModel::default();
    let gap = model.junction.gap_energy;
    let c = model.highbias_coefficients()?;
    println!(
        "P_tr ~ {:.4e}·V + {:.4e} + {:.4e}/V  (V = V_b/2)",
        c.linear, c.constant, c.inverse
    );
    println!(
        "{:>8} {:>10} {:>14} {:>14} {:>9}",
        "eVb/2D", "N_r", "P_tr exact W", "P_tr hb W", "rel diff"
    );
    for x in [0.0, 0.5, 1.0, 1.5, 2.0, 4.0, 6.0, 8.0, 10.0] {
        let bias = Bias::from_reduced(x, gap);
        let n = steady_state_occupation(&model.all_reservoirs(bias)?)?;
        let exact = transmitted_power_exact(bias, &model)?;
        if x == 0.0 {
            println!("{x:>8.2} {n:>10.4} {exact:>14.4e} {:>14} {:>9}", "-", "-");
            continue;
        }
        let hb = transmitted_power_highbias(bias, &model)?;
        println!(
            "{x:>8.2} {n:>10.4} {exact:>14.4e} {hb:>14.4e} {:>8.3}%",
            100.0 * (hb - exact) / exact
        );
    }
    Ok(())
}
