//! Simulated attenuation over distance, and which proximity bucket it lands
//! in.

use cwa_risk::contact_sim::{attenuation_from_distance, PathLossModel};
use cwa_risk::RiskConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let config = RiskConfig::default();
    let noiseless = PathLossModel::default();
    let noisy = PathLossModel {
        noise_sigma_db: 4.0,
        ..noiseless
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!("distance  dB     class   noisy dB (sigma 4)");
    for d in [0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0] {
        let db = attenuation_from_distance(d, &noiseless, &mut rng);
        let samples: Vec<String> = (0..4)
            .map(|_| {
                format!(
                    "{:.1}",
                    attenuation_from_distance(d, &noisy, &mut rng).value()
                )
            })
            .collect();
        println!(
            "{d:>5.1} m  {:>5.1}  {:<6}  {}",
            db.value(),
            format!("{:?}", config.distance_class(db)),
            samples.join(" ")
        );
    }
}
