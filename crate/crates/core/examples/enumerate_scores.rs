//! Every per-encounter score the v1 model can produce.

use cwa_risk::basic::enumerate_possible_trs;
use cwa_risk::RiskConfig;

fn main() {
    let scores = enumerate_possible_trs(&RiskConfig::default());
    println!("{} possible scores: {scores:?}", scores.len());
}
