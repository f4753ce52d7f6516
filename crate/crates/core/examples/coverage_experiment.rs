//! Monte Carlo coverage at 30% adoption, with the two sharing rates and a
//! mix of short and long contacts.

use cwa_risk::coverage::{
    self, CoverageParams, DurationDistribution, MixtureComponent, Perspective,
    POSITIVE_TEST_SHARING_RATE,
};

fn main() -> cwa_risk::Result<()> {
    let params = CoverageParams::thirty_percent_adoption();
    let report = coverage::monte_carlo_coverage(&params)?;
    println!(
        "registered {:.4} (closed form {:.4})",
        report.registered_fraction.value,
        coverage::registration_fraction_closed_form(params.adoption_rate)
    );
    println!(
        "effective  {:.4} (closed form {:.4})",
        report.effective_fraction.value,
        coverage::effective_fraction_closed_form(params.adoption_rate, params.reporting_rate)
    );
    if let Some(f) = report.individual_underestimation_factor {
        println!(
            "app user underestimation x{:.2} [{:.2}, {:.2}]",
            f.value, f.ci_low, f.ci_high
        );
    }

    let all_positives = CoverageParams {
        reporting_rate: POSITIVE_TEST_SHARING_RATE,
        ..params.clone()
    };
    let f = coverage::underestimation_factor(&all_positives, Perspective::Individual)?;
    println!(
        "sharing {POSITIVE_TEST_SHARING_RATE:.4}: underestimation x{:.1}",
        f.value
    );

    let mixed = CoverageParams {
        contact_duration: DurationDistribution::Mixture {
            components: vec![
                MixtureComponent {
                    weight: 0.5,
                    minutes: 3.0,
                },
                MixtureComponent {
                    weight: 0.5,
                    minutes: 30.0,
                },
            ],
        },
        trials: 20_000,
        ..params
    };
    let report = coverage::monte_carlo_coverage(&mixed)?;
    println!(
        "half 3-minute contacts: missed {:.3}, underestimation x{:.2}",
        report.short_contact_miss_rate.value,
        report
            .individual_underestimation_factor
            .map_or(f64::INFINITY, |f| f.value)
    );
    Ok(())
}
