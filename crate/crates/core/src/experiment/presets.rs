//! Sweeps that regenerate the five standard figures.

use super::config::{linspace, Mode, Receiver, Series, SweepKind, SweepSpec};
use crate::error::{Error, Result};
use crate::ofdm::Scheme;

pub const PRESETS: [&str; 5] = ["fig1", "fig2", "fig3", "fig4", "fig5"];

fn series(scheme: Scheme, qam_order: usize, kappa: f64, receiver: Receiver) -> Series {
    Series {
        scheme,
        qam_order,
        kappa,
        receiver,
        dco_bias: None,
    }
}

/// SDNR and SSNR figures share one sweep: κ ∈ {2, 3, 4}, SPAD and ideal.
fn noise_ratio_series() -> Vec<Series> {
    let mut out = Vec::new();
    for receiver in [Receiver::Spad, Receiver::Ideal] {
        for kappa in [2.0, 3.0, 4.0] {
            out.push(series(Scheme::Aco, 16, kappa, receiver));
        }
    }
    out
}

/// Applies preset `name` on top of `base`, keeping its device, channel and
/// Monte Carlo settings.
pub fn apply_preset(name: &str, base: &SweepSpec) -> Result<SweepSpec> {
    let mut spec = base.clone();
    spec.kind = SweepKind::Link;
    spec.mode = Mode::Analytic;
    match name {
        "fig1" => {
            spec.kind = SweepKind::PhotonCounts;
            spec.p_rx_dbm = linspace(-60.0, 0.0, 61);
        }
        "fig2" | "fig3" => spec.series = noise_ratio_series(),
        "fig4" => {
            spec.series = vec![
                series(Scheme::Aco, 16, 3.0, Receiver::Spad),
                series(Scheme::Aco, 256, 3.0, Receiver::Spad),
            ];
        }
        "fig5" => {
            spec.series = vec![
                series(Scheme::Aco, 16, 3.0, Receiver::Spad),
                series(Scheme::Dco, 4, 3.0, Receiver::Spad),
                series(Scheme::Aco, 256, 3.0, Receiver::Spad),
                series(Scheme::Dco, 16, 3.0, Receiver::Spad),
            ];
            // DCO curves only exist as simulations.
            spec.mode = Mode::Both;
        }
        other => return Err(Error::UnknownPreset(other.to_owned())),
    }
    spec.validate()?;
    Ok(spec)
}

/// Preset `name` over the default device parameters.
pub fn figure_presets(name: &str) -> Result<SweepSpec> {
    apply_preset(name, &SweepSpec::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            figure_presets(name).unwrap();
        }
        assert!(matches!(figure_presets("fig6"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn preset_contents() {
        let fig2 = figure_presets("fig2").unwrap();
        assert_eq!(fig2.series.len(), 6);
        assert!(fig2.series.iter().any(|s| s.receiver == Receiver::Ideal));
        let kappas: std::collections::BTreeSet<u64> = fig2.series.iter().map(|s| s.kappa as u64).collect();
        assert_eq!(kappas.into_iter().collect::<Vec<_>>(), vec![2, 3, 4]);

        let fig4 = figure_presets("fig4").unwrap();
        assert!(fig4.series.iter().all(|s| s.kappa == 3.0 && s.scheme == Scheme::Aco));
        assert_eq!(fig4.series.iter().map(|s| s.qam_order).collect::<Vec<_>>(), vec![16, 256]);

        let fig5 = figure_presets("fig5").unwrap();
        let pairs: Vec<(Scheme, usize)> = fig5.series.iter().map(|s| (s.scheme, s.qam_order)).collect();
        assert_eq!(
            pairs,
            vec![(Scheme::Aco, 16), (Scheme::Dco, 4), (Scheme::Aco, 256), (Scheme::Dco, 16)]
        );
        assert_eq!(figure_presets("fig1").unwrap().kind, SweepKind::PhotonCounts);
    }

    #[test]
    fn preset_keeps_base_device() {
        let base = SweepSpec {
            p_max: 5e-3,
            ..SweepSpec::default()
        };
        assert_eq!(apply_preset("fig4", &base).unwrap().p_max, 5e-3);
    }
}
