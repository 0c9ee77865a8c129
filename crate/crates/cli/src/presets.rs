use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2FreqError,
    Fig3Roc,
    Fig4PdVsM,
    ComplexityTable,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Fig2FreqError,
        Preset::Fig3Roc,
        Preset::Fig4PdVsM,
        Preset::ComplexityTable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2FreqError => "fig2_freq_error",
            Preset::Fig3Roc => "fig3_roc",
            Preset::Fig4PdVsM => "fig4_pd_vs_m",
            Preset::ComplexityTable => "complexity_table",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Preset::Fig2FreqError => "frequency estimation error against SNR (freq_error.csv)",
            Preset::Fig3Roc => "ROC curves of all detectors, one file per SNR (roc_snr<X>db.csv)",
            Preset::Fig4PdVsM => "P_D at fixed P_FA against frame length (pd_vs_m.csv)",
            Preset::ComplexityTable => "per-frame complex operation counts (complexity.csv)",
        }
    }

    pub fn toml(self) -> &'static str {
        match self {
            Preset::Fig2FreqError => include_str!("../presets/fig2_freq_error.toml"),
            Preset::Fig3Roc => include_str!("../presets/fig3_roc.toml"),
            Preset::Fig4PdVsM => include_str!("../presets/fig4_pd_vs_m.toml"),
            Preset::ComplexityTable => include_str!("../presets/complexity_table.toml"),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
            format!("unknown preset {s:?}; available: {}", names.join(", "))
        })
    }
}
