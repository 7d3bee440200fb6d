//! Handcrafted per-channel window descriptors.
//!
//! The registry holds 56 extraction methods in five families; expanding the
//! multi-output methods (AR, CC, DAR, DCC with 4 coefficients each, HIST,
//! MHW, MTW with 3 values each, TDPSD with 6) yields exactly 79 descriptor
//! rows. Each descriptor is evaluated on every channel of every window, so a
//! window set of `W` windows produces a `79 x (W * 10)` point cloud whose
//! columns are window-major, channel-minor.
//!
//! Formula details and default parameters are documented per method in
//! `docs/features.md`.

mod cloud;
mod methods;
mod spectrum;

pub use cloud::{extract_all, FeaturePointCloud, LabeledCloud, PointMeta};
pub use spectrum::{periodogram, Spectrum};

use serde::{Deserialize, Serialize};

/// Feature families used for grouping and composition labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    /// Signal amplitude and power.
    Sap,
    /// Frequency information.
    Fi,
    /// Nonlinear complexity.
    Nlc,
    /// Time-series modeling.
    Tsm,
    /// Unique methods.
    Uni,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::Sap, Group::Fi, Group::Nlc, Group::Tsm, Group::Uni];

    pub fn name(self) -> &'static str {
        match self {
            Group::Sap => "SAP",
            Group::Fi => "FI",
            Group::Nlc => "NLC",
            Group::Tsm => "TSM",
            Group::Uni => "UNI",
        }
    }
}

macro_rules! methods {
    ($( $variant:ident => ($name:literal, $group:ident, $dim:literal) ),+ $(,)?) => {
        /// One handcrafted extraction method.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum Method {
            $( $variant, )+
        }

        impl Method {
            pub const ALL: [Method; 56] = [ $( Method::$variant, )+ ];

            /// Mnemonic used in exports and reports.
            pub fn name(self) -> &'static str {
                match self { $( Method::$variant => $name, )+ }
            }

            pub fn group(self) -> Group {
                match self { $( Method::$variant => Group::$group, )+ }
            }

            /// Number of descriptor values the method emits per channel.
            pub fn output_dim(self) -> usize {
                match self { $( Method::$variant => $dim, )+ }
            }
        }
    };
}

methods! {
    // Signal amplitude and power (25 methods).
    Afb   => ("AFB",   Sap, 1),
    Damv  => ("DAMV",  Sap, 1),
    Dasdv => ("DASDV", Sap, 1),
    Dld   => ("DLD",   Sap, 1),
    Dtm   => ("DTM",   Sap, 1),
    Dv    => ("DV",    Sap, 1),
    Dvarv => ("DVARV", Sap, 1),
    Iemg  => ("IEMG",  Sap, 1),
    Ld    => ("LD",    Sap, 1),
    M2    => ("M2",    Sap, 1),
    Mav   => ("MAV",   Sap, 1),
    Max   => ("MAX",   Sap, 1),
    Mhw   => ("MHW",   Sap, 3),
    Mmav1 => ("MMAV1", Sap, 1),
    Mmav2 => ("MMAV2", Sap, 1),
    Mnp   => ("MNP",   Sap, 1),
    Mtw   => ("MTW",   Sap, 3),
    Rms   => ("RMS",   Sap, 1),
    Sm    => ("SM",    Sap, 1),
    Ssi   => ("SSI",   Sap, 1),
    Tm    => ("TM",    Sap, 1),
    Ttp   => ("TTP",   Sap, 1),
    V     => ("V",     Sap, 1),
    Var   => ("VAR",   Sap, 1),
    Wl    => ("WL",    Sap, 1),
    // Frequency information (5 methods).
    Fr    => ("FR",    Fi, 1),
    Mdf   => ("MDF",   Fi, 1),
    Mnf   => ("MNF",   Fi, 1),
    Ssc   => ("SSC",   Fi, 1),
    Zc    => ("ZC",    Fi, 1),
    // Nonlinear complexity (6 methods).
    Apen   => ("APEN",   Nlc, 1),
    Bc     => ("BC",     Nlc, 1),
    Katz   => ("KATZ",   Nlc, 1),
    Mfl    => ("MFL",    Nlc, 1),
    Sampen => ("SAMPEN", Nlc, 1),
    Wamp   => ("WAMP",   Nlc, 1),
    // Time-series modeling (7 methods).
    Ar    => ("AR",  Tsm, 4),
    Cc    => ("CC",  Tsm, 4),
    Dar   => ("DAR", Tsm, 4),
    Dcc   => ("DCC", Tsm, 4),
    Dfa   => ("DFA", Tsm, 1),
    Psr   => ("PSR", Tsm, 1),
    Snr   => ("SNR", Tsm, 1),
    // Unique methods (13 methods).
    Ce    => ("CE",    Uni, 1),
    Dpr   => ("DPR",   Uni, 1),
    Hist  => ("HIST",  Uni, 3),
    Kurt  => ("KURT",  Uni, 1),
    Mavs  => ("MAVS",  Uni, 1),
    Ohm   => ("OHM",   Uni, 1),
    Pkf   => ("PKF",   Uni, 1),
    Psdfd => ("PSDFD", Uni, 1),
    Skew  => ("SKEW",  Uni, 1),
    Smr   => ("SMR",   Uni, 1),
    Tdpsd => ("TDPSD", Uni, 6),
    Vcf   => ("VCF",   Uni, 1),
    Vfd   => ("VFD",   Uni, 1),
}

/// Total descriptor rows after expanding multi-output methods.
pub const DESCRIPTOR_COUNT: usize = 79;

/// One expanded descriptor row of the registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Descriptor {
    pub method: Method,
    /// Index within the method's outputs.
    pub component: usize,
}

impl Descriptor {
    /// Export label: the mnemonic, suffixed with a 1-based component index
    /// for multi-output methods (`AR1`..`AR4`, `HIST1`..`HIST3`, ...).
    pub fn label(&self) -> String {
        if self.method.output_dim() == 1 {
            self.method.name().to_string()
        } else {
            format!("{}{}", self.method.name(), self.component + 1)
        }
    }

    pub fn group(&self) -> Group {
        self.method.group()
    }
}

/// Expanded registry in family order (SAP, FI, NLC, TSM, UNI).
pub fn registry() -> Vec<Descriptor> {
    let mut rows = Vec::with_capacity(DESCRIPTOR_COUNT);
    for method in Method::ALL {
        for component in 0..method.output_dim() {
            rows.push(Descriptor { method, component });
        }
    }
    rows
}

/// Looks a method up by its export mnemonic (case-insensitive).
pub fn method_by_name(name: &str) -> Option<Method> {
    Method::ALL
        .into_iter()
        .find(|m| m.name().eq_ignore_ascii_case(name))
}

/// Tunable extraction parameters. Defaults follow the common literature
/// settings for 1 kHz surface EMG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Amplitude threshold for zero-crossing counting.
    pub zc_threshold: f64,
    /// Threshold on the product of adjacent slopes for SSC counting.
    pub ssc_threshold: f64,
    /// Amplitude-difference threshold for Willison amplitude.
    pub wamp_threshold: f64,
    /// Low band for the frequency ratio, Hz.
    pub fr_low_hz: (f64, f64),
    /// High band for the frequency ratio, Hz.
    pub fr_high_hz: (f64, f64),
    /// Exponent of the v-order features.
    pub v_order: f64,
    /// Half-width of the histogram span in standard deviations.
    pub hist_sigma_span: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            zc_threshold: 10.0,
            ssc_threshold: 10.0,
            wamp_threshold: 10.0,
            fr_low_hz: (20.0, 247.0),
            fr_high_hz: (247.0, 495.0),
            v_order: 3.0,
            hist_sigma_span: 3.0,
        }
    }
}

/// Evaluates one method on a channel of window samples with default
/// parameters. Multi-output methods return `output_dim` values.
pub fn extract_method(method: Method, samples: &[f64]) -> Vec<f64> {
    extract_method_with(method, samples, &FeatureConfig::default())
}

/// Evaluates one method with explicit parameters.
pub fn extract_method_with(method: Method, samples: &[f64], cfg: &FeatureConfig) -> Vec<f64> {
    let ctx = methods::Ctx::new(samples);
    methods::compute(method, &ctx, cfg)
}
