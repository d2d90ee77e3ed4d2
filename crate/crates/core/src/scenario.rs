//! Scenario documents: one JSON file describing the circuit, the links, the
//! transmitter, the MDP discretization, the solver settings and the
//! surrogate pipeline. Quantities in SI units unless the field name ends in
//! `_dbm` or `_db`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{
    CircuitSimulator, CircuitSpec, DiodeParams, MatchingDesign, MatchingNetworkSpec, SymbolResponder, Topology,
};
use crate::error::{Error, Result};
use crate::info::{ChannelSpec, Constellation, Fading, LinkSpec, MiEngine};
use crate::mdp::{build_transition_model, TransitionModel, VoltageQuantizer};
use crate::optimizer::SolverConfig;
use crate::surrogate::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub topology: Topology,
    pub matching_design: MatchingDesign,
    pub symbol_duration: f64,
    /// Replaces the tabulated matching network of `matching_design`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchingNetworkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diode: Option<DiodeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_capacitance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_resistance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antenna_resistance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub distance: f64,
    pub pathloss_exponent: f64,
    #[serde(default)]
    pub fading: Fading,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub carrier_frequency: f64,
    pub reference_distance: f64,
    /// Noise power per real dimension.
    pub noise_power_dbm: f64,
    pub ir: LinkSection,
    pub eh: LinkSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmitterSection {
    pub peak_power_dbm: f64,
    pub average_power_dbm: f64,
    pub constellation_size: usize,
    /// Largest amplitude in √W; when given it must be the square root of the
    /// peak power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpSection {
    pub states: usize,
    /// Amplitude subsamples per voltage bin.
    #[serde(default = "default_subsamples")]
    pub subsamples: usize,
}

fn default_subsamples() -> usize {
    32
}

/// Solver settings; the power budget comes from the transmitter section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub i_req: f64,
    pub eps_tol_initial: f64,
    pub eps_shrink: f64,
    pub m_max: usize,
    pub n_max: usize,
    pub inner_term_eps: f64,
    pub outer_term_eps: f64,
    pub fw_max_iters: usize,
    pub fw_gap_tol: f64,
    pub lambda_bisect_tol: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            i_req: d.i_req,
            eps_tol_initial: d.eps_tol_initial,
            eps_shrink: d.eps_shrink,
            m_max: d.m_max,
            n_max: d.n_max,
            inner_term_eps: d.inner_term_eps,
            outer_term_eps: d.outer_term_eps,
            fw_max_iters: d.fw_max_iters,
            fw_gap_tol: d.fw_gap_tol,
            lambda_bisect_tol: d.lambda_bisect_tol,
        }
    }
}

/// Source of the symbol responses the MDP is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponderKind {
    #[default]
    Circuit,
    Surrogate,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    /// Paths relative to the scenario file.
    pub voltage_model: PathBuf,
    pub power_model: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableSection {
    pub voltage_nodes: usize,
    pub amplitude_nodes: usize,
}

impl Default for TableSection {
    fn default() -> Self {
        Self { voltage_nodes: 65, amplitude_nodes: 65 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self { train: 2000, validation: 500, test: 500 }
    }
}

impl DatasetSection {
    pub fn total(&self) -> usize {
        self.train + self.validation + self.test
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub circuit: CircuitSection,
    pub channel: ChannelSection,
    pub transmitter: TransmitterSection,
    pub mdp: MdpSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub backend: ResponderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateSection>,
    #[serde(default)]
    pub table: TableSection,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Received-power regime of the bundled scenarios, set by the EH distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Lp,
    Mp,
    Hp,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Lp, Regime::Mp, Regime::Hp];

    pub fn eh_distance(self) -> f64 {
        match self {
            Regime::Lp => 20.0,
            Regime::Mp => 10.0,
            Regime::Hp => 2.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Lp => "lp",
            Regime::Mp => "mp",
            Regime::Hp => "hp",
        }
    }
}

impl Scenario {
    /// Reference parameters: 50 dBm peak and 42 dBm average transmit power,
    /// 64 amplitudes, 50 voltage states, −70 dBm noise, IR link at 40 m with
    /// exponent 3, EH link with exponent 2 at the regime's distance, 2.45 GHz
    /// and a 10 µs symbol.
    pub fn reference(regime: Regime, topology: Topology, design: MatchingDesign) -> Self {
        let topo = match topology {
            Topology::HalfWave => "hw",
            Topology::FullWaveBridge => "fw",
        };
        let mc = match design {
            MatchingDesign::Minus13Dbm => "m13",
            MatchingDesign::ZeroDbm => "0dbm",
        };
        let name = format!("{}_{topo}_{mc}", regime.label());
        Self {
            output_dir: Some(PathBuf::from(format!("out/{name}"))),
            name,
            circuit: CircuitSection {
                topology,
                matching_design: design,
                symbol_duration: 10e-6,
                matching: None,
                diode: None,
                load_capacitance: None,
                load_resistance: None,
                antenna_resistance: None,
            },
            channel: ChannelSection {
                carrier_frequency: 2.45e9,
                reference_distance: 1.0,
                noise_power_dbm: -70.0,
                ir: LinkSection { distance: 40.0, pathloss_exponent: 3.0, fading: Fading::None },
                eh: LinkSection { distance: regime.eh_distance(), pathloss_exponent: 2.0, fading: Fading::None },
            },
            transmitter: TransmitterSection {
                peak_power_dbm: 50.0,
                average_power_dbm: 42.0,
                constellation_size: 64,
                r_max: None,
            },
            mdp: MdpSection { states: 50, subsamples: default_subsamples() },
            solver: SolverSection::default(),
            backend: ResponderKind::Circuit,
            surrogate: None,
            table: TableSection::default(),
            dataset: DatasetSection::default(),
            train: TrainConfig::default(),
            seed: 1,
        }
    }

    /// Every bundled scenario: each regime with both rectifiers and both
    /// matching networks.
    pub fn bundled() -> Vec<Self> {
        let mut out = Vec::new();
        for regime in Regime::ALL {
            for topology in [Topology::HalfWave, Topology::FullWaveBridge] {
                for design in [MatchingDesign::Minus13Dbm, MatchingDesign::ZeroDbm] {
                    out.push(Self::reference(regime, topology, design));
                }
            }
        }
        out
    }

    /// Parses and validates a scenario. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "scenario".to_string() } else { path }, e.inner().to_string())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Reads a scenario and checks that the files it references exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("scenario", format!("cannot read {}: {e}", path.display())))?;
        let scenario = Self::from_json(&text)?;
        if let Some(s) = &scenario.surrogate {
            let base = path.parent().unwrap_or(Path::new("."));
            for (field, p) in [("surrogate.voltage_model", &s.voltage_model), ("surrogate.power_model", &s.power_model)] {
                if !base.join(p).is_file() {
                    return Err(Error::config(field, format!("file {} does not exist", base.join(p).display())));
                }
            }
        }
        Ok(scenario)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        self.circuit_spec().validate()?;
        self.channel_spec().validate()?;
        let t = &self.transmitter;
        if !t.peak_power_dbm.is_finite() {
            return Err(Error::config("transmitter.peak_power_dbm", "must be finite"));
        }
        if !t.average_power_dbm.is_finite() {
            return Err(Error::config("transmitter.average_power_dbm", "must be finite"));
        }
        if t.constellation_size < 2 {
            return Err(Error::config("transmitter.constellation_size", "must be at least 2"));
        }
        if let Some(r) = t.r_max {
            let want = 10f64.powf((t.peak_power_dbm - 30.0) / 20.0);
            if !((r - want).abs() <= 1e-9 * want) {
                return Err(Error::config(
                    "transmitter.r_max",
                    format!("{r} does not match the peak power limit {want}"),
                ));
            }
        }
        if self.mdp.states < 2 {
            return Err(Error::config("mdp.states", "must be at least 2"));
        }
        if self.mdp.subsamples == 0 {
            return Err(Error::config("mdp.subsamples", "must be at least 1"));
        }
        self.solver_config().validate()?;
        if self.backend == ResponderKind::Surrogate && self.surrogate.is_none() {
            return Err(Error::config("surrogate", "required when the backend is the surrogate"));
        }
        if self.table.voltage_nodes < 2 || self.table.amplitude_nodes < 2 {
            return Err(Error::config("table", "each axis needs at least two nodes"));
        }
        if self.dataset.train == 0 {
            return Err(Error::config("dataset.train", "must be > 0"));
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn circuit_spec(&self) -> CircuitSpec {
        let c = &self.circuit;
        let mut spec = CircuitSpec::reference(c.topology, c.matching_design, c.symbol_duration);
        if let Some(m) = c.matching {
            spec.matching = m;
        }
        if let Some(d) = c.diode {
            spec.diode = d;
        }
        if let Some(v) = c.load_capacitance {
            spec.load_capacitance = v;
        }
        if let Some(v) = c.load_resistance {
            spec.load_resistance = v;
        }
        if let Some(v) = c.antenna_resistance {
            spec.antenna_resistance = v;
        }
        spec.carrier_frequency = self.channel.carrier_frequency;
        spec
    }

    pub fn channel_spec(&self) -> ChannelSpec {
        let ch = &self.channel;
        let link = |l: &LinkSection| LinkSpec {
            pathloss_exponent: l.pathloss_exponent,
            distance: l.distance,
            reference_distance: ch.reference_distance,
            carrier_frequency: ch.carrier_frequency,
            fading: l.fading,
        };
        ChannelSpec { ir: link(&ch.ir), eh: link(&ch.eh), noise_variance: crate::dbm_to_watts(ch.noise_power_dbm) }
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::from_peak_power_dbm(self.transmitter.constellation_size, self.transmitter.peak_power_dbm)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            i_req: s.i_req,
            ap_budget: crate::dbm_to_watts(self.transmitter.average_power_dbm),
            eps_tol_initial: s.eps_tol_initial,
            eps_shrink: s.eps_shrink,
            m_max: s.m_max,
            n_max: s.n_max,
            inner_term_eps: s.inner_term_eps,
            outer_term_eps: s.outer_term_eps,
            fw_max_iters: s.fw_max_iters,
            fw_gap_tol: s.fw_gap_tol,
            lambda_bisect_tol: s.lambda_bisect_tol,
        }
    }

    /// Largest amplitude reaching the harvester, `|h_E| r_max`.
    pub fn max_received_amplitude(&self) -> Result<f64> {
        Ok(self.channel_spec().eh_gain_magnitude()? * self.constellation()?.r_max())
    }

    pub fn simulator(&self) -> Result<CircuitSimulator> {
        CircuitSimulator::new(self.circuit_spec(), self.max_received_amplitude()?)
    }

    /// Quantizes `[0, responder ceiling]` into the scenario's states and
    /// builds the transition model over its constellation.
    pub fn build_model<R: SymbolResponder + ?Sized>(&self, responder: &R) -> Result<TransitionModel> {
        let q = VoltageQuantizer::new(self.mdp.states, responder.voltage_ceiling())?;
        build_transition_model(
            responder,
            q,
            &self.constellation()?,
            self.channel_spec().eh_gain_magnitude()?,
            self.mdp.subsamples,
        )
    }

    pub fn mi_engine(&self) -> Result<MiEngine> {
        MiEngine::for_channel(&self.constellation()?, &self.channel_spec())
    }

    /// Same scenario with a coarser discretization.
    pub fn with_sizes(&self, states: usize, constellation_size: usize) -> Self {
        let mut out = self.clone();
        out.mdp.states = states;
        out.transmitter.constellation_size = constellation_size;
        out
    }
}
