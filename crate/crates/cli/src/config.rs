use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use apptsched::mdp::MdpConfig;
use serde::{Deserialize, Serialize};

/// Every config key with its unit, shown under `--help`.
pub const CONFIG_KEYS: &str = "\
CONFIG KEYS (JSON; every key optional, unknown keys rejected):
  dataset_path                 path to the patient CSV (relative to the config file)
  features                     list of column names to read as plain numbers instead of the 29-feature intake schema
  schema_aliases               map of CSV header -> schema feature name
  clustering.k_max             largest k on the elbow curve (clusters; default 10)
  clustering.k                 number of clusters; default is the elbow knee (clusters)
  clustering.restarts          k-means restarts per fit (count; default 10)
  clustering.seed              k-means seed (u64; default 0)
  feature_select.tolerance     minimum criterion gain to keep adding features (unitless; default 1e-6)
  mdp.classes                  priority classes I (count)
  mdp.horizon                  booking horizon H (days)
  mdp.capacity                 appointment slots per day G (slots/day)
  mdp.d_max                    per-class cap on daily requests D_i (patients/day)
  mdp.arrival_rates            per-class Poisson mean lambda_i (patients/day)
  mdp.late_costs               I x H matrix b_ih (cost units per patient booked h days ahead)
  mdp.reject_costs             per-class c_i (cost units per rejected patient)
  mdp.discount                 discount factor in [0, 1) (per day; default 0.95)
  mdp.seed                     model seed (u64; default 0)
  fluid.t_steps                fluid LP horizon T (days; default 28, at least H, 2H for policy extraction)
  fluid.dt                     fluid LP step (days; only 1 is supported)
  exact.tolerance              value-iteration stopping tolerance (cost units; default 1e-9)
  simulation.days              simulated days per replication, warmup included (days; default 365)
  simulation.replications      independent replications (count; default 10)
  simulation.seed              arrival-stream seed (u64; default 1)
  simulation.warmup            leading days left out of metrics (days; default 14)
  simulation.policy_path       quota policy JSON for `simulate` (relative to the config file)
  simulation.trace             write trace.csv as if --trace were given (bool; default false)
  output_dir                   directory for all outputs (relative to the config file; default \"out\")

Without --config the published two-class, seven-day instance is used.
--seed overrides clustering.seed, simulation.seed and mdp.seed; --out overrides output_dir.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSection {
    pub k_max: usize,
    pub k: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        Self {
            k_max: 10,
            k: None,
            restarts: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub tolerance: f64,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidSection {
    pub t_steps: usize,
    pub dt: f64,
}

impl Default for FluidSection {
    fn default() -> Self {
        Self {
            t_steps: apptsched::fluid::DEFAULT_T_STEPS,
            dt: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactSection {
    pub tolerance: f64,
}

impl Default for ExactSection {
    fn default() -> Self {
        Self { tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub days: usize,
    pub replications: usize,
    pub seed: u64,
    pub warmup: usize,
    pub policy_path: Option<PathBuf>,
    pub trace: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            days: 365,
            replications: 10,
            seed: 1,
            warmup: 14,
            policy_path: None,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: Option<PathBuf>,
    pub features: Option<Vec<String>>,
    pub schema_aliases: BTreeMap<String, String>,
    pub clustering: ClusteringSection,
    pub feature_select: FeatureSection,
    pub mdp: MdpConfig,
    pub fluid: FluidSection,
    pub exact: ExactSection,
    pub simulation: SimulationSection,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_path: None,
            features: None,
            schema_aliases: BTreeMap::new(),
            clustering: ClusteringSection::default(),
            feature_select: FeatureSection::default(),
            mdp: MdpConfig::reference_instance(),
            fluid: FluidSection::default(),
            exact: ExactSection::default(),
            simulation: SimulationSection::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.dataset_path.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.simulation.policy_path.as_mut() {
            rebase(p);
        }
        rebase(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.clustering.seed = seed;
        self.simulation.seed = seed;
        self.mdp.seed = seed;
    }
}
