//! One configured run of any scheme, from flags or a flat key-value file.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::Rng;
use sha2::{Digest, Sha256};

use super::metrics::RunMetrics;
use super::scripts::{parse_adversary, AdversaryScript, DropoutScript};
use crate::algebra::{FieldElement, FieldParams, GroupParams};
use crate::baselines::{effiagg, secagg};
use crate::error::{Error, Result};
use crate::masking::{encode_vector, MaskParams, MAX_INPUT};
use crate::protocol::{active_threshold, run_aggregation, AggregationResult, Mode, ProtocolConfig, RunEnv};
use crate::rng::{seeded_stream, RandomnessSource};
use crate::tskg::Deployment;

/// Constant per-message latency of the wide-area profile.
pub const WAN_LATENCY: Duration = Duration::from_millis(235);

/// Default exclusive bound on inputs for the group-based baseline.
pub const EFFIAGG_BOUND: u64 = 1 << 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    AhSecAgg,
    SecAgg,
    SecAggTskg,
    EffiAgg,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::AhSecAgg, Scheme::SecAgg, Scheme::SecAggTskg, Scheme::EffiAgg];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::AhSecAgg => "ahsecagg",
            Scheme::SecAgg => "secagg",
            Scheme::SecAggTskg => "secagg_tskg",
            Scheme::EffiAgg => "effiagg",
        }
    }

    /// Schemes that share keys in `Z_q` need a group of small order.
    pub fn default_group(self) -> &'static str {
        match self {
            Scheme::AhSecAgg | Scheme::SecAgg => "modp2048",
            Scheme::SecAggTskg | Scheme::EffiAgg => "desk",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| Error::config(format!("unknown scheme '{s}'")))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Network {
    Lan,
    Wan,
    Fixed(Duration),
}

impl Network {
    pub fn latency(self) -> Duration {
        match self {
            Network::Lan => Duration::ZERO,
            Network::Wan => WAN_LATENCY,
            Network::Fixed(d) => d,
        }
    }
}

impl FromStr for Network {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lan" => Ok(Network::Lan),
            "wan" => Ok(Network::Wan),
            ms => ms
                .trim_end_matches("ms")
                .parse::<u64>()
                .map(|v| Network::Fixed(Duration::from_millis(v)))
                .map_err(|_| Error::config(format!("network must be lan, wan or a latency in ms, got '{s}'"))),
        }
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub n: usize,
    /// `None` picks `ceil(2n/3)`, raised to `floor(2n/3) + 1` in active mode.
    pub t: Option<usize>,
    pub m: usize,
    pub mode: Mode,
    /// `None` picks the scheme's default.
    pub group: Option<String>,
    pub seed: u64,
    pub dropout_round: u8,
    pub dropout_rate: f64,
    pub adversary: Option<AdversaryScript>,
    pub network: Network,
    pub parallel: bool,
    /// Aggregations after one preparation, for `secagg_tskg`.
    pub aggregations: usize,
    pub effiagg_bound: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scheme: Scheme::AhSecAgg,
            n: 10,
            t: None,
            m: 100,
            mode: Mode::SemiHonest,
            group: None,
            seed: 0,
            dropout_round: 2,
            dropout_rate: 0.0,
            adversary: None,
            network: Network::Lan,
            parallel: false,
            aggregations: 1,
            effiagg_bound: EFFIAGG_BOUND,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(format!("bad value '{v}' for '{key}'")))
}

impl RunConfig {
    pub fn threshold(&self) -> usize {
        self.t.unwrap_or_else(|| {
            let t = (2 * self.n).div_ceil(3);
            if self.mode == Mode::ActiveAdversary {
                t.max(active_threshold(self.n))
            } else {
                t
            }
        })
    }

    pub fn group_name(&self) -> &str {
        self.group.as_deref().unwrap_or(self.scheme.default_group())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "scheme" => self.scheme = value.parse()?,
            "n" => self.n = parse(key, value)?,
            "t" => self.t = Some(parse(key, value)?),
            "m" => self.m = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "group" => self.group = Some(value.to_string()),
            "seed" => self.seed = parse(key, value)?,
            "dropout_round" => self.dropout_round = parse(key, value)?,
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "adversary" => self.adversary = parse_adversary(value)?,
            "network" => self.network = value.parse()?,
            "parallel" => self.parallel = parse(key, value)?,
            "aggregations" => self.aggregations = parse(key, value)?,
            "effiagg_bound" => self.effiagg_bound = parse(key, value)?,
            other => return Err(Error::config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Flat `key = value` lines; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn protocol_config(&self) -> Result<ProtocolConfig> {
        let field = FieldParams::default();
        let group = GroupParams::by_name(self.group_name())?.shared();
        let mut rng = seeded_stream(self.seed, "mask-params", 0);
        let mask = MaskParams::random(&field, self.m, &mut rng)?;
        ProtocolConfig::new(self.n, self.threshold(), self.mode, field, group, mask)
    }

    pub fn dropout(&self) -> Result<DropoutScript> {
        DropoutScript::from_rate(self.n, self.dropout_round, self.dropout_rate, self.seed)
    }

    pub fn env(&self) -> RunEnv {
        RunEnv { randomness: RandomnessSource::Seeded(self.seed), latency: self.network.latency(), parallel: self.parallel }
    }

    /// Seeded inputs: 32-bit components, or `[0, bound)` for the group-based
    /// baseline.
    pub fn inputs(&self, field: &FieldParams) -> Vec<Vec<FieldElement>> {
        let hi = if self.scheme == Scheme::EffiAgg { self.effiagg_bound } else { MAX_INPUT + 1 };
        let mut rng = seeded_stream(self.seed, "inputs", 0);
        (0..self.n).map(|_| (0..self.m).map(|_| field.elem(rng.gen_range(0..hi))).collect()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub config: RunConfig,
    /// The last aggregation.
    pub result: AggregationResult,
    /// Every aggregation, for `secagg_tskg` with several.
    pub rounds: Vec<AggregationResult>,
    pub preparation: Option<RunMetrics>,
}

impl Report {
    pub fn succeeded(&self) -> bool {
        self.rounds.iter().all(|r| r.outcome.succeeded())
    }

    pub fn matches_oracle(&self) -> bool {
        self.rounds.iter().all(AggregationResult::matches_oracle)
    }

    /// First 16 hex digits of SHA-256 over the encoded output.
    pub fn checksum(&self) -> Option<String> {
        let out = self.result.output()?;
        let digest = Sha256::digest(encode_vector(&FieldParams::default(), out));
        Some(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Report> {
    let pc = cfg.protocol_config()?;
    let inputs = cfg.inputs(&pc.field);
    let dropout = cfg.dropout()?;
    let env = cfg.env();
    if cfg.adversary.is_some() && cfg.scheme != Scheme::AhSecAgg {
        return Err(Error::config(format!("adversary scenarios apply to ahsecagg only, not {}", cfg.scheme)));
    }
    if cfg.aggregations != 1 && cfg.scheme != Scheme::SecAggTskg {
        return Err(Error::config("several aggregations per run need scheme secagg_tskg"));
    }
    let (rounds, preparation) = match cfg.scheme {
        Scheme::AhSecAgg => (vec![run_aggregation(&pc, &inputs, &dropout, cfg.adversary.as_ref(), &env)?], None),
        Scheme::SecAgg => (vec![secagg::run_secagg(&pc, &inputs, &dropout, &env)?], None),
        Scheme::EffiAgg => (vec![effiagg::run_effiagg(&pc, cfg.effiagg_bound, &inputs, &dropout, &env)?], None),
        Scheme::SecAggTskg => {
            if cfg.aggregations == 0 {
                return Err(Error::config("aggregations must be positive"));
            }
            let mut d = Deployment::new(&pc, &env)?;
            d.prepare()?;
            let mut out = Vec::with_capacity(cfg.aggregations);
            for k in 0..cfg.aggregations {
                let x = if k == 0 { inputs.clone() } else { RunConfig { seed: cfg.seed ^ k as u64, ..cfg.clone() }.inputs(&pc.field) };
                out.push(d.aggregate(&x, &dropout)?.result);
            }
            (out, d.preparation_metrics().cloned())
        }
    };
    let result = rounds.last().cloned().expect("at least one aggregation");
    Ok(Report { config: cfg.clone(), result, rounds, preparation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runfile_round_trip() {
        let text = "# demo\nscheme = secagg_tskg\nn=12\nt = 8\nm=5\nseed=3 # trailing\ndropout_rate=0.25\nnetwork=wan\naggregations=2\n";
        let c = RunConfig::from_kv(text).unwrap();
        assert_eq!(c.scheme, Scheme::SecAggTskg);
        assert_eq!((c.n, c.threshold(), c.m, c.seed, c.aggregations), (12, 8, 5, 3, 2));
        assert_eq!(c.network.latency(), WAN_LATENCY);
        assert_eq!(c.dropout().unwrap().len(), 3);
        assert!(RunConfig::from_kv("n 4").is_err());
        assert!(RunConfig::from_kv("colour = red").is_err());
        assert!(RunConfig::from_kv("n = many").is_err());
    }

    #[test]
    fn default_thresholds() {
        let mut c = RunConfig { n: 9, ..Default::default() };
        assert_eq!(c.threshold(), 6);
        c.mode = Mode::ActiveAdversary;
        assert_eq!(c.threshold(), 7);
    }

    #[test]
    fn every_scheme_matches_the_oracle() {
        for scheme in Scheme::ALL {
            let c = RunConfig { scheme, n: 6, m: 4, dropout_rate: 0.2, group: Some("desk".into()), seed: 5, ..Default::default() };
            let r = simulate(&c).unwrap();
            assert!(r.matches_oracle(), "{scheme}");
            assert_eq!(r.checksum().unwrap().len(), 16);
        }
    }

    #[test]
    fn scheme_mismatch_is_a_config_error() {
        let c = RunConfig { scheme: Scheme::SecAgg, mode: Mode::ActiveAdversary, n: 6, m: 2, group: Some("desk".into()), ..Default::default() };
        assert!(matches!(simulate(&c), Err(Error::Config(_))));
        let c = RunConfig { scheme: Scheme::EffiAgg, group: Some("modp2048".into()), n: 4, m: 2, ..Default::default() };
        assert!(matches!(simulate(&c), Err(Error::Config(_))));
    }
}
