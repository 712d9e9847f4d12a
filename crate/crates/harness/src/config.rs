//! Experiment configuration: a TOML document walked key by key so that every
//! problem is reported at once and unknown keys are rejected.

use std::fmt;
use std::path::PathBuf;

use fcqn_core::measure::{AttackSpec, Pol, DEFAULT_WINDOW_NS};
use fcqn_core::network::{build_fcqn, default_allocation, standard_channel_pairs, ChannelPair, ItuChannel, NetworkTopology};
use fcqn_core::reference::{LINK_FIDELITIES_AFTER_FIBER, LINK_MDI_VALUES, THETA_SCAN, USER_PAIR_ORDER};
use fcqn_core::source::SourceParams;
use fcqn_core::states::{NoiseKind, NoiseSpec, ThetaParam};
use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SourceSweep,
    Tomography,
    Witness,
    Attack,
    Mdi,
    ThetaScan,
    Allocate,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::SourceSweep,
        Scenario::Tomography,
        Scenario::Witness,
        Scenario::Attack,
        Scenario::Mdi,
        Scenario::ThetaScan,
        Scenario::Allocate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SourceSweep => "source_sweep",
            Scenario::Tomography => "tomography",
            Scenario::Witness => "witness",
            Scenario::Attack => "attack",
            Scenario::Mdi => "mdi",
            Scenario::ThetaScan => "theta_scan",
            Scenario::Allocate => "allocate",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Self::ALL.into_iter().find(|sc| sc.name() == s || sc.name().replace('_', "-") == s)
    }

    /// Default shot count, or `None` when the scenario draws no shots.
    pub fn default_shots(self) -> Option<u64> {
        match self {
            Scenario::Tomography | Scenario::Witness | Scenario::Attack => Some(10_000),
            Scenario::Mdi | Scenario::ThetaScan => Some(1_000_000),
            Scenario::SourceSweep | Scenario::Allocate => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Option<OutputFormat> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

/// Time-bin source state shared over every link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceState {
    PhiPlus,
    Basis(usize),
}

impl SourceState {
    const BASIS: [&'static str; 4] = ["ee", "el", "le", "ll"];

    pub fn name(self) -> &'static str {
        match self {
            SourceState::PhiPlus => "phi_plus",
            SourceState::Basis(k) => Self::BASIS[k],
        }
    }

    fn parse(s: &str) -> Option<SourceState> {
        if s == "phi_plus" {
            return Some(SourceState::PhiPlus);
        }
        Self::BASIS.iter().position(|b| *b == s).map(SourceState::Basis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Default,
    Custom { users: Vec<String>, channel_pairs: Vec<ChannelPair> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSweep {
    pub params: SourceParams,
    pub pump_powers_mw: Vec<f64>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub spec: AttackSpec,
    pub window_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaScanConfig {
    pub thetas: Vec<f64>,
    pub calibrate: bool,
    pub tomography_shots: u64,
}

/// Fully resolved configuration; every default is filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub shots: u64,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub state: SourceState,
    pub topology_spec: TopologySpec,
    pub topology: NetworkTopology,
    pub noise: Vec<NoiseSpec>,
    pub source: SourceSweep,
    pub attack: AttackConfig,
    pub theta_scan: ThetaScanConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub errors: Vec<FieldError>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.errors.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

const TOP_KEYS: [&str; 12] = [
    "scenario",
    "seed",
    "shots",
    "output_dir",
    "format",
    "state",
    "topology",
    "noise",
    "link_fidelities",
    "source",
    "attack",
    "theta_scan",
];
const SOURCE_KEYS: [&str; 8] = [
    "pump_powers_mw",
    "duration_s",
    "slopes_mhz_per_mw",
    "eta_signal",
    "eta_idler",
    "window_ns",
    "rep_period_ns",
    "side_periods",
];
const ATTACK_KEYS: [&str; 3] = ["delay_ns", "window_ns", "settings"];
const THETA_KEYS: [&str; 3] = ["thetas", "calibrate", "tomography_shots"];
const TOPOLOGY_KEYS: [&str; 2] = ["users", "channel_pairs"];
const NOISE_KEYS: [&str; 2] = ["kind", "strength"];

struct Walker {
    errors: Vec<FieldError>,
}

impl Walker {
    fn fail(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError { field: field.into(), message: message.into() });
    }

    fn unknown_keys(&mut self, table: &Table, prefix: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                self.fail(join(prefix, key), "unknown key");
            }
        }
    }

    fn float(&mut self, v: &Value, field: &str) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.fail(field, format!("expected a number, found {}", v.type_str()));
                None
            }
        }
    }

    fn nonneg_float(&mut self, v: &Value, field: &str) -> Option<f64> {
        let x = self.float(v, field)?;
        if x.is_finite() && x >= 0.0 {
            Some(x)
        } else {
            self.fail(field, format!("must be a finite nonnegative number, found {x}"));
            None
        }
    }

    fn uint(&mut self, v: &Value, field: &str) -> Option<u64> {
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                self.fail(field, format!("must be nonnegative, found {i}"));
                None
            }
            _ => {
                self.fail(field, format!("expected an integer, found {}", v.type_str()));
                None
            }
        }
    }

    fn string<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a str> {
        match v {
            Value::String(s) => Some(s),
            _ => {
                self.fail(field, format!("expected a string, found {}", v.type_str()));
                None
            }
        }
    }

    fn array<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a Vec<Value>> {
        match v {
            Value::Array(a) => Some(a),
            _ => {
                self.fail(field, format!("expected an array, found {}", v.type_str()));
                None
            }
        }
    }

    fn table<'a>(&mut self, v: &'a Value, field: &str) -> Option<&'a Table> {
        match v {
            Value::Table(t) => Some(t),
            _ => {
                self.fail(field, format!("expected a table, found {}", v.type_str()));
                None
            }
        }
    }

    fn floats(&mut self, v: &Value, field: &str) -> Option<Vec<f64>> {
        let arr = self.array(v, field)?;
        let out: Vec<Option<f64>> =
            arr.iter().enumerate().map(|(k, x)| self.nonneg_float(x, &format!("{field}[{k}]"))).collect();
        out.into_iter().collect()
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Parses and checks a configuration with no command-line overrides.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    validate_config_with(raw, &Overrides::default())
}

pub fn validate_config_with(raw: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let doc: Table = toml::from_str(raw).map_err(|e| ConfigError {
        errors: vec![FieldError { field: "<document>".into(), message: e.to_string().trim().to_string() }],
    })?;
    let mut w = Walker { errors: Vec::new() };
    w.unknown_keys(&doc, "", &TOP_KEYS);

    let file_scenario = doc.get("scenario").and_then(|v| {
        let s = w.string(v, "scenario")?;
        let sc = Scenario::parse(s);
        if sc.is_none() {
            w.fail("scenario", format!("unknown scenario {s:?}"));
        }
        sc
    });
    let scenario = match (overrides.scenario, file_scenario) {
        (Some(a), Some(b)) if a != b => {
            w.fail("scenario", format!("file names {b} but the command runs {a}"));
            None
        }
        (Some(a), _) => Some(a),
        (None, b) => {
            if b.is_none() && !doc.contains_key("scenario") {
                w.fail("scenario", "missing; give it in the file or as a subcommand");
            }
            b
        }
    };

    let file_seed = doc.get("seed").and_then(|v| w.uint(v, "seed"));
    let seed = overrides.seed.or(file_seed);
    if seed.is_none() && !doc.contains_key("seed") {
        w.fail("seed", "missing; a seed is mandatory");
    }

    let shots = doc.get("shots").and_then(|v| w.uint(v, "shots"));
    if let (Some(sc), Some(0)) = (scenario, shots) {
        if sc.default_shots().is_some() {
            w.fail("shots", format!("must be positive for scenario {sc}"));
        }
    }

    let output_dir = overrides.output_dir.clone().or_else(|| {
        doc.get("output_dir").and_then(|v| w.string(v, "output_dir")).map(PathBuf::from)
    });
    let format = overrides.format.or_else(|| {
        doc.get("format").and_then(|v| {
            let s = w.string(v, "format")?;
            let f = OutputFormat::parse(s);
            if f.is_none() {
                w.fail("format", format!("expected \"csv\" or \"json\", found {s:?}"));
            }
            f
        })
    });

    let state = match doc.get("state") {
        Some(v) => w.string(v, "state").and_then(|s| {
            let st = SourceState::parse(s);
            if st.is_none() {
                w.fail("state", format!("expected phi_plus, ee, el, le or ll, found {s:?}"));
            }
            st
        }),
        None => Some(if scenario == Some(Scenario::Attack) { SourceState::Basis(0) } else { SourceState::PhiPlus }),
    };

    let topology_spec = match doc.get("topology") {
        None => Some(TopologySpec::Default),
        Some(Value::String(s)) if s == "default" => Some(TopologySpec::Default),
        Some(Value::String(s)) => {
            w.fail("topology", format!("expected \"default\" or a table, found {s:?}"));
            None
        }
        Some(v) => parse_topology(&mut w, v),
    };
    let topology = topology_spec.as_ref().and_then(|spec| match spec {
        TopologySpec::Default => Some(default_allocation()),
        TopologySpec::Custom { users, channel_pairs } => match build_fcqn(users, channel_pairs) {
            Ok(t) => Some(t),
            Err(e) => {
                w.fail("topology", e.to_string());
                None
            }
        },
    });

    let noise = parse_noise(&mut w, &doc, scenario, topology.as_ref(), topology_spec.as_ref());
    let source = parse_source(&mut w, doc.get("source"));
    let attack = parse_attack(&mut w, doc.get("attack"));
    let theta_scan = parse_theta(&mut w, doc.get("theta_scan"));

    if !w.errors.is_empty() {
        return Err(ConfigError { errors: w.errors });
    }
    let scenario = scenario.expect("checked");
    Ok(ExperimentConfig {
        scenario,
        seed: seed.expect("checked"),
        shots: shots.or(scenario.default_shots()).unwrap_or(0),
        output_dir: output_dir.unwrap_or_else(|| PathBuf::from("fcqn-out")),
        format: format.unwrap_or(OutputFormat::Csv),
        state: state.expect("checked"),
        topology_spec: topology_spec.expect("checked"),
        topology: topology.expect("checked"),
        noise: noise.expect("checked"),
        source: source.expect("checked"),
        attack: attack.expect("checked"),
        theta_scan: theta_scan.expect("checked"),
    })
}

fn parse_topology(w: &mut Walker, v: &Value) -> Option<TopologySpec> {
    let t = w.table(v, "topology")?;
    w.unknown_keys(t, "topology", &TOPOLOGY_KEYS);
    let users: Option<Vec<String>> = match t.get("users") {
        Some(v) => w.array(v, "topology.users").and_then(|arr| {
            arr.iter()
                .enumerate()
                .map(|(k, u)| w.string(u, &format!("topology.users[{k}]")).map(String::from))
                .collect::<Vec<_>>()
                .into_iter()
                .collect()
        }),
        None => {
            w.fail("topology.users", "missing");
            None
        }
    };
    let users = users?;
    let channel_pairs = match t.get("channel_pairs") {
        None => Some(standard_channel_pairs(users.len() * users.len().saturating_sub(1) / 2)),
        Some(v) => w.array(v, "topology.channel_pairs").and_then(|arr| {
            let pairs: Vec<Option<ChannelPair>> = arr
                .iter()
                .enumerate()
                .map(|(k, p)| {
                    let field = format!("topology.channel_pairs[{k}]");
                    let items = w.array(p, &field)?;
                    if items.len() != 2 {
                        w.fail(&field, "expected [signal, idler]");
                        return None;
                    }
                    let s = w.string(&items[0], &field)?;
                    let i = w.string(&items[1], &field)?;
                    Some(ChannelPair { signal: ItuChannel::parse(s), idler: ItuChannel::parse(i) })
                })
                .collect();
            pairs.into_iter().collect()
        }),
    }?;
    Some(TopologySpec::Custom { users, channel_pairs })
}

/// Reference fidelities for the default allocation, in link order.
fn reference_fidelities(topology: &NetworkTopology, scenario: Scenario) -> Vec<f64> {
    topology
        .link_map
        .iter()
        .map(|(a, b)| {
            let k = USER_PAIR_ORDER
                .iter()
                .position(|(x, y)| (x == a && y == b) || (x == b && y == a))
                .expect("default users");
            match scenario {
                Scenario::Mdi => 0.5 - 4.0 * LINK_MDI_VALUES[k],
                _ => LINK_FIDELITIES_AFTER_FIBER[k],
            }
        })
        .collect()
}

fn parse_noise(
    w: &mut Walker,
    doc: &Table,
    scenario: Option<Scenario>,
    topology: Option<&NetworkTopology>,
    spec: Option<&TopologySpec>,
) -> Option<Vec<NoiseSpec>> {
    let links = topology.map(NetworkTopology::link_count);
    let check_len = |w: &mut Walker, field: &str, n: usize| {
        if let Some(l) = links {
            if n != l {
                w.fail(field, format!("has {n} entries but the topology has {l} links"));
                return false;
            }
        }
        true
    };
    match (doc.get("noise"), doc.get("link_fidelities")) {
        (Some(_), Some(_)) => {
            w.fail("noise", "give either noise or link_fidelities, not both");
            None
        }
        (Some(v), None) => {
            let arr = w.array(v, "noise")?;
            let specs: Vec<Option<NoiseSpec>> = arr
                .iter()
                .enumerate()
                .map(|(k, item)| {
                    let field = format!("noise[{k}]");
                    let t = w.table(item, &field)?;
                    w.unknown_keys(t, &field, &NOISE_KEYS);
                    let kind = match t.get("kind").map(|v| w.string(v, &format!("{field}.kind"))) {
                        Some(Some("werner")) => Some(NoiseKind::Werner),
                        Some(Some("dephasing")) => Some(NoiseKind::Dephasing),
                        Some(Some("depolarizing")) => Some(NoiseKind::Depolarizing),
                        Some(Some(other)) => {
                            w.fail(format!("{field}.kind"), format!("unknown noise kind {other:?}"));
                            None
                        }
                        Some(None) => None,
                        None => {
                            w.fail(format!("{field}.kind"), "missing");
                            None
                        }
                    };
                    let strength = match t.get("strength") {
                        Some(v) => w.float(v, &format!("{field}.strength")),
                        None => {
                            w.fail(format!("{field}.strength"), "missing");
                            None
                        }
                    };
                    let spec = NoiseSpec::new(kind?, strength?);
                    match spec {
                        Ok(s) => Some(s),
                        Err(e) => {
                            w.fail(format!("{field}.strength"), e.to_string());
                            None
                        }
                    }
                })
                .collect();
            let specs: Option<Vec<NoiseSpec>> = specs.into_iter().collect();
            let specs = specs?;
            check_len(w, "noise", specs.len()).then_some(specs)
        }
        (None, Some(v)) => {
            let fids = w.floats(v, "link_fidelities")?;
            if !check_len(w, "link_fidelities", fids.len()) {
                return None;
            }
            let mut out = Vec::with_capacity(fids.len());
            for (k, f) in fids.into_iter().enumerate() {
                match NoiseSpec::werner(f) {
                    Ok(s) => out.push(s),
                    Err(e) => w.fail(format!("link_fidelities[{k}]"), e.to_string()),
                }
            }
            Some(out)
        }
        (None, None) => {
            let (topology, scenario) = (topology?, scenario?);
            Some(match spec? {
                TopologySpec::Default if scenario == Scenario::Attack => vec![NoiseSpec::identity(); topology.link_count()],
                TopologySpec::Default => reference_fidelities(topology, scenario)
                    .into_iter()
                    .map(|f| NoiseSpec::werner(f).expect("reference fidelities are valid"))
                    .collect(),
                TopologySpec::Custom { .. } => vec![NoiseSpec::identity(); topology.link_count()],
            })
        }
    }
}

fn parse_source(w: &mut Walker, v: Option<&Value>) -> Option<SourceSweep> {
    let mut sweep = SourceSweep {
        params: SourceParams::default(),
        pump_powers_mw: (1..=10).map(|k| k as f64 / 10.0).collect(),
        duration_s: 1.0,
    };
    let Some(v) = v else { return Some(sweep) };
    let t = w.table(v, "source")?;
    w.unknown_keys(t, "source", &SOURCE_KEYS);
    let before = w.errors.len();
    if let Some(v) = t.get("pump_powers_mw") {
        if let Some(p) = w.floats(v, "source.pump_powers_mw") {
            if p.is_empty() {
                w.fail("source.pump_powers_mw", "must list at least one power");
            }
            sweep.pump_powers_mw = p;
        }
    }
    if let Some(v) = t.get("duration_s") {
        match w.nonneg_float(v, "source.duration_s") {
            Some(d) if d > 0.0 => sweep.duration_s = d,
            Some(_) => w.fail("source.duration_s", "must be positive"),
            None => {}
        }
    }
    if let Some(v) = t.get("slopes_mhz_per_mw") {
        if let Some(s) = w.floats(v, "source.slopes_mhz_per_mw") {
            sweep.params.slopes_mhz_per_mw = s;
        }
    }
    let p = &mut sweep.params;
    for (key, slot) in [
        ("eta_signal", &mut p.eta_signal),
        ("eta_idler", &mut p.eta_idler),
        ("window_ns", &mut p.window_ns),
        ("rep_period_ns", &mut p.rep_period_ns),
    ] {
        if let Some(v) = t.get(key) {
            if let Some(x) = w.nonneg_float(v, &format!("source.{key}")) {
                *slot = x;
            }
        }
    }
    if let Some(v) = t.get("side_periods") {
        if let Some(n) = w.uint(v, "source.side_periods") {
            p.side_periods = n as usize;
        }
    }
    if w.errors.len() == before {
        if let Err(e) = sweep.params.validate() {
            w.fail("source", e.to_string());
        }
    }
    Some(sweep)
}

fn parse_attack(w: &mut Walker, v: Option<&Value>) -> Option<AttackConfig> {
    let mut cfg = AttackConfig { spec: AttackSpec::default(), window_ns: DEFAULT_WINDOW_NS };
    let Some(v) = v else { return Some(cfg) };
    let t = w.table(v, "attack")?;
    w.unknown_keys(t, "attack", &ATTACK_KEYS);
    if let Some(v) = t.get("delay_ns") {
        if let Some(d) = w.nonneg_float(v, "attack.delay_ns") {
            cfg.spec.delay_ns = d;
        }
    }
    if let Some(v) = t.get("window_ns") {
        match w.nonneg_float(v, "attack.window_ns") {
            Some(x) if x > 0.0 => cfg.window_ns = x,
            Some(_) => w.fail("attack.window_ns", "must be positive"),
            None => {}
        }
    }
    if let Some(v) = t.get("settings") {
        if let Some(arr) = w.array(v, "attack.settings") {
            let mut set = std::collections::BTreeSet::new();
            for (k, item) in arr.iter().enumerate() {
                let field = format!("attack.settings[{k}]");
                let Some(s) = w.string(item, &field) else { continue };
                match parse_outcome(s) {
                    Some(o) => {
                        set.insert(o);
                    }
                    None => w.fail(field, format!("expected two of H V + - L R, found {s:?}")),
                }
            }
            cfg.spec.attacked_settings = set;
        }
    }
    Some(cfg)
}

fn parse_outcome(s: &str) -> Option<(Pol, Pol)> {
    let mut chars = s.chars();
    let a = Pol::parse(&chars.next()?.to_string())?;
    let b = Pol::parse(&chars.next()?.to_string())?;
    chars.next().is_none().then_some((a, b))
}

fn parse_theta(w: &mut Walker, v: Option<&Value>) -> Option<ThetaScanConfig> {
    let mut cfg = ThetaScanConfig {
        thetas: THETA_SCAN.iter().map(|r| r.theta).collect(),
        calibrate: true,
        tomography_shots: 10_000,
    };
    let Some(v) = v else { return Some(cfg) };
    let t = w.table(v, "theta_scan")?;
    w.unknown_keys(t, "theta_scan", &THETA_KEYS);
    if let Some(v) = t.get("thetas") {
        if let Some(th) = w.floats(v, "theta_scan.thetas") {
            for (k, &x) in th.iter().enumerate() {
                if let Err(e) = ThetaParam::new(x) {
                    w.fail(format!("theta_scan.thetas[{k}]"), e.to_string());
                }
            }
            if th.is_empty() {
                w.fail("theta_scan.thetas", "must list at least one angle");
            }
            cfg.thetas = th;
        }
    }
    if let Some(v) = t.get("calibrate") {
        match v {
            Value::Boolean(b) => cfg.calibrate = *b,
            _ => w.fail("theta_scan.calibrate", format!("expected a boolean, found {}", v.type_str())),
        }
    }
    if let Some(v) = t.get("tomography_shots") {
        match w.uint(v, "theta_scan.tomography_shots") {
            Some(0) => w.fail("theta_scan.tomography_shots", "must be positive"),
            Some(n) => cfg.tomography_shots = n,
            None => {}
        }
    }
    Some(cfg)
}

fn float_array(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| Value::Float(x)).collect())
}

impl ExperimentConfig {
    /// Canonical TOML for the resolved configuration. The output directory is
    /// left out so identical experiments hash identically wherever they are
    /// written; parsing the text back yields an equal configuration apart
    /// from that field.
    pub fn to_toml(&self) -> String {
        let mut doc = Table::new();
        doc.insert("scenario".into(), Value::String(self.scenario.name().into()));
        doc.insert("seed".into(), Value::Integer(self.seed as i64));
        doc.insert("shots".into(), Value::Integer(self.shots as i64));
        doc.insert("format".into(), Value::String(self.format.name().into()));
        doc.insert("state".into(), Value::String(self.state.name().into()));
        match &self.topology_spec {
            TopologySpec::Default => {
                doc.insert("topology".into(), Value::String("default".into()));
            }
            TopologySpec::Custom { users, channel_pairs } => {
                let mut t = Table::new();
                t.insert("users".into(), Value::Array(users.iter().map(|u| Value::String(u.clone())).collect()));
                t.insert(
                    "channel_pairs".into(),
                    Value::Array(
                        channel_pairs
                            .iter()
                            .map(|p| {
                                Value::Array(vec![
                                    Value::String(p.signal.label.clone()),
                                    Value::String(p.idler.label.clone()),
                                ])
                            })
                            .collect(),
                    ),
                );
                doc.insert("topology".into(), Value::Table(t));
            }
        }
        let noise = self
            .noise
            .iter()
            .map(|n| {
                let mut t = Table::new();
                let kind = match n.kind {
                    NoiseKind::Werner => "werner",
                    NoiseKind::Dephasing => "dephasing",
                    NoiseKind::Depolarizing => "depolarizing",
                };
                t.insert("kind".into(), Value::String(kind.into()));
                t.insert("strength".into(), Value::Float(n.strength));
                Value::Table(t)
            })
            .collect();
        doc.insert("noise".into(), Value::Array(noise));

        let p = &self.source.params;
        let mut src = Table::new();
        src.insert("pump_powers_mw".into(), float_array(&self.source.pump_powers_mw));
        src.insert("duration_s".into(), Value::Float(self.source.duration_s));
        src.insert("slopes_mhz_per_mw".into(), float_array(&p.slopes_mhz_per_mw));
        src.insert("eta_signal".into(), Value::Float(p.eta_signal));
        src.insert("eta_idler".into(), Value::Float(p.eta_idler));
        src.insert("window_ns".into(), Value::Float(p.window_ns));
        src.insert("rep_period_ns".into(), Value::Float(p.rep_period_ns));
        src.insert("side_periods".into(), Value::Integer(p.side_periods as i64));
        doc.insert("source".into(), Value::Table(src));

        let mut atk = Table::new();
        atk.insert("delay_ns".into(), Value::Float(self.attack.spec.delay_ns));
        atk.insert("window_ns".into(), Value::Float(self.attack.window_ns));
        atk.insert(
            "settings".into(),
            Value::Array(
                self.attack
                    .spec
                    .attacked_settings
                    .iter()
                    .map(|(a, b)| Value::String(format!("{a}{b}")))
                    .collect(),
            ),
        );
        doc.insert("attack".into(), Value::Table(atk));

        let mut th = Table::new();
        th.insert("thetas".into(), float_array(&self.theta_scan.thetas));
        th.insert("calibrate".into(), Value::Boolean(self.theta_scan.calibrate));
        th.insert("tomography_shots".into(), Value::Integer(self.theta_scan.tomography_shots as i64));
        doc.insert("theta_scan".into(), Value::Table(th));

        toml::to_string(&doc).expect("plain values serialize")
    }

    /// SHA-256 of [`Self::to_toml`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fields(err: ConfigError) -> Vec<String> {
        err.errors.into_iter().map(|e| e.field).collect()
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = validate_config("scenario = \"mdi\"\nseed = 7\n").unwrap();
        assert_eq!(cfg.shots, 1_000_000);
        assert_eq!(cfg.format, OutputFormat::Csv);
        assert_eq!(cfg.topology, default_allocation());
        assert_eq!(cfg.noise.len(), 6);
        assert_eq!(cfg.state, SourceState::PhiPlus);
        // link j=1 joins David and Alice, listed fourth among user pairs
        assert!((cfg.noise[0].strength - (0.5 - 4.0 * LINK_MDI_VALUES[2])).abs() < 1e-15);
    }

    #[test]
    fn zero_shots_rejected_for_sampled_scenarios() {
        let err = validate_config("scenario = \"mdi\"\nseed = 1\nshots = 0\n").unwrap_err();
        assert_eq!(fields(err), vec!["shots"]);
        assert!(validate_config("scenario = \"allocate\"\nseed = 1\nshots = 0\n").is_ok());
    }

    #[test]
    fn topology_shortfall_surfaces() {
        let raw = "scenario = \"allocate\"\nseed = 1\n[topology]\nusers = [\"a\",\"b\",\"c\",\"d\",\"e\"]\n\
                   channel_pairs = [[\"C35\",\"C33\"],[\"C36\",\"C32\"],[\"C37\",\"C31\"],[\"C38\",\"C30\"],[\"C39\",\"C29\"],[\"C40\",\"C28\"]]\n";
        let err = validate_config(raw).unwrap_err();
        assert_eq!(err.errors[0].field, "topology");
        assert!(err.errors[0].message.contains("short by 4"));
    }

    #[test]
    fn all_errors_reported() {
        let raw = "seed = -1\nshots = \"many\"\nbogus = 1\n[source]\neta_signal = 2.0\nextra = 1\n";
        let f = fields(validate_config(raw).unwrap_err());
        for expected in ["bogus", "scenario", "seed", "shots", "source.extra", "source"] {
            assert!(f.iter().any(|x| x == expected), "{expected} missing from {f:?}");
        }
    }

    #[test]
    fn seed_is_mandatory_unless_overridden() {
        assert!(validate_config("scenario = \"witness\"\n").is_err());
        let ov = Overrides { seed: Some(3), ..Overrides::default() };
        assert_eq!(validate_config_with("scenario = \"witness\"\n", &ov).unwrap().seed, 3);
    }

    #[test]
    fn subcommand_must_agree_with_file() {
        let ov = Overrides { scenario: Some(Scenario::Mdi), ..Overrides::default() };
        assert!(validate_config_with("scenario = \"witness\"\nseed = 1\n", &ov).is_err());
        assert!(validate_config_with("seed = 1\n", &ov).is_ok());
    }

    #[test]
    fn noise_length_checked() {
        let raw = "scenario = \"mdi\"\nseed = 1\nlink_fidelities = [0.9, 0.9]\n";
        assert_eq!(fields(validate_config(raw).unwrap_err()), vec!["link_fidelities"]);
        let raw = "scenario = \"mdi\"\nseed = 1\n[[noise]]\nkind = \"magic\"\nstrength = 0.1\n";
        assert!(validate_config(raw).is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let raw = "scenario = \"attack\"\nseed = 9\n[attack]\nsettings = [\"HV\", \"+-\"]\ndelay_ns = 0.5\n\
                   [topology]\nusers = [\"x\", \"y\", \"z\"]\n[theta_scan]\nthetas = [0.1, 0.2]\ncalibrate = false\n";
        let cfg = validate_config(raw).unwrap();
        assert_eq!(cfg.state, SourceState::Basis(0));
        let again = validate_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn bad_document_reported() {
        let err = validate_config("scenario = ").unwrap_err();
        assert_eq!(err.errors[0].field, "<document>");
    }
}
