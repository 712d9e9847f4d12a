//! Fully connected network topology: users, DWDM channel pairs and the
//! assignment of each pair to one user pair.
//!
//! Channel pair `j` (1-based in labels) has signal `s_j` and idler `i_j`.
//! The signal photon goes to the first user of the linked pair.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{fidelity_pure, DensityMatrix, PureState};
use crate::states::{apply_noise, calibrate_noise, NoiseKind, NoiseSpec};

/// ITU channel number of the degenerate wavelength.
pub const DEGENERATE_CHANNEL: u32 = 34;
pub const DEFAULT_FIBER_KM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItuChannel {
    pub label: String,
    pub number: Option<u32>,
}

impl ItuChannel {
    /// `C<number>`.
    pub fn c_band(number: u32) -> Self {
        Self { label: format!("C{number}"), number: Some(number) }
    }

    /// Parses `C<number>` into a numbered channel; other labels stay opaque.
    pub fn parse(label: &str) -> Self {
        let number = label.strip_prefix('C').and_then(|n| n.parse().ok());
        Self { label: label.to_string(), number }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub signal: ItuChannel,
    pub idler: ItuChannel,
}

impl ChannelPair {
    /// Checks symmetry about the degenerate channel when both are numbered.
    pub fn validate(&self) -> Result<()> {
        if let (Some(s), Some(i)) = (self.signal.number, self.idler.number) {
            if s + i != 2 * DEGENERATE_CHANNEL || s == i {
                return Err(Error::InvalidTopology(format!(
                    "channels {} and {} are not energy-conserving partners about C{}",
                    self.signal.label, self.idler.label, DEGENERATE_CHANNEL
                )));
            }
        }
        Ok(())
    }
}

/// `s_j = C(34+j)`, `i_j = C(34-j)` for `j = 1..=n`.
pub fn standard_channel_pairs(n: usize) -> Vec<ChannelPair> {
    (1..=n as u32)
        .map(|j| ChannelPair {
            signal: ItuChannel::c_band(DEGENERATE_CHANNEL + j),
            idler: ItuChannel::c_band(DEGENERATE_CHANNEL.saturating_sub(j)),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    Signal,
    Idler,
}

/// One photon of a channel pair, identified by 0-based pair index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelRef {
    pub pair: usize,
    pub arm: Arm,
}

impl fmt::Display for ChannelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.arm {
            Arm::Signal => 's',
            Arm::Idler => 'i',
        };
        write!(f, "{prefix}{}", self.pair + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub users: Vec<String>,
    pub channel_pairs: Vec<ChannelPair>,
    /// `link_map[j] = (signal user, idler user)` for pair `j`.
    pub link_map: Vec<(String, String)>,
    pub user_channels: BTreeMap<String, Vec<ChannelRef>>,
}

fn binomial2(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl NetworkTopology {
    fn from_links(users: Vec<String>, channel_pairs: Vec<ChannelPair>, link_map: Vec<(String, String)>) -> Result<Self> {
        let mut user_channels: BTreeMap<String, Vec<ChannelRef>> =
            users.iter().map(|u| (u.clone(), Vec::new())).collect();
        for (j, (a, b)) in link_map.iter().enumerate() {
            for (user, arm) in [(a, Arm::Signal), (b, Arm::Idler)] {
                user_channels
                    .get_mut(user)
                    .ok_or_else(|| Error::InvalidTopology(format!("link {} names unknown user {user}", j + 1)))?
                    .push(ChannelRef { pair: j, arm });
            }
        }
        let topo = Self { users, channel_pairs, link_map, user_channels };
        topo.validate()?;
        Ok(topo)
    }

    pub fn link_count(&self) -> usize {
        self.link_map.len()
    }

    /// Users joined by pair `j` (0-based).
    pub fn link(&self, j: usize) -> Option<(&str, &str)> {
        self.link_map.get(j).map(|(a, b)| (a.as_str(), b.as_str()))
    }

    /// Pair index joining two users, in either order.
    pub fn pair_for(&self, a: &str, b: &str) -> Option<usize> {
        self.link_map.iter().position(|(x, y)| (x == a && y == b) || (x == b && y == a))
    }

    /// Channel labels such as `i1`, `s6`, sorted by pair.
    pub fn channels_of(&self, user: &str) -> Option<Vec<String>> {
        self.user_channels.get(user).map(|v| {
            let mut v = v.clone();
            v.sort();
            v.iter().map(ToString::to_string).collect()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.users.len();
        if n < 2 {
            return Err(Error::InvalidTopology("at least two users are required".into()));
        }
        let mut seen_users = std::collections::BTreeSet::new();
        for u in &self.users {
            if !seen_users.insert(u) {
                return Err(Error::InvalidTopology(format!("duplicate user {u}")));
            }
        }
        let needed = binomial2(n);
        if self.link_map.len() != needed {
            return Err(Error::InvalidTopology(format!("{} links for {n} users, expected {needed}", self.link_map.len())));
        }
        if self.channel_pairs.len() != needed {
            return Err(Error::InvalidTopology(format!(
                "{} channel pairs for {needed} links",
                self.channel_pairs.len()
            )));
        }
        for p in &self.channel_pairs {
            p.validate()?;
        }
        let mut pairs = std::collections::BTreeSet::new();
        for (a, b) in &self.link_map {
            if a == b {
                return Err(Error::InvalidTopology(format!("link joins {a} to itself")));
            }
            let key = if a < b { (a, b) } else { (b, a) };
            if !pairs.insert(key) {
                return Err(Error::InvalidTopology(format!("user pair ({a}, {b}) linked twice")));
            }
        }
        for u in &self.users {
            let degree = self.link_map.iter().filter(|(a, b)| a == u || b == u).count();
            let held = self.user_channels.get(u).map_or(0, Vec::len);
            if degree != n - 1 || held != n - 1 {
                return Err(Error::InvalidTopology(format!("user {u} holds {held} channels, expected {}", n - 1)));
            }
        }
        if self.user_channels.len() != n {
            return Err(Error::InvalidTopology("channel table lists unknown users".into()));
        }
        Ok(())
    }
}

/// The four-user allocation with the per-user channel sets
/// Alice {i1, i4, s6}, Bob {i2, s4, s5}, Chloe {s2, i3, i6}, David {s1, s3, i5}.
pub fn default_allocation() -> NetworkTopology {
    let users: Vec<String> = ["Alice", "Bob", "Chloe", "David"].map(String::from).to_vec();
    let link = |a: &str, b: &str| (a.to_string(), b.to_string());
    let link_map = vec![
        link("David", "Alice"),
        link("Chloe", "Bob"),
        link("David", "Chloe"),
        link("Bob", "Alice"),
        link("Bob", "David"),
        link("Alice", "Chloe"),
    ];
    NetworkTopology::from_links(users, standard_channel_pairs(6), link_map).expect("default allocation is valid")
}

/// Assigns pair `j` to the `j`-th user pair in lexicographic order of user
/// positions. Extra channel pairs beyond `C(n,2)` are left unused.
pub fn build_fcqn(users: &[String], channel_pairs: &[ChannelPair]) -> Result<NetworkTopology> {
    let n = users.len();
    let needed = binomial2(n);
    if channel_pairs.len() < needed {
        return Err(Error::InsufficientChannelPairs { users: n, needed, available: channel_pairs.len() });
    }
    let mut link_map = Vec::with_capacity(needed);
    for a in 0..n {
        for b in a + 1..n {
            link_map.push((users[a].clone(), users[b].clone()));
        }
    }
    NetworkTopology::from_links(users.to_vec(), channel_pairs[..needed].to_vec(), link_map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub link: (String, String),
    pub pair: usize,
    pub rho: DensityMatrix,
    pub fiber_km: f64,
    pub noise: NoiseSpec,
}

/// Shares `source_state` over every link, then applies that link's noise.
pub fn distribute(topology: &NetworkTopology, source_state: &PureState, per_link_noise: &[NoiseSpec]) -> Result<Vec<LinkState>> {
    if per_link_noise.len() != topology.link_count() {
        return Err(Error::LengthMismatch {
            what: "per-link noise list",
            expected: topology.link_count(),
            found: per_link_noise.len(),
        });
    }
    let ideal = source_state.projector();
    topology
        .link_map
        .iter()
        .zip(per_link_noise)
        .enumerate()
        .map(|(j, (link, noise))| {
            Ok(LinkState {
                link: link.clone(),
                pair: j,
                rho: apply_noise(&ideal, noise)?,
                fiber_km: DEFAULT_FIBER_KM,
                noise: *noise,
            })
        })
        .collect()
}

/// Per-link noise of `kind` reaching each target fidelity with the source state.
pub fn calibrate_links(source_state: &PureState, kind: NoiseKind, target_fidelities: &[f64]) -> Result<Vec<NoiseSpec>> {
    let ideal = source_state.projector();
    target_fidelities.iter().map(|&f| calibrate_noise(&ideal, source_state, kind, f)).collect()
}

/// Fidelity of each link's state with the source state.
pub fn link_fidelities(links: &[LinkState], source_state: &PureState) -> Result<Vec<f64>> {
    links.iter().map(|l| fidelity_pure(&l.rho, source_state)).collect()
}
