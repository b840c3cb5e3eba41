//! ASEP on a finite window of the integer lattice.
//!
//! Sites outside the window do not exist: there are no bonds across the
//! window boundary. Both engines report whether any jump touched a boundary
//! site, and the experiments refuse to use runs where that happened.

mod harris;
mod particle_clock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mallows::sample_infinite_prefix;
use crate::qcomb::QParam;

pub use harris::{apply_multi, apply_single_bonds, simulate_multi, BondClockStream, BondEvent, ClockSchedule};
pub use particle_clock::simulate_single;

/// Inclusive integer interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::domain(format!("empty window [{lo}, {hi}]")));
        }
        Ok(Window { lo, hi })
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, site: i64) -> bool {
        (self.lo..=self.hi).contains(&site)
    }

    #[inline]
    pub(crate) fn index(&self, site: i64) -> usize {
        debug_assert!(self.contains(site));
        (site - self.lo) as usize
    }

    #[inline]
    pub(crate) fn site(&self, index: usize) -> i64 {
        self.lo + index as i64
    }

    /// Number of bonds `(z, z+1)` inside the window.
    pub fn bonds(&self) -> usize {
        self.len() - 1
    }
}

/// Occupied sites of a single-species configuration, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Snapshot", into = "Snapshot")]
pub struct ParticleConfig {
    window: Window,
    sites: Vec<i64>,
}

impl ParticleConfig {
    pub fn new(window: Window, mut sites: Vec<i64>) -> Result<Self> {
        sites.sort_unstable();
        if sites.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("two particles on one site"));
        }
        if let Some(&s) = sites.iter().find(|&&s| !window.contains(s)) {
            return Err(Error::domain(format!("site {s} outside window [{}, {}]", window.lo, window.hi)));
        }
        Ok(ParticleConfig { window, sites })
    }

    pub(crate) fn from_occupancy(window: Window, occupied: &[bool]) -> Self {
        let sites = occupied.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| window.site(i)).collect();
        ParticleConfig { window, sites }
    }

    pub(crate) fn occupancy(&self) -> Vec<bool> {
        let mut occ = vec![false; self.window.len()];
        for &s in &self.sites {
            occ[self.window.index(s)] = true;
        }
        occ
    }

    pub fn empty(window: Window) -> Self {
        ParticleConfig { window, sites: Vec::new() }
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Number of particles at sites `y >= x`.
    pub fn height(&self, x: f64) -> usize {
        let below = self.sites.partition_point(|&s| (s as f64) < x);
        self.sites.len() - below
    }

    pub fn rightmost(&self) -> Option<i64> {
        self.sites.last().copied()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::domain(format!("bad snapshot: {e}")))
    }
}

/// Particles at every window site `<= 0`.
pub fn step_init(window: Window) -> Result<ParticleConfig> {
    if !window.contains(0) {
        return Err(Error::domain("step initial data needs a window containing 0"));
    }
    Ok(ParticleConfig { window, sites: (window.lo..=0).collect() })
}

/// `height` as a free function.
pub fn height(cfg: &ParticleConfig, x: f64) -> usize {
    cfg.height(x)
}

pub fn rightmost(cfg: &ParticleConfig) -> Option<i64> {
    cfg.rightmost()
}

/// Particle color; lower colors have priority. [`Color::HOLE`] plays `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Color(pub u64);

impl Color {
    pub const HOLE: Color = Color(u64::MAX);

    pub fn is_hole(self) -> bool {
        self == Color::HOLE
    }
}

/// Multi-species configuration: one color per window site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Snapshot", into = "Snapshot")]
pub struct ColoredConfig {
    window: Window,
    colors: Vec<Color>,
}

impl ColoredConfig {
    pub fn new(window: Window, colors: Vec<Color>) -> Result<Self> {
        if colors.len() != window.len() {
            return Err(Error::domain(format!("{} colors for a window of {} sites", colors.len(), window.len())));
        }
        if colors.iter().any(|c| c.0 == 0) {
            return Err(Error::domain("colors start at 1"));
        }
        Ok(ColoredConfig { window, colors })
    }

    /// Places color `colors[j]` at `sites[j]`; every other site is a hole.
    pub fn from_particles(window: Window, sites: &[i64], colors: &[Color]) -> Result<Self> {
        if sites.len() != colors.len() {
            return Err(Error::domain("sites and colors differ in length"));
        }
        let mut all = vec![Color::HOLE; window.len()];
        for (&s, &c) in sites.iter().zip(colors) {
            if !window.contains(s) {
                return Err(Error::domain(format!("site {s} outside window")));
            }
            if !all[window.index(s)].is_hole() {
                return Err(Error::domain(format!("site {s} listed twice")));
            }
            all[window.index(s)] = c;
        }
        ColoredConfig::new(window, all)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn colors(&self) -> &[Color] {
        &self.colors
    }

    pub(crate) fn colors_mut(&mut self) -> &mut [Color] {
        &mut self.colors
    }

    pub fn color_at(&self, site: i64) -> Option<Color> {
        self.window.contains(site).then(|| self.colors[self.window.index(site)])
    }

    /// Sites holding a particle of color `<= k`; `project(u64::MAX)` keeps
    /// every particle.
    pub fn project(&self, k: u64) -> ParticleConfig {
        let sites = self
            .colors
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_hole() && c.0 <= k)
            .map(|(i, _)| self.window.site(i))
            .collect();
        ParticleConfig { window: self.window, sites }
    }

    /// Non-hole `(site, color)` pairs from right to left.
    pub fn particles_right_to_left(&self) -> impl Iterator<Item = (i64, Color)> + '_ {
        self.colors.iter().enumerate().rev().filter(|(_, c)| !c.is_hole()).map(|(i, &c)| (self.window.site(i), c))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::domain(format!("bad snapshot: {e}")))
    }
}

pub fn project(cfg: &ColoredConfig, k: u64) -> ParticleConfig {
    cfg.project(k)
}

/// Mallows-colored step data: site `-j` carries `w(j + 1)` for a Mallows
/// permutation `w`; sites `> 0` are holes.
pub fn mallows_colored_step_init<R: Rng + ?Sized>(window: Window, q: QParam, rng: &mut R) -> Result<ColoredConfig> {
    if !window.contains(0) {
        return Err(Error::domain("step initial data needs a window containing 0"));
    }
    let m = (-window.lo + 1) as usize;
    let prefix = sample_infinite_prefix(m, q, rng);
    let mut colors = vec![Color::HOLE; window.len()];
    for (j, &v) in prefix.values().iter().enumerate() {
        colors[window.index(-(j as i64))] = Color(v as u64);
    }
    Ok(ColoredConfig { window, colors })
}

/// JSON record `{window, sites, colors}` shared by both configuration types.
/// Single-species snapshots carry an empty `colors` array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub window: [i64; 2],
    pub sites: Vec<i64>,
    pub colors: Vec<u64>,
}

impl From<ParticleConfig> for Snapshot {
    fn from(cfg: ParticleConfig) -> Self {
        Snapshot { window: [cfg.window.lo, cfg.window.hi], sites: cfg.sites, colors: Vec::new() }
    }
}

impl TryFrom<Snapshot> for ParticleConfig {
    type Error = Error;
    fn try_from(s: Snapshot) -> Result<Self> {
        if !s.colors.is_empty() {
            return Err(Error::domain("single-species snapshot must not carry colors"));
        }
        ParticleConfig::new(Window::new(s.window[0], s.window[1])?, s.sites)
    }
}

impl From<ColoredConfig> for Snapshot {
    fn from(cfg: ColoredConfig) -> Self {
        let (sites, colors) =
            cfg.colors.iter().enumerate().filter(|(_, c)| !c.is_hole()).map(|(i, c)| (cfg.window.site(i), c.0)).unzip();
        Snapshot { window: [cfg.window.lo, cfg.window.hi], sites, colors }
    }
}

impl TryFrom<Snapshot> for ColoredConfig {
    type Error = Error;
    fn try_from(s: Snapshot) -> Result<Self> {
        let window = Window::new(s.window[0], s.window[1])?;
        let colors: Vec<Color> = s.colors.into_iter().map(Color).collect();
        ColoredConfig::from_particles(window, &s.sites, &colors)
    }
}

/// Light-cone truncation `l = floor(x) - ceil((1+q)t + a*sqrt(t+1) + b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationBound {
    pub a: f64,
    pub b: f64,
    /// `ceil((1+q)t + a*sqrt(t+1) + b)`.
    pub reach: i64,
}

impl TruncationBound {
    /// With `lambda = ln(1/tol)`: `a = sqrt(2 lambda (1+q))`, `b = ceil(2 lambda / 3) + 1`.
    /// Then `s = a sqrt(t+1) + b` satisfies `s^2 >= 2 lambda (mu + s/3)` for
    /// `mu = (1+q)t`, and Bernstein's inequality bounds the Poisson tail
    /// `P(Poisson(mu) >= mu + s)` by `tol`.
    pub fn new(t: f64, q: QParam, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::domain(format!("tolerance must lie in (0,1), got {tol}")));
        }
        if !(t >= 0.0) {
            return Err(Error::domain(format!("time must be nonnegative, got {t}")));
        }
        let lambda = (1.0 / tol).ln();
        let a = (2.0 * lambda * (1.0 + q.value())).sqrt();
        let b = (2.0 * lambda / 3.0).ceil() + 1.0;
        let reach = if t == 0.0 { b as i64 } else { ((1.0 + q.value()) * t + a * (t + 1.0).sqrt() + b).ceil() as i64 };
        Ok(TruncationBound { a, b, reach })
    }
}

/// Leftmost site that can influence `[x, inf)` by time `t` except with
/// probability `tol`.
pub fn truncation_bound(t: f64, x: f64, q: QParam, tol: f64) -> Result<i64> {
    Ok(x.floor() as i64 - TruncationBound::new(t, q, tol)?.reach)
}

/// Outcome flags of one engine run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events: u64,
    pub jumps: u64,
    pub boundary_touched: bool,
}
