//! Bond-clock (Harris) construction.
//!
//! Every bond `(z, z+1)` of the window carries a rate-1 Poisson clock. The
//! superposition of `B` such clocks is a rate-`B` Poisson process whose
//! points pick their bond uniformly, which is how [`BondClockStream`] draws
//! them. Each event carries a uniform coin, consumed only when the lower
//! color sits on the right of the bond.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use super::{ColoredConfig, ParticleConfig, RunStats, Window};
use crate::error::{Error, Result};
use crate::qcomb::QParam;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondEvent {
    pub time: f64,
    /// Left site `z` of the bond `(z, z+1)`.
    pub bond: i64,
    pub coin: f64,
}

/// Lazily generated bond events on `[0, t]`, in time order.
pub struct BondClockStream<'a, R: Rng + ?Sized> {
    window: Window,
    horizon: f64,
    now: f64,
    gap: Option<Exp<f64>>,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> BondClockStream<'a, R> {
    pub fn new(window: Window, horizon: f64, rng: &'a mut R) -> Self {
        let bonds = window.bonds();
        let gap = (bonds > 0).then(|| Exp::new(bonds as f64).expect("positive rate"));
        BondClockStream { window, horizon, now: 0.0, gap, rng }
    }
}

impl<R: Rng + ?Sized> Iterator for BondClockStream<'_, R> {
    type Item = BondEvent;

    fn next(&mut self) -> Option<BondEvent> {
        let gap = self.gap.as_ref()?;
        self.now += gap.sample(self.rng);
        if self.now > self.horizon {
            self.gap = None;
            return None;
        }
        let bond = self.window.lo + self.rng.random_range(0..self.window.bonds()) as i64;
        let coin = self.rng.random();
        Some(BondEvent { time: self.now, bond, coin })
    }
}

/// A materialized Harris schedule, reusable across coupled projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ClockSchedule {
    pub window: Window,
    pub horizon: f64,
    events: Vec<BondEvent>,
}

impl ClockSchedule {
    pub fn generate<R: Rng + ?Sized>(window: Window, horizon: f64, rng: &mut R) -> Self {
        let events = BondClockStream::new(window, horizon, rng).collect();
        ClockSchedule { window, horizon, events }
    }

    /// Builds a schedule from explicit events; times must be strictly
    /// increasing and inside `[0, horizon]`.
    pub fn from_events(window: Window, horizon: f64, events: Vec<BondEvent>) -> Result<Self> {
        let schedule = ClockSchedule { window, horizon, events };
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn validate(&self) -> Result<()> {
        let mut last = 0.0f64;
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 && e.time <= last {
                return Err(Error::Schedule(format!("event {i} at time {} does not follow {last}", e.time)));
            }
            if !(0.0..=self.horizon).contains(&e.time) {
                return Err(Error::Schedule(format!("event {i} at time {} outside [0, {}]", e.time, self.horizon)));
            }
            if e.bond < self.window.lo || e.bond >= self.window.hi {
                return Err(Error::Schedule(format!("bond {} outside the window", e.bond)));
            }
            last = e.time;
        }
        Ok(())
    }

    pub fn events(&self) -> &[BondEvent] {
        &self.events
    }
}

/// Applies Harris updates to a colored configuration: if the left color is
/// lower the two swap; if it is higher they swap when `coin < q`.
pub fn apply_multi<I>(cfg: &mut ColoredConfig, q: QParam, events: I) -> Result<RunStats>
where
    I: IntoIterator<Item = BondEvent>,
{
    let window = cfg.window();
    let qv = q.value();
    let edge = [0, window.len() - 1];
    let colors = cfg.colors_mut();
    let mut stats = RunStats::default();
    let mut last = f64::NEG_INFINITY;
    for e in events {
        if e.time <= last {
            return Err(Error::Schedule(format!("simultaneous or unordered events at {}", e.time)));
        }
        last = e.time;
        stats.events += 1;
        let i = window.index(e.bond);
        let (a, b) = (colors[i], colors[i + 1]);
        let swap = match a.cmp(&b) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => e.coin < qv,
            std::cmp::Ordering::Equal => false,
        };
        if swap {
            colors.swap(i, i + 1);
            stats.jumps += 1;
            if a.is_hole() != b.is_hole() && (edge.contains(&i) || edge.contains(&(i + 1))) {
                stats.boundary_touched = true;
            }
        }
    }
    Ok(stats)
}

/// Runs the multi-species process for time `t` with fresh bond clocks.
pub fn simulate_multi<R: Rng + ?Sized>(
    cfg: &ColoredConfig,
    q: QParam,
    t: f64,
    rng: &mut R,
) -> Result<(ColoredConfig, RunStats)> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let mut out = cfg.clone();
    let stats = apply_multi(&mut out, q, BondClockStream::new(cfg.window(), t, rng))?;
    Ok((out, stats))
}

/// Single-species dynamics driven by the same bond events: a particle on
/// the left of a hole jumps right; a particle on the right of a hole jumps
/// left when `coin < q`. Projecting [`apply_multi`] at any color cutoff gives
/// the same configuration.
pub fn apply_single_bonds<I>(cfg: &ParticleConfig, q: QParam, events: I) -> Result<(ParticleConfig, RunStats)>
where
    I: IntoIterator<Item = BondEvent>,
{
    let window = cfg.window();
    let qv = q.value();
    let edge = [0, window.len() - 1];
    let mut occ = cfg.occupancy();
    let mut stats = RunStats::default();
    let mut last = f64::NEG_INFINITY;
    for e in events {
        if e.time <= last {
            return Err(Error::Schedule(format!("simultaneous or unordered events at {}", e.time)));
        }
        last = e.time;
        stats.events += 1;
        let i = window.index(e.bond);
        let jump = match (occ[i], occ[i + 1]) {
            (true, false) => true,
            (false, true) => e.coin < qv,
            _ => false,
        };
        if jump {
            occ.swap(i, i + 1);
            stats.jumps += 1;
            if edge.contains(&i) || edge.contains(&(i + 1)) {
                stats.boundary_touched = true;
            }
        }
    }
    Ok((ParticleConfig::from_occupancy(window, &occ), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asep::{step_init, Color};
    use crate::rng::{replica_rng, EngineId};

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let w = Window::new(-4, 4).unwrap();
        let cfg = ColoredConfig::from_particles(w, &[-1, 0], &[Color(2), Color(1)]).unwrap();
        let mut rng = replica_rng(1, EngineId::Harris, 0);
        let (out, stats) = simulate_multi(&cfg, q(0.5), 0.0, &mut rng).unwrap();
        assert_eq!(out, cfg);
        assert_eq!(stats.events, 0);
    }

    #[test]
    fn schedule_times_are_strictly_increasing() {
        let w = Window::new(0, 20).unwrap();
        let mut rng = replica_rng(2, EngineId::Harris, 0);
        let s = ClockSchedule::generate(w, 5.0, &mut rng);
        s.validate().unwrap();
        assert!(s.events().len() > 50);
        let dup = vec![BondEvent { time: 0.5, bond: 0, coin: 0.1 }, BondEvent { time: 0.5, bond: 1, coin: 0.1 }];
        assert!(ClockSchedule::from_events(w, 1.0, dup.clone()).is_err());
        let mut cfg = ColoredConfig::from_particles(w, &[0], &[Color(1)]).unwrap();
        assert!(apply_multi(&mut cfg, q(0.5), dup).is_err());
    }

    #[test]
    fn explicit_update_rules() {
        let w = Window::new(0, 2).unwrap();
        let mut cfg = ColoredConfig::from_particles(w, &[0, 1], &[Color(1), Color(2)]).unwrap();
        // lower color on the left always swaps
        apply_multi(&mut cfg, q(0.3), [BondEvent { time: 0.1, bond: 0, coin: 0.99 }]).unwrap();
        assert_eq!(cfg.colors()[..2], [Color(2), Color(1)]);
        // higher on the left swaps only if coin < q
        apply_multi(&mut cfg, q(0.3), [BondEvent { time: 0.1, bond: 0, coin: 0.5 }]).unwrap();
        assert_eq!(cfg.colors()[..2], [Color(2), Color(1)]);
        apply_multi(&mut cfg, q(0.3), [BondEvent { time: 0.1, bond: 0, coin: 0.2 }]).unwrap();
        assert_eq!(cfg.colors()[..2], [Color(1), Color(2)]);
    }

    #[test]
    fn projection_commutes_with_dynamics() {
        let w = Window::new(-12, 12).unwrap();
        for seed in 0..20 {
            let mut rng = replica_rng(seed, EngineId::Harris, 0);
            let cfg = crate::asep::mallows_colored_step_init(w, q(0.6), &mut rng).unwrap();
            let schedule = ClockSchedule::generate(w, 3.0, &mut rng);
            let mut multi = cfg.clone();
            apply_multi(&mut multi, q(0.6), schedule.events().iter().copied()).unwrap();
            for k in [0, 1, 3, 7, u64::MAX] {
                let (single, _) =
                    apply_single_bonds(&cfg.project(k), q(0.6), schedule.events().iter().copied()).unwrap();
                assert_eq!(multi.project(k), single, "seed {seed}, k {k}");
            }
        }
    }

    #[test]
    fn boundary_touch_is_flagged() {
        let w = Window::new(-3, 3).unwrap();
        let cfg = step_init(w).unwrap();
        let events = [BondEvent { time: 0.1, bond: -3, coin: 0.0 }];
        let (_, stats) = apply_single_bonds(&cfg, q(0.5), events).unwrap();
        assert!(!stats.boundary_touched);
        let events = [
            BondEvent { time: 0.1, bond: 0, coin: 0.9 },
            BondEvent { time: 0.2, bond: 1, coin: 0.9 },
            BondEvent { time: 0.3, bond: 2, coin: 0.9 },
        ];
        let (out, stats) = apply_single_bonds(&cfg, q(0.5), events).unwrap();
        assert!(stats.boundary_touched);
        assert_eq!(out.rightmost(), Some(3));
    }
}
