//! Particle-clock engine for single-species ASEP.
//!
//! Only particles with an empty neighbour can move, so the engine keeps the
//! set of right-movable particles (rate 1 each) and left-movable particles
//! (rate q each) and runs a Gillespie loop over them. Blocked particles cost
//! nothing, which makes step initial data cheap.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{ParticleConfig, RunStats};
use crate::error::{Error, Result};
use crate::qcomb::QParam;

const ABSENT: u32 = u32::MAX;

/// Set of window indices with O(1) insert, remove and uniform pick.
struct IndexSet {
    items: Vec<u32>,
    slot: Vec<u32>,
}

impl IndexSet {
    fn new(universe: usize) -> Self {
        IndexSet { items: Vec::new(), slot: vec![ABSENT; universe] }
    }

    #[inline]
    fn len(&self) -> usize {
        self.items.len()
    }

    #[inline]
    fn set(&mut self, i: usize, member: bool) {
        let present = self.slot[i] != ABSENT;
        if member && !present {
            self.slot[i] = self.items.len() as u32;
            self.items.push(i as u32);
        } else if !member && present {
            let pos = self.slot[i] as usize;
            let last = self.items.pop().expect("nonempty");
            if last as usize != i {
                self.items[pos] = last;
                self.slot[last as usize] = pos as u32;
            }
            self.slot[i] = ABSENT;
        }
    }

    #[inline]
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.items[rng.random_range(0..self.items.len())] as usize
    }
}

struct Mobility {
    occ: Vec<bool>,
    right: IndexSet,
    left: IndexSet,
}

impl Mobility {
    fn new(occ: Vec<bool>) -> Self {
        let n = occ.len();
        let mut m = Mobility { occ, right: IndexSet::new(n), left: IndexSet::new(n) };
        for i in 0..n {
            m.refresh(i);
        }
        m
    }

    #[inline]
    fn refresh(&mut self, i: usize) {
        let n = self.occ.len();
        let here = self.occ[i];
        self.right.set(i, here && i + 1 < n && !self.occ[i + 1]);
        self.left.set(i, here && i > 0 && !self.occ[i - 1]);
    }

    #[inline]
    fn jump(&mut self, from: usize, to: usize) {
        debug_assert!(self.occ[from] && !self.occ[to], "exclusion violated");
        self.occ[from] = false;
        self.occ[to] = true;
        let lo = from.min(to).saturating_sub(1);
        let hi = (from.max(to) + 1).min(self.occ.len() - 1);
        for i in lo..=hi {
            self.refresh(i);
        }
    }
}

/// Runs single-species ASEP for time `t`: each particle jumps right at rate
/// 1 and left at rate `q` when the target site is empty.
pub fn simulate_single<R: Rng + ?Sized>(
    cfg: &ParticleConfig,
    q: QParam,
    t: f64,
    rng: &mut R,
) -> Result<(ParticleConfig, RunStats)> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    let window = cfg.window();
    let last = window.len() - 1;
    let qv = q.value();
    let mut state = Mobility::new(cfg.occupancy());
    let mut stats = RunStats::default();
    let mut now = 0.0;
    loop {
        let n_right = state.right.len() as f64;
        let rate = n_right + qv * state.left.len() as f64;
        if rate == 0.0 {
            break;
        }
        let gap: f64 = Exp1.sample(rng);
        now += gap / rate;
        if now > t {
            break;
        }
        stats.events += 1;
        let (from, to) = if rng.random::<f64>() * rate < n_right {
            let i = state.right.pick(rng);
            (i, i + 1)
        } else {
            let i = state.left.pick(rng);
            (i, i - 1)
        };
        state.jump(from, to);
        stats.jumps += 1;
        if from == 0 || to == 0 || from == last || to == last {
            stats.boundary_touched = true;
        }
    }
    Ok((ParticleConfig::from_occupancy(window, &state.occ), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asep::{step_init, Window};
    use crate::rng::{replica_rng, EngineId};

    #[test]
    fn zero_time_is_identity() {
        let cfg = step_init(Window::new(-5, 5).unwrap()).unwrap();
        let mut rng = replica_rng(0, EngineId::ParticleClock, 0);
        let (out, stats) = simulate_single(&cfg, QParam::new(0.5).unwrap(), 0.0, &mut rng).unwrap();
        assert_eq!(out, cfg);
        assert_eq!(stats.events, 0);
    }

    #[test]
    fn particle_count_is_conserved() {
        let w = Window::new(-30, 30).unwrap();
        let cfg = ParticleConfig::new(w, vec![-3, -2, 0, 4, 5]).unwrap();
        for seed in 0..50 {
            let mut rng = replica_rng(seed, EngineId::ParticleClock, 0);
            let (out, stats) = simulate_single(&cfg, QParam::new(0.4).unwrap(), 4.0, &mut rng).unwrap();
            assert_eq!(out.len(), cfg.len());
            assert!(!stats.boundary_touched);
        }
    }

    #[test]
    fn free_particle_at_q_zero_only_moves_right() {
        let w = Window::new(0, 200).unwrap();
        let cfg = ParticleConfig::new(w, vec![10]).unwrap();
        let mut total = 0i64;
        let reps = 4000;
        for seed in 0..reps {
            let mut rng = replica_rng(seed, EngineId::ParticleClock, 0);
            let (out, _) = simulate_single(&cfg, QParam::new(0.0).unwrap(), 3.0, &mut rng).unwrap();
            let d = out.sites()[0] - 10;
            assert!(d >= 0);
            total += d;
        }
        // Poisson(3): mean 3, standard error sqrt(3 / reps)
        let mean = total as f64 / reps as f64;
        assert!((mean - 3.0).abs() < 4.0 * (3.0 / reps as f64).sqrt(), "{mean}");
    }
}
