//! Synthetic order-dispatch simulation on a 9x9 grid: orders arrive over 20
//! steps per day, drivers serve at most one trip at a time, and unanswered
//! orders cancel after a patience window. The treatment policy scores matches
//! with a per-cell value table learned offline by TD on control data; the
//! control policy greedily minimizes pickup distance.

use crate::basis::FeatureMap;
use crate::env::{check_horizon, Cond, Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, Observation};

pub const GRID: usize = 9;
pub const STEPS_PER_DAY: usize = 20;
pub const ORDERS_PER_DAY: usize = 100;
pub const PATIENCE: usize = 3;
pub const BASE_FARE: f64 = 1.0;
pub const FARE_PER_CELL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriverSupply {
    UniformRange { lo: usize, hi: usize },
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    x: usize,
    y: usize,
}

impl Cell {
    fn index(&self) -> usize {
        self.y * GRID + self.x
    }

    fn distance(&self, other: &Cell) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }
}

fn random_cell(rng: &mut SimRng) -> Cell {
    Cell { x: rng.index(GRID), y: rng.index(GRID) }
}

#[derive(Debug, Clone)]
struct Driver {
    pos: Cell,
    free_at: usize,
}

#[derive(Debug, Clone)]
struct Order {
    origin: Cell,
    dest: Cell,
    arrival_step: usize,
    /// Matching rounds survived without being served.
    waited: usize,
}

fn fare(origin: &Cell, dest: &Cell) -> f64 {
    BASE_FARE + FARE_PER_CELL * origin.distance(dest) as f64
}

/// Per-day mutable simulation state.
#[derive(Debug, Clone)]
pub struct DispatchState {
    drivers: Vec<Driver>,
    /// Orders not yet arrived, in arrival order.
    pending: Vec<Order>,
    open: Vec<Order>,
    created: usize,
    served: usize,
    canceled: usize,
}

impl DispatchState {
    pub fn created(&self) -> usize {
        self.created
    }

    pub fn served(&self) -> usize {
        self.served
    }

    pub fn canceled(&self) -> usize {
        self.canceled
    }

    pub fn open_orders(&self) -> usize {
        self.open.len()
    }

    pub fn pending_orders(&self) -> usize {
        self.pending.len()
    }

    /// Conservation: every created order is served, canceled, open, or has not
    /// arrived yet.
    pub fn conserves_orders(&self) -> bool {
        self.created == self.served + self.canceled + self.open.len() + self.pending.len()
    }

    fn idle_drivers(&self, step: usize) -> usize {
        self.drivers.iter().filter(|d| d.free_at <= step).count()
    }

    fn observation(&self, step: usize) -> Observation {
        Observation::Continuous(vec![self.open.len() as f64, self.idle_drivers(step) as f64])
    }
}

#[derive(Debug, Clone)]
pub struct DispatchEnv {
    pub supply: DriverSupply,
    /// Expected future earnings per cell, learned offline by TD on control
    /// data; drives the treatment policy's match scores.
    cell_values: Vec<f64>,
}

impl DispatchEnv {
    pub fn new(supply: DriverSupply, training_seed: u64) -> Self {
        let mut env = DispatchEnv { supply, cell_values: vec![0.0; GRID * GRID] };
        env.train_cell_values(training_seed);
        env
    }

    /// TD(0) over trips observed in pre-generated control days: each served
    /// trip is a transition (driver cell -> destination) paying its fare.
    fn train_cell_values(&mut self, seed: u64) {
        const TRAINING_DAYS: usize = 40;
        const ALPHA: f64 = 0.05;
        const GAMMA: f64 = 0.9;
        let mut rng = SimRng::substream(seed, 0xd15);
        let mut transitions: Vec<(usize, f64, usize)> = Vec::new();
        for _ in 0..TRAINING_DAYS {
            let (mut state, _) = self.reset(&mut rng);
            for t in 1..=STEPS_PER_DAY {
                let matched = self.match_orders(&mut state, t, Action::Control);
                for m in &matched {
                    transitions.push((m.driver_cell, m.revenue, m.dest_cell));
                }
                self.advance(&mut state, t);
            }
        }
        for _ in 0..20 {
            for (from, revenue, to) in &transitions {
                let target = revenue + GAMMA * self.cell_values[*to];
                self.cell_values[*from] += ALPHA * (target - self.cell_values[*from]);
            }
        }
    }

    fn draw_drivers(&self, rng: &mut SimRng) -> usize {
        match self.supply {
            DriverSupply::Fixed(n) => n,
            DriverSupply::UniformRange { lo, hi } => rng.int_range(lo, hi),
        }
    }

    /// One matching round. Control sorts candidate pairs by pickup distance;
    /// treatment by fare plus the value gained by relocating the driver.
    fn match_orders(&self, state: &mut DispatchState, step: usize, policy: Action) -> Vec<Match> {
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        for (di, driver) in state.drivers.iter().enumerate() {
            if driver.free_at > step {
                continue;
            }
            for (oi, order) in state.open.iter().enumerate() {
                let pickup = driver.pos.distance(&order.origin) as f64;
                let key = match policy {
                    Action::Control => pickup,
                    Action::Treat => {
                        let revenue = fare(&order.origin, &order.dest);
                        let gain = self.cell_values[order.dest.index()]
                            - self.cell_values[driver.pos.index()];
                        // negate so ascending sort picks the best score first
                        -(revenue + gain) + 1e-3 * pickup
                    }
                };
                candidates.push((key, di, oi));
            }
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite match keys"));

        let mut driver_taken = vec![false; state.drivers.len()];
        let mut order_taken = vec![false; state.open.len()];
        let mut matches = Vec::new();
        for (_, di, oi) in candidates {
            if driver_taken[di] || order_taken[oi] {
                continue;
            }
            driver_taken[di] = true;
            order_taken[oi] = true;
            let order = &state.open[oi];
            let driver = &state.drivers[di];
            let pickup = driver.pos.distance(&order.origin);
            let trip = order.origin.distance(&order.dest);
            matches.push(Match {
                driver_idx: di,
                driver_cell: driver.pos.index(),
                dest_cell: order.dest.index(),
                revenue: fare(&order.origin, &order.dest),
                busy_steps: ((pickup + trip).div_ceil(3)).max(1),
            });
        }

        // apply matches: drivers relocate to destinations and go busy
        for m in &matches {
            let d = &mut state.drivers[m.driver_idx];
            d.pos = Cell { x: m.dest_cell % GRID, y: m.dest_cell / GRID };
            d.free_at = step + m.busy_steps;
        }
        let mut kept = Vec::with_capacity(state.open.len());
        for (oi, order) in state.open.drain(..).enumerate() {
            if !order_taken[oi] {
                kept.push(order);
            } else {
                state.served += 1;
            }
        }
        state.open = kept;
        matches
    }

    /// Age unmatched orders, cancel the stale ones, admit the next step's
    /// arrivals.
    fn advance(&self, state: &mut DispatchState, step: usize) {
        for order in &mut state.open {
            order.waited += 1;
        }
        let before = state.open.len();
        state.open.retain(|o| o.waited < PATIENCE);
        state.canceled += before - state.open.len();
        let next = step + 1;
        while state.pending.last().map_or(false, |o| o.arrival_step <= next) {
            state.open.push(state.pending.pop().expect("checked"));
        }
    }
}

struct Match {
    driver_idx: usize,
    driver_cell: usize,
    dest_cell: usize,
    revenue: f64,
    busy_steps: usize,
}

impl Environment for DispatchEnv {
    type State = DispatchState;

    fn horizon(&self) -> usize {
        STEPS_PER_DAY
    }

    fn reset(&self, rng: &mut SimRng) -> (DispatchState, Observation) {
        let n_drivers = self.draw_drivers(rng);
        let drivers = (0..n_drivers)
            .map(|_| Driver { pos: random_cell(rng), free_at: 0 })
            .collect();
        let mut orders: Vec<Order> = (0..ORDERS_PER_DAY)
            .map(|_| {
                let origin = random_cell(rng);
                let mut dest = random_cell(rng);
                while dest == origin {
                    dest = random_cell(rng);
                }
                Order {
                    origin,
                    dest,
                    arrival_step: rng.int_range(1, STEPS_PER_DAY),
                    waited: 0,
                }
            })
            .collect();
        // pending is popped from the back, so sort descending by arrival
        orders.sort_by(|a, b| b.arrival_step.cmp(&a.arrival_step));
        let mut state = DispatchState {
            drivers,
            pending: orders,
            open: Vec::new(),
            created: ORDERS_PER_DAY,
            served: 0,
            canceled: 0,
        };
        // admit step-1 arrivals
        while state.pending.last().map_or(false, |o| o.arrival_step <= 1) {
            let o = state.pending.pop().expect("checked");
            state.open.push(o);
        }
        let obs = state.observation(1);
        (state, obs)
    }

    fn step(
        &self,
        state: &mut DispatchState,
        t: usize,
        _current: &Observation,
        action: Action,
        _rng: &mut SimRng,
    ) -> Result<(f64, Observation)> {
        check_horizon(t, STEPS_PER_DAY)?;
        let matched = self.match_orders(state, t, action);
        let reward: f64 = matched.iter().map(|m| m.revenue).sum();
        self.advance(state, t);
        debug_assert!(state.conserves_orders());
        Ok((reward, state.observation(t + 1)))
    }

    fn feature_map(&self) -> FeatureMap {
        FeatureMap::Quadratic { dim: 2 }
    }
}

impl GroundTruth for DispatchEnv {
    fn true_ate(&self) -> Result<f64> {
        Err(Error::Capability("dispatch ATE is Monte Carlo only".into()))
    }

    fn true_value_function(&self, _a: Action, _t: usize, _cond: Cond) -> Result<f64> {
        Err(Error::Capability("dispatch has no exact value function".into()))
    }

    fn true_td_variance(&self, _a: Action, _t: usize, _cond: Cond) -> Result<f64> {
        Err(Error::Capability("dispatch has no exact TD variance".into()))
    }

    fn cumulative_reward_variance(&self, _a: Action, _o1: &Observation) -> Result<f64> {
        Err(Error::Capability("dispatch has no exact cumulative variance".into()))
    }

    fn arm_td_variance_sum(&self, _a: Action) -> Result<f64> {
        Err(Error::Capability("dispatch has no exact TD variance".into()))
    }

    fn init_value_gap_variance(&self) -> Result<f64> {
        Err(Error::Capability("dispatch has no exact value function".into()))
    }
}
