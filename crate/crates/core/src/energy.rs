//! First-order radio model and per-node battery state.

/// Per-bit radio constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    /// Electronics energy, J/bit (both transmit and receive).
    pub e_elec: f64,
    /// Free-space amplifier energy, J/bit/m².
    pub e_amp: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            e_elec: 50e-9,
            e_amp: 100e-12,
        }
    }
}

pub fn tx_cost(p: &RadioParams, bits: u64, distance: f64) -> f64 {
    let bits = bits as f64;
    bits * p.e_elec + bits * p.e_amp * distance * distance
}

pub fn rx_cost(p: &RadioParams, bits: u64) -> f64 {
    bits as f64 * p.e_elec
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Battery of one node. The sink is modelled with an infinite budget.
///
/// Draws are summed with compensation and `remaining` is derived from that
/// sum, so long runs of tiny debits do not drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyState {
    pub initial: f64,
    pub remaining: f64,
    pub alive: bool,
    drawn: Accumulator,
}

impl EnergyState {
    pub fn new(initial: f64) -> Self {
        Self {
            initial,
            remaining: initial,
            alive: initial > 0.0,
            drawn: Accumulator::default(),
        }
    }

    pub fn infinite() -> Self {
        Self::new(f64::INFINITY)
    }

    pub fn is_finite(&self) -> bool {
        self.initial.is_finite()
    }

    /// Energy drawn so far; zero for infinite-budget nodes.
    pub fn consumed(&self) -> f64 {
        if self.is_finite() {
            self.drawn.value()
        } else {
            0.0
        }
    }

    /// Applies one event's cost. An overdrawing event still completes and the
    /// node dies with its remaining budget clamped to zero.
    pub fn debit(mut self, amount: f64) -> EnergyState {
        debug_assert!(amount >= 0.0);
        if !self.is_finite() {
            return self;
        }
        self.drawn.add(amount.min(self.remaining));
        self.remaining = if amount >= self.remaining {
            0.0
        } else {
            (self.initial - self.drawn.value()).max(0.0)
        };
        self.alive = self.remaining > 0.0;
        self
    }

    /// Debits in place and returns the amount actually drawn from the budget.
    pub fn charge(&mut self, amount: f64) -> f64 {
        let before = self.remaining;
        *self = self.debit(amount);
        if self.is_finite() {
            amount.min(before)
        } else {
            0.0
        }
    }
}
