//! Uniform time grid and trajectory storage for the Volterra memory term
//! `∫₀ᵗ B(t − s, u(s), ζ(s)) ds`, evaluated by the composite trapezoidal rule.

use nalgebra::DVector;

use crate::error::{check_len, Error, Result};
use crate::spaces::Coeffs;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon {horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("step count must be at least 1".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_i = i·Δt`.
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dt()
    }

    /// The grid with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.steps * factor)
    }
}

/// Accepted `(u_i, ζ_i)` samples at grid nodes `0, 1, …`.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    grid: TimeGrid,
    u: Vec<Coeffs>,
    zeta: Vec<Coeffs>,
}

impl HistoryBuffer {
    pub fn new(grid: TimeGrid) -> Self {
        Self { grid, u: Vec::with_capacity(grid.steps() + 1), zeta: Vec::with_capacity(grid.steps() + 1) }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn capacity(&self) -> usize {
        self.grid.steps() + 1
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn append(&mut self, u: Coeffs, zeta: Coeffs) -> Result<()> {
        if self.len() >= self.capacity() {
            return Err(Error::HistoryOverflow { capacity: self.capacity() });
        }
        if let Some(first) = self.u.first() {
            check_len(first.len(), u.len())?;
            check_len(self.zeta[0].len(), zeta.len())?;
        }
        self.u.push(u);
        self.zeta.push(zeta);
        Ok(())
    }

    pub fn u(&self, i: usize) -> Result<&Coeffs> {
        self.u.get(i).ok_or(Error::HistoryIndex { index: i, len: self.len() })
    }

    pub fn zeta(&self, i: usize) -> Result<&Coeffs> {
        self.zeta.get(i).ok_or(Error::HistoryIndex { index: i, len: self.len() })
    }

    /// Trapezoidal sum over the stored nodes `0..n` for the integral up to
    /// `t_n`, without the endpoint node `n`. Requires `n ≥ 1` and nodes
    /// `0..n` stored.
    pub fn past_part<B>(&self, op_b: B, n: usize) -> Result<Coeffs>
    where
        B: Fn(f64, &Coeffs, &Coeffs) -> Coeffs,
    {
        if n == 0 || n > self.len() {
            return Err(Error::HistoryIndex { index: n, len: self.len() });
        }
        let dt = self.grid.dt();
        let mut acc = op_b(n as f64 * dt, &self.u[0], &self.zeta[0]) * (0.5 * dt);
        for i in 1..n {
            let lag = (n - i) as f64 * dt;
            acc += op_b(lag, &self.u[i], &self.zeta[i]) * dt;
        }
        Ok(acc)
    }

    /// The endpoint contribution `½Δt·B(0, u_n, ζ_n)`.
    pub fn endpoint<B>(&self, op_b: B, u_n: &Coeffs, zeta_n: &Coeffs) -> Coeffs
    where
        B: Fn(f64, &Coeffs, &Coeffs) -> Coeffs,
    {
        op_b(0.0, u_n, zeta_n) * (0.5 * self.grid.dt())
    }

    /// `Σ wᵢ Δt B(t_n − t_i, u_i, ζ_i)` with trapezoidal weights; zero at
    /// `n = 0`. Requires nodes `0..=n` stored.
    pub fn history_term<B>(&self, op_b: B, n: usize) -> Result<Coeffs>
    where
        B: Fn(f64, &Coeffs, &Coeffs) -> Coeffs,
    {
        if n >= self.len() {
            return Err(Error::HistoryIndex { index: n, len: self.len() });
        }
        if n == 0 {
            let dim = op_b(0.0, &self.u[0], &self.zeta[0]).len();
            return Ok(DVector::zeros(dim));
        }
        let mut acc = self.past_part(&op_b, n)?;
        acc += self.endpoint(&op_b, &self.u[n], &self.zeta[n]);
        Ok(acc)
    }
}
